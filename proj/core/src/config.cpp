// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#include "sdrf/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include <json.hpp>

#include "sdrf/errors.hpp"
#include "sdrf/image_io.hpp"

namespace sdrf {

using nlohmann::json;

const char* const kOutputRootEnv = "SDRF_OUT_ROOT";

VoxelField FieldConfig::make() const {
    return make_field(resolution, bbox_min, bbox_max, init, blob_peak_density, blob_sigma_frac);
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& dir) {
    const char* root = std::getenv(kOutputRootEnv);
    if (root && *root && dir.is_relative()) return std::filesystem::path(root) / dir;
    return dir;
}

namespace {

constexpr double kPi = 3.14159265358979323846;
double deg_to_rad(double d) { return d * kPi / 180.0; }
double rad_to_deg(double r) { return r * 180.0 / kPi; }

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError("config key '" + path + "': " + message);
}

void check_keys(const json& obj, const std::string& prefix, const std::set<std::string>& allowed) {
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key()))
            throw ConfigError("unknown config key '" + (prefix.empty() ? item.key() : prefix + "." + item.key()) +
                              "'");
    }
}

std::string join_key(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

double get_num(const json& obj, const std::string& prefix, const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) fail(join_key(prefix, key), "expected a number");
    return obj[key].get<double>();
}

long get_int(const json& obj, const std::string& prefix, const std::string& key, long fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer()) fail(join_key(prefix, key), "expected an integer");
    return obj[key].get<long>();
}

bool get_bool(const json& obj, const std::string& prefix, const std::string& key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_boolean()) fail(join_key(prefix, key), "expected a boolean");
    return obj[key].get<bool>();
}

std::string get_str(const json& obj, const std::string& prefix, const std::string& key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string()) fail(join_key(prefix, key), "expected a string");
    return obj[key].get<std::string>();
}

Vec3 get_vec3(const json& obj, const std::string& prefix, const std::string& key, const Vec3& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& a = obj[key];
    if (!a.is_array() || a.size() != 3 || !a[0].is_number() || !a[1].is_number() || !a[2].is_number())
        fail(join_key(prefix, key), "expected an array of 3 numbers");
    return Vec3{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object: " + path.string());

    check_keys(j, "", {"output_dir", "seed", "total_iter", "image_width", "image_height", "threads", "log_every",
                       "checkpoint_every", "codec_factor", "field", "pose", "sampling", "schedule", "anneal",
                       "oracle", "denoise", "loss", "optim"});

    const std::filesystem::path base = path.parent_path();
    RunConfig c;
    c.output_dir = get_str(j, "", "output_dir", "out");
    c.train.seed = std::uint64_t(get_int(j, "", "seed", 0));
    c.train.total_iter = get_int(j, "", "total_iter", 10000);
    c.train.image_width = int(get_int(j, "", "image_width", 64));
    c.train.image_height = int(get_int(j, "", "image_height", 64));
    c.train.threads = int(get_int(j, "", "threads", 1));
    c.train.log_every = get_int(j, "", "log_every", 1);
    c.train.checkpoint_every = get_int(j, "", "checkpoint_every", 0);
    c.train.codec_factor = int(get_int(j, "", "codec_factor", 4));

    if (c.train.total_iter < 0) fail("total_iter", "must be >= 0");
    if (c.train.image_width < 1 || c.train.image_height < 1) fail("image_width", "image dims must be >= 1");
    if (c.train.codec_factor < 1) fail("codec_factor", "must be >= 1");
    if (c.train.image_width % c.train.codec_factor != 0 || c.train.image_height % c.train.codec_factor != 0)
        fail("image_width", "image dims must be divisible by codec_factor");

    if (j.contains("field")) {
        const json& f = j["field"];
        check_keys(f, "field", {"resolution", "bbox_min", "bbox_max", "init", "blob_peak_density", "blob_sigma_frac"});
        if (f.contains("resolution")) {
            const json& r = f["resolution"];
            if (!r.is_array() || r.size() != 3) fail("field.resolution", "expected an array of 3 integers");
            for (int a = 0; a < 3; ++a) {
                if (!r[a].is_number_integer() || r[a].get<long>() < 2)
                    fail("field.resolution", "components must be integers >= 2");
                c.field.resolution[std::size_t(a)] = int(r[a].get<long>());
            }
        }
        c.field.bbox_min = get_vec3(f, "field", "bbox_min", c.field.bbox_min);
        c.field.bbox_max = get_vec3(f, "field", "bbox_max", c.field.bbox_max);
        const std::string init = get_str(f, "field", "init", "blob");
        if (init == "blob") c.field.init = FieldInit::Blob;
        else if (init == "empty") c.field.init = FieldInit::Empty;
        else fail("field.init", "expected 'blob' or 'empty'");
        c.field.blob_peak_density = get_num(f, "field", "blob_peak_density", c.field.blob_peak_density);
        c.field.blob_sigma_frac = get_num(f, "field", "blob_sigma_frac", c.field.blob_sigma_frac);
    }

    if (j.contains("pose")) {
        const json& p = j["pose"];
        check_keys(p, "pose", {"mode", "azimuth_deg", "elevation_deg", "azimuth_range_deg", "elevation_range_deg",
                               "radius", "target", "fov_deg"});
        const std::string mode = get_str(p, "pose", "mode", "orbit");
        if (mode == "fixed") c.train.pose.fixed = true;
        else if (mode == "orbit") c.train.pose.fixed = false;
        else fail("pose.mode", "expected 'orbit' or 'fixed'");
        c.train.pose.azimuth = deg_to_rad(get_num(p, "pose", "azimuth_deg", rad_to_deg(c.train.pose.azimuth)));
        c.train.pose.elevation = deg_to_rad(get_num(p, "pose", "elevation_deg", rad_to_deg(c.train.pose.elevation)));
        for (const char* key : {"azimuth_range_deg", "elevation_range_deg"}) {
            if (!p.contains(key)) continue;
            const json& r = p[key];
            if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
                fail(std::string("pose.") + key, "expected an array of 2 numbers");
            const double lo = deg_to_rad(r[0].get<double>());
            const double hi = deg_to_rad(r[1].get<double>());
            if (!(lo <= hi)) fail(std::string("pose.") + key, "range must be ordered");
            if (std::string(key) == "azimuth_range_deg") {
                c.train.pose.azimuth_min = lo;
                c.train.pose.azimuth_max = hi;
            } else {
                c.train.pose.elevation_min = lo;
                c.train.pose.elevation_max = hi;
            }
        }
        c.train.pose.radius = get_num(p, "pose", "radius", c.train.pose.radius);
        if (c.train.pose.radius <= 0.0) fail("pose.radius", "must be > 0");
        c.train.pose.target = get_vec3(p, "pose", "target", c.train.pose.target);
        c.train.pose.vertical_fov = deg_to_rad(get_num(p, "pose", "fov_deg", rad_to_deg(c.train.pose.vertical_fov)));
        if (!(c.train.pose.vertical_fov > 0.0 && c.train.pose.vertical_fov < kPi))
            fail("pose.fov_deg", "fov must be in (0, 180)");
    }

    if (j.contains("sampling")) {
        const json& s = j["sampling"];
        check_keys(s, "sampling", {"n_coarse", "n_fine", "kernel_smooth", "kernel_taps", "jitter", "t_near", "t_far",
                                   "delta_cap", "weight_floor"});
        c.train.sampling.n_coarse = int(get_int(s, "sampling", "n_coarse", c.train.sampling.n_coarse));
        c.train.sampling.n_fine = int(get_int(s, "sampling", "n_fine", c.train.sampling.n_fine));
        if (c.train.sampling.n_coarse < 2) fail("sampling.n_coarse", "must be >= 2");
        if (c.train.sampling.n_fine < 1) fail("sampling.n_fine", "must be >= 1");
        c.train.sampling.kernel_smooth = get_bool(s, "sampling", "kernel_smooth", c.train.sampling.kernel_smooth);
        if (s.contains("kernel_taps")) {
            const json& k = s["kernel_taps"];
            if (!k.is_array() || k.empty() || k.size() % 2 == 0)
                fail("sampling.kernel_taps", "expected an odd-length array of numbers");
            c.train.sampling.kernel.taps.clear();
            for (const auto& tap : k) {
                if (!tap.is_number() || tap.get<double>() < 0.0)
                    fail("sampling.kernel_taps", "taps must be numbers >= 0");
                c.train.sampling.kernel.taps.push_back(tap.get<double>());
            }
        }
        c.train.sampling.jitter = get_bool(s, "sampling", "jitter", c.train.sampling.jitter);
        c.train.sampling.t_near = get_num(s, "sampling", "t_near", c.train.sampling.t_near);
        c.train.sampling.t_far = get_num(s, "sampling", "t_far", c.train.sampling.t_far);
        if (!(c.train.sampling.t_near >= 0.0 && c.train.sampling.t_near < c.train.sampling.t_far))
            fail("sampling.t_near", "need 0 <= t_near < t_far");
        c.train.sampling.delta_cap = get_num(s, "sampling", "delta_cap", c.train.sampling.delta_cap);
        c.train.sampling.weight_floor = get_num(s, "sampling", "weight_floor", c.train.sampling.weight_floor);
    }

    if (j.contains("schedule")) {
        const json& s = j["schedule"];
        check_keys(s, "schedule", {"t_min", "t_max", "weight"});
        c.train.schedule.t_min = get_num(s, "schedule", "t_min", c.train.schedule.t_min);
        c.train.schedule.t_max = get_num(s, "schedule", "t_max", c.train.schedule.t_max);
        if (!(c.train.schedule.t_min > 0.0 && c.train.schedule.t_min < c.train.schedule.t_max &&
              c.train.schedule.t_max < 1.0))
            fail("schedule.t_min", "need 0 < t_min < t_max < 1");
        const std::string w = get_str(s, "schedule", "weight", "sigma2");
        if (w == "sigma2") c.train.schedule.weight = WeightKind::SigmaSq;
        else if (w == "one") c.train.schedule.weight = WeightKind::One;
        else fail("schedule.weight", "expected 'sigma2' or 'one'");
    }

    {
        const std::string a = get_str(j, "", "anneal", "sqrt");
        if (a == "sqrt") c.train.anneal = AnnealKind::Sqrt;
        else if (a == "linear") c.train.anneal = AnnealKind::Linear;
        else if (a == "cosine") c.train.anneal = AnnealKind::Cosine;
        else if (a == "random") c.train.anneal = AnnealKind::Random;
        else fail("anneal", "expected 'sqrt', 'linear', 'cosine', or 'random'");
    }

    if (j.contains("oracle")) {
        const json& o = j["oracle"];
        check_keys(o, "oracle", {"variant", "target_image", "prior_variance", "guidance_scale"});
        const std::string v = get_str(o, "oracle", "variant", "target-latent");
        if (v == "target-latent") c.train.oracle.kind = OracleKind::TargetLatent;
        else if (v == "gaussian-prior") c.train.oracle.kind = OracleKind::GaussianPrior;
        else if (v == "guided") c.train.oracle.kind = OracleKind::Guided;
        else fail("oracle.variant", "expected 'target-latent', 'gaussian-prior', or 'guided'");
        const std::string target = get_str(o, "oracle", "target_image", "");
        if (!target.empty()) {
            std::filesystem::path t(target);
            c.target_image = t.is_relative() ? base / t : t;
        }
        c.train.oracle.prior_variance = get_num(o, "oracle", "prior_variance", c.train.oracle.prior_variance);
        if (c.train.oracle.prior_variance <= 0.0) fail("oracle.prior_variance", "must be > 0");
        c.train.oracle.guidance_scale = get_num(o, "oracle", "guidance_scale", c.train.oracle.guidance_scale);
    }
    if (c.train.oracle.kind != OracleKind::GaussianPrior) {
        if (c.target_image.empty())
            fail("oracle.target_image", "required for the target-latent and guided oracles");
        if (!std::filesystem::exists(c.target_image))
            fail("oracle.target_image", "file not found: " + c.target_image.string());
    }

    if (j.contains("denoise")) {
        const json& d = j["denoise"];
        check_keys(d, "denoise", {"steps", "eta", "r"});
        c.train.denoise.steps = int(get_int(d, "denoise", "steps", c.train.denoise.steps));
        if (c.train.denoise.steps < 1) fail("denoise.steps", "must be >= 1");
        c.train.denoise.eta = get_num(d, "denoise", "eta", c.train.denoise.eta);
        if (c.train.denoise.eta < 0.0) fail("denoise.eta", "must be >= 0");
        c.train.denoise.ratio = get_num(d, "denoise", "r", c.train.denoise.ratio);
        if (!(c.train.denoise.ratio > 0.0 && c.train.denoise.ratio < 1.0)) fail("denoise.r", "must be in (0, 1)");
    }

    if (j.contains("loss")) {
        const json& l = j["loss"];
        check_keys(l, "loss", {"lambda_rgb", "lambda_zvar", "space"});
        c.train.loss.lambda_rgb = get_num(l, "loss", "lambda_rgb", c.train.loss.lambda_rgb);
        c.train.loss.lambda_zvar = get_num(l, "loss", "lambda_zvar", c.train.loss.lambda_zvar);
        if (c.train.loss.lambda_rgb < 0.0 || c.train.loss.lambda_zvar < 0.0)
            fail("loss.lambda_rgb", "loss weights must be >= 0");
        const std::string space = get_str(l, "loss", "space", "latent_image");
        if (space == "latent_image") c.train.loss.space = LossSpace::LatentImage;
        else if (space == "latent_only") c.train.loss.space = LossSpace::LatentOnly;
        else if (space == "image_only") c.train.loss.space = LossSpace::ImageOnly;
        else fail("loss.space", "expected 'latent_image', 'latent_only', or 'image_only'");
    }

    if (j.contains("optim")) {
        const json& o = j["optim"];
        check_keys(o, "optim", {"lr_field", "lr_background", "grad_clip"});
        c.train.lr_field = get_num(o, "optim", "lr_field", c.train.lr_field);
        c.train.lr_background = get_num(o, "optim", "lr_background", c.train.lr_background);
        if (c.train.lr_field <= 0.0 || c.train.lr_background <= 0.0) fail("optim.lr_field", "rates must be > 0");
        c.train.grad_clip = get_num(o, "optim", "grad_clip", c.train.grad_clip);
    }

    return c;
}

void prepare_oracle(RunConfig& config) {
    if (config.train.oracle.kind == OracleKind::GaussianPrior) return;
    const Image target = read_image(config.target_image);
    if (target.width != config.train.image_width || target.height != config.train.image_height)
        throw ConfigError("oracle.target_image size " + std::to_string(target.width) + "x" +
                          std::to_string(target.height) + " does not match the configured render size");
    LatentCodec codec{config.train.codec_factor};
    config.train.oracle.target_latent = codec.encode(target);
}

std::string run_config_to_json(const RunConfig& c) {
    json j;
    j["output_dir"] = c.output_dir.string();
    j["seed"] = c.train.seed;
    j["total_iter"] = c.train.total_iter;
    j["image_width"] = c.train.image_width;
    j["image_height"] = c.train.image_height;
    j["threads"] = c.train.threads;
    j["log_every"] = c.train.log_every;
    j["checkpoint_every"] = c.train.checkpoint_every;
    j["codec_factor"] = c.train.codec_factor;

    j["field"]["resolution"] = c.field.resolution;
    j["field"]["bbox_min"] = {c.field.bbox_min.x, c.field.bbox_min.y, c.field.bbox_min.z};
    j["field"]["bbox_max"] = {c.field.bbox_max.x, c.field.bbox_max.y, c.field.bbox_max.z};
    j["field"]["init"] = c.field.init == FieldInit::Blob ? "blob" : "empty";
    j["field"]["blob_peak_density"] = c.field.blob_peak_density;
    j["field"]["blob_sigma_frac"] = c.field.blob_sigma_frac;

    j["pose"]["mode"] = c.train.pose.fixed ? "fixed" : "orbit";
    j["pose"]["azimuth_deg"] = rad_to_deg(c.train.pose.azimuth);
    j["pose"]["elevation_deg"] = rad_to_deg(c.train.pose.elevation);
    j["pose"]["azimuth_range_deg"] = {rad_to_deg(c.train.pose.azimuth_min), rad_to_deg(c.train.pose.azimuth_max)};
    j["pose"]["elevation_range_deg"] = {rad_to_deg(c.train.pose.elevation_min),
                                        rad_to_deg(c.train.pose.elevation_max)};
    j["pose"]["radius"] = c.train.pose.radius;
    j["pose"]["target"] = {c.train.pose.target.x, c.train.pose.target.y, c.train.pose.target.z};
    j["pose"]["fov_deg"] = rad_to_deg(c.train.pose.vertical_fov);

    j["sampling"]["n_coarse"] = c.train.sampling.n_coarse;
    j["sampling"]["n_fine"] = c.train.sampling.n_fine;
    j["sampling"]["kernel_smooth"] = c.train.sampling.kernel_smooth;
    j["sampling"]["kernel_taps"] = c.train.sampling.kernel.taps;
    j["sampling"]["jitter"] = c.train.sampling.jitter;
    j["sampling"]["t_near"] = c.train.sampling.t_near;
    j["sampling"]["t_far"] = c.train.sampling.t_far;
    j["sampling"]["delta_cap"] = c.train.sampling.delta_cap;
    j["sampling"]["weight_floor"] = c.train.sampling.weight_floor;

    j["schedule"]["t_min"] = c.train.schedule.t_min;
    j["schedule"]["t_max"] = c.train.schedule.t_max;
    j["schedule"]["weight"] = c.train.schedule.weight == WeightKind::SigmaSq ? "sigma2" : "one";

    switch (c.train.anneal) {
        case AnnealKind::Sqrt: j["anneal"] = "sqrt"; break;
        case AnnealKind::Linear: j["anneal"] = "linear"; break;
        case AnnealKind::Cosine: j["anneal"] = "cosine"; break;
        case AnnealKind::Random: j["anneal"] = "random"; break;
    }

    switch (c.train.oracle.kind) {
        case OracleKind::TargetLatent: j["oracle"]["variant"] = "target-latent"; break;
        case OracleKind::GaussianPrior: j["oracle"]["variant"] = "gaussian-prior"; break;
        case OracleKind::Guided: j["oracle"]["variant"] = "guided"; break;
    }
    if (!c.target_image.empty()) j["oracle"]["target_image"] = c.target_image.string();
    j["oracle"]["prior_variance"] = c.train.oracle.prior_variance;
    j["oracle"]["guidance_scale"] = c.train.oracle.guidance_scale;

    j["denoise"]["steps"] = c.train.denoise.steps;
    j["denoise"]["eta"] = c.train.denoise.eta;
    j["denoise"]["r"] = c.train.denoise.ratio;

    j["loss"]["lambda_rgb"] = c.train.loss.lambda_rgb;
    j["loss"]["lambda_zvar"] = c.train.loss.lambda_zvar;
    j["loss"]["space"] = c.train.loss.space == LossSpace::LatentImage
                             ? "latent_image"
                             : (c.train.loss.space == LossSpace::LatentOnly ? "latent_only" : "image_only");

    j["optim"]["lr_field"] = c.train.lr_field;
    j["optim"]["lr_background"] = c.train.lr_background;
    j["optim"]["grad_clip"] = c.train.grad_clip;

    return j.dump(2) + "\n";
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write config: " + path.string());
    out << run_config_to_json(config);
}

}  // namespace sdrf
