// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command line front end: fit / render / eval-flicker / ablate.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "sdrf/config.hpp"
#include "sdrf/diffusion.hpp"
#include "sdrf/errors.hpp"
#include "sdrf/image_io.hpp"
#include "sdrf/metrics.hpp"
#include "sdrf/trainer.hpp"

namespace {

using namespace sdrf;

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint64_t kEvalSeed = 0x5eedbeef;  // fixed stream for post-training metric renders

struct PoseSpec {
    double azimuth_deg = 30.0;
    double elevation_deg = 20.0;
    double radius = 2.5;
};

PoseSpec parse_pose(const std::string& text) {
    PoseSpec p;
    std::istringstream ss(text);
    char c1 = 0, c2 = 0;
    if (!(ss >> p.azimuth_deg >> c1 >> p.elevation_deg >> c2 >> p.radius) || c1 != ',' || c2 != ',' || !ss.eof())
        throw ConfigError("--pose expects 'azimuth_deg,elevation_deg,radius'");
    if (p.radius <= 0.0) throw ConfigError("--pose radius must be > 0");
    return p;
}

Camera pose_camera(const PoseSpec& p, const Vec3& target, double fov, int width, int height) {
    return orbit_camera(p.azimuth_deg * kPi / 180.0, p.elevation_deg * kPi / 180.0, p.radius, target, fov, width,
                        height);
}

std::string format_index(const char* prefix, int i, const char* suffix) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%03d%s", prefix, i, suffix);
    return buf;
}

ScalarMap map_of(const RenderResult& res, MapChannel channel) {
    ScalarMap m;
    m.width = res.image.width;
    m.height = res.image.height;
    m.values.resize(res.rays.size());
    for (std::size_t i = 0; i < res.rays.size(); ++i) {
        const RenderOutput& o = res.rays[i].out;
        switch (channel) {
            case MapChannel::Depth: m.values[i] = o.depth; break;
            case MapChannel::Disparity: m.values[i] = o.disparity; break;
            case MapChannel::Opacity: m.values[i] = o.opacity; break;
            case MapChannel::ZVariance: m.values[i] = o.zvar; break;
        }
    }
    return m;
}

void write_aux_maps(const RenderResult& res, const std::filesystem::path& dir, const std::string& stem) {
    const std::pair<MapChannel, const char*> channels[] = {
        {MapChannel::Depth, "depth"},
        {MapChannel::Disparity, "disparity"},
        {MapChannel::Opacity, "opacity"},
        {MapChannel::ZVariance, "zvar"},
    };
    for (const auto& [channel, name] : channels) {
        const ScalarMap m = map_of(res, channel);
        double lo = m.values.empty() ? 0.0 : m.values[0];
        double hi = lo;
        for (double v : m.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        write_scalar_map(m, channel, dir / (stem + "_" + name + ".smap"));
        write_scalar_png(m, lo, hi, dir / (stem + "_" + name + ".png"));
    }
}

double flicker_std(const VoxelField& field, const Camera& cam, SamplingConfig sampling, bool kernel_smooth,
                   int n_seeds, std::uint64_t base_seed, int threads) {
    sampling.kernel_smooth = kernel_smooth;
    std::vector<Image> stack;
    stack.reserve(std::size_t(n_seeds));
    for (int s = 0; s < n_seeds; ++s)
        stack.push_back(render_image(field, cam, sampling, mix_seed(base_seed, std::uint64_t(s)), threads).image);
    return mean_pixel_std(stack);
}

struct FitOutcome {
    VoxelField field;
    std::vector<LossBreakdown> log;
    std::optional<double> psnr;  // vs the oracle target, fixed-pose runs only
};

/// Shared by fit and ablate. Streams the CSV when log_path is non-empty.
FitOutcome run_fit(const RunConfig& config, const std::filesystem::path& log_path,
                   const std::filesystem::path& ckpt_dir) {
    RunConfig cfg = config;
    prepare_oracle(cfg);
    std::optional<Image> target;
    if (cfg.train.oracle.kind != OracleKind::GaussianPrior) target = read_image(cfg.target_image);

    std::ofstream log_file;
    if (!log_path.empty()) {
        log_file.open(log_path, std::ios::trunc);
        if (!log_file) throw ConfigError("cannot write log: " + log_path.string());
        log_file << "iter,t,sds_latent,sds_image,zvar,total,psnr\n";
        log_file.precision(12);
    }

    FitOutcome out;
    out.field = cfg.field.make();
    TrainHooks hooks;
    if (log_file.is_open()) {
        hooks.on_log = [&](long iter, const LossBreakdown& b, const Image& render) {
            log_file << iter << ',' << b.t_used << ',' << b.sds_latent << ',' << b.sds_image << ',' << b.zvar << ','
                     << b.total << ',';
            if (target && cfg.train.pose.fixed) log_file << psnr(render, *target);
            log_file << '\n';
        };
    }
    if (!ckpt_dir.empty() && cfg.train.checkpoint_every > 0) {
        hooks.on_checkpoint = [&](long iter, const VoxelField& f) {
            save_field(f, ckpt_dir / format_index("ckpt_", int(iter), ".sfld"));
        };
    }

    out.log = train(out.field, cfg.train, hooks);

    if (target && cfg.train.pose.fixed) {
        Pcg32 unused(0);
        const Camera cam =
            sample_pose(cfg.train.pose, cfg.train.image_width, cfg.train.image_height, unused);
        const RenderResult final_render =
            render_image(out.field, cam, cfg.train.sampling, kEvalSeed, cfg.train.threads);
        out.psnr = psnr(final_render.image, *target);
    }
    return out;
}

int cmd_fit(const std::string& config_path, std::optional<std::uint64_t> seed_override) {
    RunConfig config = load_run_config(config_path);
    if (seed_override) config.train.seed = *seed_override;
    const std::filesystem::path out_dir = resolve_output_dir(config.output_dir);
    std::filesystem::create_directories(out_dir);
    save_run_config(config, out_dir / "config.json");

    const FitOutcome fit = run_fit(config, out_dir / "train_log.csv", out_dir);
    save_field(fit.field, out_dir / "final.sfld");

    Pcg32 preview_rng(0x9e11);
    const Camera cam = config.train.pose.fixed
                           ? sample_pose(config.train.pose, config.train.image_width, config.train.image_height,
                                         preview_rng)
                           : orbit_camera(0.6, 0.35, config.train.pose.radius, config.train.pose.target,
                                          config.train.pose.vertical_fov, config.train.image_width,
                                          config.train.image_height);
    const RenderResult preview = render_image(fit.field, cam, config.train.sampling, kEvalSeed, config.train.threads);
    write_png(preview.image, out_dir / "preview.png");
    write_ppm(preview.image, out_dir / "preview.ppm");

    std::cout << "fit: " << config.train.total_iter << " iterations, artifacts in " << out_dir.string();
    if (fit.psnr) std::cout << ", psnr_vs_target=" << *fit.psnr << " dB";
    std::cout << "\n";
    return 0;
}

int cmd_render(const std::string& ckpt_path, std::optional<int> orbit, const std::string& pose_text, bool aux,
               std::uint64_t seed, const std::string& out_dir_text, int width, int height, double fov_deg,
               double elevation_deg, double radius, SamplingConfig sampling, int threads) {
    const VoxelField field = load_field(ckpt_path);
    const std::filesystem::path out_dir = resolve_output_dir(out_dir_text);
    std::filesystem::create_directories(out_dir);
    const Vec3 target = 0.5 * (field.bbox_min + field.bbox_max);
    const double fov = fov_deg * kPi / 180.0;

    std::vector<Camera> cams;
    if (orbit) {
        if (*orbit < 1) throw ConfigError("--orbit must be >= 1");
        for (int i = 0; i < *orbit; ++i) {
            const double az = 2.0 * kPi * i / *orbit;
            cams.push_back(orbit_camera(az, elevation_deg * kPi / 180.0, radius, target, fov, width, height));
        }
    } else {
        const PoseSpec p = pose_text.empty() ? PoseSpec{} : parse_pose(pose_text);
        cams.push_back(pose_camera(p, target, fov, width, height));
    }

    for (std::size_t i = 0; i < cams.size(); ++i) {
        const RenderResult res = render_image(field, cams[i], sampling, mix_seed(seed, i), threads);
        const std::string stem = format_index("view_", int(i), "");
        write_png(res.image, out_dir / (stem + ".png"));
        if (aux) write_aux_maps(res, out_dir, stem);
    }
    std::cout << "render: " << cams.size() << " view(s) in " << out_dir.string() << "\n";
    return 0;
}

int cmd_eval_flicker(const std::string& ckpt_path, int n_seeds, bool no_kernel_smooth, const std::string& pose_text,
                     std::uint64_t seed, const std::string& out_text, int width, int height, double fov_deg,
                     SamplingConfig sampling, int threads) {
    if (n_seeds < 1) throw ConfigError("--seeds must be >= 1");
    const VoxelField field = load_field(ckpt_path);
    const Vec3 target = 0.5 * (field.bbox_min + field.bbox_max);
    const PoseSpec p = pose_text.empty() ? PoseSpec{} : parse_pose(pose_text);
    const Camera cam = pose_camera(p, target, fov_deg * kPi / 180.0, width, height);

    const double std_off = flicker_std(field, cam, sampling, false, n_seeds, seed, threads);
    std::optional<double> std_on;
    if (!no_kernel_smooth) std_on = flicker_std(field, cam, sampling, true, n_seeds, seed, threads);

    std::cout << "flicker_std_ks_off=" << std_off << "\n";
    if (std_on) {
        std::cout << "flicker_std_ks_on=" << *std_on << "\n";
        std::cout << "flicker_ratio=" << (std_off > 0.0 ? *std_on / std_off : 0.0) << "\n";
    }
    if (!out_text.empty()) {
        const std::filesystem::path out = resolve_output_dir(out_text);
        if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
        std::ofstream f(out, std::ios::trunc);
        if (!f) throw ConfigError("cannot write report: " + out.string());
        f.precision(12);
        f << "seeds,std_ks_on,std_ks_off,ratio\n";
        f << n_seeds << ',' << (std_on ? *std_on : 0.0) << ',' << std_off << ','
          << (std_on && std_off > 0.0 ? *std_on / std_off : 0.0) << '\n';
    }
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& axis, int n_seeds) {
    const RunConfig base = load_run_config(config_path);
    const std::filesystem::path out_dir = resolve_output_dir(base.output_dir);
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(out_dir / ("ablate_" + axis + ".csv"), std::ios::trunc);
    if (!csv) throw ConfigError("cannot write ablation table");
    csv.precision(12);

    const bool has_target = base.train.oracle.kind != OracleKind::GaussianPrior;

    if (axis == "schedule") {
        // Columns hold the final latent-residual loss omega(t)*|z - z_hat|^2.
        csv << "seed,sqrt,random,linear,cosine\n";
        const AnnealKind kinds[] = {AnnealKind::Sqrt, AnnealKind::Random, AnnealKind::Linear, AnnealKind::Cosine};
        for (int s = 0; s < n_seeds; ++s) {
            csv << s;
            for (AnnealKind kind : kinds) {
                RunConfig cfg = base;
                cfg.train.seed = mix_seed(base.train.seed, std::uint64_t(s));
                cfg.train.anneal = kind;
                const FitOutcome fit = run_fit(cfg, {}, {});
                double final_loss = 0.0;
                if (!fit.log.empty()) {
                    const LossBreakdown& last = fit.log.back();
                    final_loss = schedule_at(cfg.train.schedule, last.t_used).omega * last.sds_latent;
                }
                csv << ',' << final_loss;
            }
            csv << '\n';
        }
    } else if (axis == "zvar") {
        csv << "seed,fg_zvar_on,fg_zvar_off,psnr_on,psnr_off\n";
        for (int s = 0; s < n_seeds; ++s) {
            double fg[2] = {0.0, 0.0}, ps[2] = {0.0, 0.0};
            const double lambdas[2] = {base.train.loss.lambda_zvar, 0.0};
            for (int v = 0; v < 2; ++v) {
                RunConfig cfg = base;
                cfg.train.seed = mix_seed(base.train.seed, std::uint64_t(s));
                cfg.train.loss.lambda_zvar = lambdas[v];
                const FitOutcome fit = run_fit(cfg, {}, {});
                Pcg32 unused(0);
                const Camera cam = sample_pose(cfg.train.pose, cfg.train.image_width, cfg.train.image_height, unused);
                const RenderResult res =
                    render_image(fit.field, cam, cfg.train.sampling, kEvalSeed, cfg.train.threads);
                fg[v] = foreground_zvar_mean(res.rays);
                ps[v] = fit.psnr.value_or(0.0);
            }
            csv << s << ',' << fg[0] << ',' << fg[1] << ',' << ps[0] << ',' << ps[1] << '\n';
        }
    } else if (axis == "image-loss") {
        if (!has_target) throw ConfigError("axis=image-loss needs an oracle with a target image");
        csv << "seed,psnr_latent_image,psnr_latent_only,psnr_image_only\n";
        const LossSpace spaces[] = {LossSpace::LatentImage, LossSpace::LatentOnly, LossSpace::ImageOnly};
        for (int s = 0; s < n_seeds; ++s) {
            csv << s;
            for (LossSpace space : spaces) {
                RunConfig cfg = base;
                cfg.train.seed = mix_seed(base.train.seed, std::uint64_t(s));
                cfg.train.loss.space = space;
                const FitOutcome fit = run_fit(cfg, {}, {});
                csv << ',' << fit.psnr.value_or(0.0);
            }
            csv << '\n';
        }
    } else if (axis == "ks") {
        csv << "seed,std_on,std_off,ratio\n";
        for (int s = 0; s < n_seeds; ++s) {
            RunConfig cfg = base;
            cfg.train.seed = mix_seed(base.train.seed, std::uint64_t(s));
            const FitOutcome fit = run_fit(cfg, {}, {});
            Pcg32 unused(0);
            const Camera cam = sample_pose(cfg.train.pose, cfg.train.image_width, cfg.train.image_height, unused);
            const double std_on = flicker_std(fit.field, cam, cfg.train.sampling, true, 16,
                                              mix_seed(cfg.train.seed, 0xf11c), cfg.train.threads);
            const double std_off = flicker_std(fit.field, cam, cfg.train.sampling, false, 16,
                                               mix_seed(cfg.train.seed, 0xf11c), cfg.train.threads);
            csv << s << ',' << std_on << ',' << std_off << ',' << (std_off > 0.0 ? std_on / std_off : 0.0) << '\n';
        }
    } else {
        throw ConfigError("--axis must be one of schedule, zvar, image-loss, ks");
    }
    std::cout << "ablate: axis=" << axis << ", table in " << out_dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Score-distillation radiance-field toolkit"};
    app.require_subcommand(1);

    // fit
    std::string fit_config;
    std::optional<std::uint64_t> fit_seed;
    CLI::App* fit = app.add_subcommand("fit", "Optimize a field from a run config");
    fit->add_option("config", fit_config, "Run config JSON")->required();
    fit->add_option("--seed", fit_seed, "Override the config seed");

    // shared render-ish options
    std::string ckpt, pose_text, out_text;
    std::optional<int> orbit;
    bool aux = false, no_ks = false, no_jitter = false;
    std::uint64_t seed = 0;
    int width = 64, height = 64, threads = 1;
    double fov_deg = 40.0, elevation_deg = 15.0, radius = 2.5;
    SamplingConfig sampling;

    CLI::App* render = app.add_subcommand("render", "Render a checkpoint");
    render->add_option("checkpoint", ckpt, "Field checkpoint (.sfld)")->required();
    CLI::Option* orbit_opt = render->add_option("--orbit", orbit, "Render N poses around a full turn");
    render->add_option("--pose", pose_text, "Single pose 'azimuth_deg,elevation_deg,radius'")->excludes(orbit_opt);
    render->add_flag("--aux", aux, "Also write depth/disparity/opacity/zvar maps");
    render->add_option("--seed", seed, "Sampling seed");
    render->add_option("--out", out_text, "Output directory")->default_val("renders");
    render->add_option("--width", width);
    render->add_option("--height", height);
    render->add_option("--fov-deg", fov_deg);
    render->add_option("--elevation-deg", elevation_deg, "Orbit elevation");
    render->add_option("--radius", radius, "Orbit radius");
    render->add_option("--n-coarse", sampling.n_coarse);
    render->add_option("--n-fine", sampling.n_fine);
    render->add_flag("--no-kernel-smooth", no_ks, "Disable pdf smoothing");
    render->add_flag("--no-jitter", no_jitter, "Deterministic midpoint sampling");
    render->add_option("--threads", threads);

    std::string fl_ckpt, fl_pose, fl_out;
    int fl_seeds = 16, fl_width = 64, fl_height = 64, fl_threads = 1;
    std::uint64_t fl_seed = 0;
    double fl_fov = 40.0;
    bool fl_no_ks = false, fl_no_jitter = false;
    SamplingConfig fl_sampling;
    CLI::App* flicker = app.add_subcommand("eval-flicker", "Measure per-pixel std across sampling seeds");
    flicker->add_option("checkpoint", fl_ckpt)->required();
    flicker->add_option("--seeds", fl_seeds, "Number of re-renders")->required();
    flicker->add_flag("--no-kernel-smooth", fl_no_ks, "Measure only the smoothing-off setting");
    flicker->add_option("--pose", fl_pose, "'azimuth_deg,elevation_deg,radius'");
    flicker->add_option("--seed", fl_seed, "Base sampling seed");
    flicker->add_option("--out", fl_out, "Optional CSV report path");
    flicker->add_option("--width", fl_width);
    flicker->add_option("--height", fl_height);
    flicker->add_option("--fov-deg", fl_fov);
    flicker->add_option("--n-coarse", fl_sampling.n_coarse);
    flicker->add_option("--n-fine", fl_sampling.n_fine);
    flicker->add_flag("--no-jitter", fl_no_jitter, "Deterministic midpoint sampling");
    flicker->add_option("--threads", fl_threads);

    std::string ab_config, ab_axis;
    int ab_seeds = 5;
    CLI::App* ablate = app.add_subcommand("ablate", "Paired-seed comparisons along one axis");
    ablate->add_option("config", ab_config, "Run config JSON")->required();
    ablate->add_option("--axis", ab_axis, "schedule | zvar | image-loss | ks")->required();
    ablate->add_option("--seeds", ab_seeds, "Paired seeds per variant");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*fit) return cmd_fit(fit_config, fit_seed);
        if (*render) {
            sampling.kernel_smooth = !no_ks;
            sampling.jitter = !no_jitter;
            return cmd_render(ckpt, orbit, pose_text, aux, seed, out_text, width, height, fov_deg, elevation_deg,
                              radius, sampling, threads);
        }
        if (*flicker) {
            fl_sampling.jitter = !fl_no_jitter;
            return cmd_eval_flicker(fl_ckpt, fl_seeds, fl_no_ks, fl_pose, fl_seed, fl_out, fl_width, fl_height,
                                    fl_fov, fl_sampling, fl_threads);
        }
        if (*ablate) return cmd_ablate(ab_config, ab_axis, ab_seeds);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
