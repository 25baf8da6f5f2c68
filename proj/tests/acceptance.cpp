// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
//
// Release gate: ten numbered checks, one pass/fail line each. Exits nonzero
// if any check fails. Slow end-to-end fits use the committed reference
// config and target renders under the repository root.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sdrf/config.hpp"
#include "sdrf/diffusion.hpp"
#include "sdrf/image_io.hpp"
#include "sdrf/losses.hpp"
#include "sdrf/metrics.hpp"
#include "sdrf/renderer.hpp"
#include "sdrf/sampling.hpp"
#include "sdrf/trainer.hpp"

#include "support/fd_check.hpp"

namespace {

using namespace sdrf;
using Clock = std::chrono::steady_clock;

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint64_t kEvalSeed = 0x5eedbeef;

const std::filesystem::path kRepoDir = SDRF_REPO_DIR;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Gate {
    int failures = 0;

    void run(int index, const std::string& label, const std::function<bool(std::string&)>& body) {
        std::string detail;
        bool ok = false;
        try {
            ok = body(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::cout << (ok ? "[PASS]" : "[FAIL]") << " C" << index << " " << label;
        if (!detail.empty()) std::cout << " (" << detail << ")";
        std::cout << std::endl;
        if (!ok) ++failures;
    }
};

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(4);
    ss << v;
    return ss.str();
}

Image random_image(int w, int h, Pcg32& rng, double scale) {
    Image im(w, h);
    for (Vec3& p : im.pixels) p = {scale * rng.next_gaussian(), scale * rng.next_gaussian(), scale * rng.next_gaussian()};
    return im;
}

// Dense field seen through a narrow frustum: every ray is solidly foreground,
// keeping the finite-difference probe away from the opacity gate threshold.
VoxelField fd_scene_field() {
    VoxelField f = make_field({4, 4, 4}, {-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}, FieldInit::Empty);
    Pcg32 rng(2024);
    for (std::size_t i = 0; i < f.density_raw.size(); ++i)
        f.density_raw[i] = inv_softplus(1.2) + 0.3 * rng.next_gaussian();
    for (double& c : f.color_raw) c = 0.8 * rng.next_gaussian();
    f.background_raw = {logit(0.3), logit(0.5), logit(0.7)};
    return f;
}

// One latent-space loss evaluation with frozen sample positions and frozen
// denoised estimates, the seam the analytic backward pass is checked against.
double fd_loss_at(const VoxelField& field, const RenderResult& base, const Image& z_hat, const Image& x_hat,
                  double omega_t, double t, const LossWeights& weights, const LatentCodec& codec) {
    const RenderResult res = rerender_at_positions(field, base);
    const Image z = codec.encode(res.image);
    return total_loss_and_grads(field, res, z, z_hat, x_hat, omega_t, t, weights, codec).breakdown.total;
}

RunConfig load_reference_config() {
    RunConfig cfg = load_run_config(kRepoDir / "configs" / "reference_fit.json");
    return cfg;
}

// Fit a run config to completion and return the trained field plus log.
struct FitResult {
    VoxelField field;
    std::vector<LossBreakdown> log;
};

FitResult fit(RunConfig cfg) {
    prepare_oracle(cfg);
    FitResult r{cfg.field.make(), {}};
    r.log = train(r.field, cfg.train);
    return r;
}

RenderResult eval_render(const VoxelField& field, const RunConfig& cfg) {
    Pcg32 unused(0);
    const Camera cam = sample_pose(cfg.train.pose, cfg.train.image_width, cfg.train.image_height, unused);
    return render_image(field, cam, cfg.train.sampling, kEvalSeed, cfg.train.threads);
}

// 32x32 variant of the reference run used by the paired-seed property checks.
RunConfig small_reference_config(int total_iter) {
    RunConfig cfg = load_reference_config();
    cfg.train.image_width = 32;
    cfg.train.image_height = 32;
    cfg.train.total_iter = total_iter;
    cfg.target_image = kRepoDir / "assets" / "reference_target_32.ppm";
    cfg.train.oracle.target_latent = Image{};
    return cfg;
}

bool check_eq5_eq6(std::string& detail) {
    const auto t0 = Clock::now();
    Pcg32 rng(101);
    NoiseSchedule sched;
    double worst = 0.0;
    for (int rep = 0; rep < 10000; ++rep) {
        const Image z = random_image(2, 2, rng, 1.5);
        const Image z_star = random_image(2, 2, rng, 1.5);
        const Image eps = random_image(2, 2, rng, 1.0);
        const double t = sched.t_min + (sched.t_max - sched.t_min) * rng.next_double();
        const ScheduleValues at = schedule_at(sched, t);

        ScoreOracle oracle;
        oracle.kind = OracleKind::TargetLatent;
        oracle.target_latent = z_star;
        const Image z_t = add_noise(z, at, eps);
        const Image eps_hat = oracle_eps(oracle, z_t, t, sched);
        const Image z_hat = estimate_latent_single(z_t, eps_hat, at);

        const Image lhs = at.omega * (eps_hat - eps);
        const Image rhs = (at.omega * at.alpha / at.sigma) * (z - z_hat);
        const double scale = std::max(std::sqrt(sum_squares(lhs)), std::sqrt(sum_squares(rhs)));
        if (scale > 0.0) worst = std::max(worst, std::sqrt(sum_squares(lhs - rhs)) / scale);
    }
    const double dt = seconds_since(t0);
    detail = "worst rel " + fmt(worst) + ", " + fmt(dt) + " s";
    return worst < 1e-10 && dt < 1.0;
}

bool check_fd_gradients(std::string& detail) {
    const auto t0 = Clock::now();
    VoxelField field = fd_scene_field();
    const Camera cam = orbit_camera(0.6, 0.25, 2.5, {0.0, 0.0, 0.0}, 0.5, 8, 8);
    SamplingConfig sampling;
    sampling.n_coarse = 16;
    sampling.n_fine = 16;
    const RenderResult base = render_image(field, cam, sampling, 23, 1);
    for (const RayRecord& r : base.rays) {
        if (std::abs(r.out.opacity - kForegroundOpacity) <= 1e-3) {
            detail = "scene too close to the opacity gate";
            return false;
        }
    }

    const LatentCodec codec{4};
    const Image z = codec.encode(base.image);
    Pcg32 rng(7);
    Image z_hat = z;
    for (Vec3& p : z_hat.pixels)
        p += Vec3{0.3 * rng.next_gaussian(), 0.3 * rng.next_gaussian(), 0.3 * rng.next_gaussian()};
    const Image x_hat = codec.decode(z_hat);
    const double omega_t = 0.8;
    const double t = 0.4;
    const LossWeights weights;

    const TotalLoss tl = total_loss_and_grads(field, base, z, z_hat, x_hat, omega_t, t, weights, codec);

    double max_grad = 0.0;
    const std::size_t n_params = testsup::field_param_count(field);
    for (std::size_t i = 0; i < n_params; ++i)
        max_grad = std::max(max_grad, std::abs(testsup::field_grad_at(tl.grads, i)));

    const double h = 1e-5;
    int checked = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < n_params; ++i) {
        const double g = testsup::field_grad_at(tl.grads, i);
        if (std::abs(g) < 1e-4 * max_grad) continue;
        double& p = testsup::field_param(field, i);
        const double saved = p;
        p = saved + h;
        const double up = fd_loss_at(field, base, z_hat, x_hat, omega_t, t, weights, codec);
        p = saved - h;
        const double dn = fd_loss_at(field, base, z_hat, x_hat, omega_t, t, weights, codec);
        p = saved;
        const double fd = (up - dn) / (2.0 * h);
        worst = std::max(worst, testsup::rel_err(fd, g));
        ++checked;
    }
    const double dt = seconds_since(t0);
    detail = std::to_string(checked) + " params, worst rel " + fmt(worst) + ", " + fmt(dt) + " s";
    return checked >= 100 && worst < 1e-5 && dt < 30.0;
}

bool check_annealing(std::string& detail) {
    const long total = 10000;
    const AnnealKind kinds[] = {AnnealKind::Sqrt, AnnealKind::Linear, AnnealKind::Cosine};
    for (AnnealKind kind : kinds) {
        AnnealSchedule s;
        s.kind = kind;
        s.total_iter = total;
        if (anneal_t(s, 0) != s.t_max || anneal_t(s, total) != s.t_min) {
            detail = "endpoint not exact";
            return false;
        }
        double prev = anneal_t(s, 0);
        for (long i = 1; i <= total; ++i) {
            const double t = anneal_t(s, i);
            if (t > prev) {
                detail = "not monotone at iter " + std::to_string(i);
                return false;
            }
            prev = t;
        }
    }
    AnnealSchedule sqrt_s;
    sqrt_s.total_iter = total;
    long below = 0;
    const double midpoint = 0.5 * (sqrt_s.t_min + sqrt_s.t_max);
    for (long i = 0; i <= total; ++i)
        if (anneal_t(sqrt_s, i) < midpoint) ++below;
    detail = std::to_string(below) + "/" + std::to_string(total + 1) + " sqrt iters below midpoint";
    return 2 * below > total + 1;
}

bool check_kernel_smoothing(std::string& detail) {
    const auto t0 = Clock::now();

    WeightPdf uniform;
    uniform.bin_edges = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
    uniform.weights = {1.0, 1.0, 1.0, 1.0, 1.0};
    const WeightPdf uniform_s = kernel_smooth(uniform, Kernel{});
    if (uniform_s.weights != uniform.weights) {
        detail = "uniform weights are not a fixed point";
        return false;
    }

    WeightPdf spike = uniform;
    spike.weights = {0.0, 0.0, 4.0, 0.0, 0.0};
    const WeightPdf spike_s = kernel_smooth(spike, Kernel{});
    const std::vector<double> expected = {0.0, 4.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0, 0.0};
    if (spike_s.weights != expected) {
        detail = "spike response mismatch";
        return false;
    }

    // Empirical bin mass of 1e6 inverse-CDF draws against the smoothed pdf.
    WeightPdf pdf;
    const int bins = 16;
    Pcg32 rng(404);
    pdf.bin_edges.resize(bins + 1);
    for (int i = 0; i <= bins; ++i) pdf.bin_edges[i] = 4.0 * i / bins;
    pdf.weights.resize(bins);
    for (double& w : pdf.weights) w = 0.05 + rng.next_double();
    const WeightPdf smoothed = kernel_smooth(pdf, Kernel{});

    const int n_draws = 1000000;
    const ImportanceResult draws = importance_sample(smoothed, n_draws, rng);
    std::vector<long> counts(bins, 0);
    for (double x : draws.positions) {
        int b = int(x / 4.0 * bins);
        b = std::min(std::max(b, 0), bins - 1);
        ++counts[std::size_t(b)];
    }
    const double total = smoothed.total_weight();
    double tv = 0.0;
    for (int i = 0; i < bins; ++i)
        tv += 0.5 * std::abs(double(counts[std::size_t(i)]) / n_draws - smoothed.weights[std::size_t(i)] / total);

    const double dt = seconds_since(t0);
    detail = "tv " + fmt(tv) + " at 1e6 draws, " + fmt(dt) + " s";
    return tv < 0.01 && dt < 10.0;
}

bool check_zvar_semantics(std::string& detail) {
    RenderOutput dirac;
    dirac.weights = {0.7};
    dirac.positions = {2.0};
    dirac.opacity = 0.7;
    dirac.background = false;
    if (z_variance(dirac) != 0.0) {
        detail = "dirac variance not exactly zero";
        return false;
    }

    RenderOutput two;
    two.weights = {0.5, 0.25};
    two.positions = {1.0, 2.0};
    two.opacity = 0.75;
    two.background = false;
    const double err = std::abs(z_variance(two) - 2.0 / 9.0);
    detail = "two-point err " + fmt(err);
    return err < 1e-12;
}

bool check_oracle_convergence(std::string& detail) {
    const auto t0 = Clock::now();
    const RunConfig cfg = load_reference_config();
    const Image target = read_image(cfg.target_image);
    const FitResult r = fit(cfg);
    const double p = psnr(eval_render(r.field, cfg).image, target);
    const double dt = seconds_since(t0);
    detail = fmt(p) + " dB after " + std::to_string(cfg.train.total_iter) + " iters, " + fmt(dt) + " s";
    return p > 25.0 && dt < 600.0;
}

bool check_zvar_ablation(std::string& detail) {
    const int seeds = 3;
    double zv_on = 0.0, zv_off = 0.0, ps_on = 0.0, ps_off = 0.0;
    const RunConfig base = small_reference_config(600);
    const Image target = read_image(base.target_image);
    for (int s = 0; s < seeds; ++s) {
        for (int v = 0; v < 2; ++v) {
            RunConfig cfg = base;
            cfg.train.seed = mix_seed(11, std::uint64_t(s));
            if (v == 1) cfg.train.loss.lambda_zvar = 0.0;
            const FitResult r = fit(cfg);
            const RenderResult res = eval_render(r.field, cfg);
            (v == 0 ? zv_on : zv_off) += foreground_zvar_mean(res.rays) / seeds;
            (v == 0 ? ps_on : ps_off) += psnr(res.image, target) / seeds;
        }
    }
    detail = "fg zvar " + fmt(zv_on) + " vs " + fmt(zv_off) + ", psnr " + fmt(ps_on) + " vs " + fmt(ps_off) + " dB";
    return zv_on * 2.0 <= zv_off && ps_on > ps_off - 1.0;
}

bool check_flicker_ratio(std::string& detail) {
    // The sharp field: the reference run at 32x32 with the variance penalty on.
    RunConfig cfg = small_reference_config(600);
    cfg.train.seed = mix_seed(11, 0);
    const FitResult r = fit(cfg);
    Pcg32 unused(0);
    const Camera cam = sample_pose(cfg.train.pose, 32, 32, unused);

    int wins = 0;
    const int trials = 5;
    for (int k = 0; k < trials; ++k) {
        const std::uint64_t base_seed = mix_seed(777, std::uint64_t(k));
        double std_v[2] = {0.0, 0.0};
        for (int v = 0; v < 2; ++v) {
            SamplingConfig sampling = cfg.train.sampling;
            sampling.kernel_smooth = v == 0;
            std::vector<Image> stack;
            for (int s = 0; s < 16; ++s)
                stack.push_back(render_image(r.field, cam, sampling, mix_seed(base_seed, std::uint64_t(s)), 1).image);
            std_v[v] = mean_pixel_std(stack);
        }
        if (std_v[0] < std_v[1]) ++wins;
    }
    detail = std::to_string(wins) + "/" + std::to_string(trials) + " trials with smoothing quieter";
    return wins >= 4;
}

bool check_schedule_ablation(std::string& detail) {
    const int pairs = 5;
    int wins = 0;
    const RunConfig base = small_reference_config(400);
    for (int s = 0; s < pairs; ++s) {
        // Final latent-residual loss omega(t)*|z - z_hat|^2: annealed runs end
        // at low noise where the render and the denoised estimate agree, while
        // random sampling can finish on a large, weakly informative timestep.
        double final_loss[2] = {0.0, 0.0};
        const AnnealKind kinds[2] = {AnnealKind::Sqrt, AnnealKind::Random};
        for (int v = 0; v < 2; ++v) {
            RunConfig cfg = base;
            cfg.train.seed = mix_seed(29, std::uint64_t(s));
            cfg.train.anneal = kinds[v];
            const FitResult r = fit(cfg);
            if (r.log.empty()) continue;
            const LossBreakdown& last = r.log.back();
            final_loss[v] = schedule_at(cfg.train.schedule, last.t_used).omega * last.sds_latent;
        }
        if (final_loss[0] < final_loss[1]) ++wins;
    }
    detail = std::to_string(wins) + "/" + std::to_string(pairs) + " pairs where sqrt wins";
    return wins >= 4;
}

bool check_determinism(std::string& detail) {
    RunConfig cfg = small_reference_config(25);
    cfg.train.image_width = 16;
    cfg.train.image_height = 16;
    cfg.train.pose.fixed = false;  // orbit poses draw from the run stream
    cfg.train.anneal = AnnealKind::Random;
    cfg.train.oracle.kind = OracleKind::GaussianPrior;
    cfg.target_image.clear();
    cfg.train.seed = 555;

    const std::filesystem::path tmp = std::filesystem::temp_directory_path() / "sdrf_acceptance_c10";
    std::filesystem::create_directories(tmp);

    auto run_once = [&](int tag) {
        const FitResult r = fit(cfg);
        std::ostringstream log;
        log.precision(17);
        for (const LossBreakdown& b : r.log)
            log << b.t_used << ',' << b.sds_latent << ',' << b.sds_image << ',' << b.zvar << ',' << b.total << '\n';
        Pcg32 unused(0);
        const Camera cam = orbit_camera(0.8, 0.3, cfg.train.pose.radius, cfg.train.pose.target,
                                        cfg.train.pose.vertical_fov, 16, 16);
        const RenderResult res = render_image(r.field, cam, cfg.train.sampling, kEvalSeed, 1);
        const std::filesystem::path img = tmp / ("run_" + std::to_string(tag) + ".ppm");
        write_ppm(res.image, img);
        std::ifstream in(img, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return std::pair<std::string, std::string>(log.str(), bytes);
    };

    const auto a = run_once(0);
    const auto b = run_once(1);
    cfg.train.seed = 556;
    const auto c = run_once(2);

    if (a.first != b.first || a.second != b.second) {
        detail = "repeat run differs";
        return false;
    }
    if (a.first == c.first) {
        detail = "different seed produced an identical log";
        return false;
    }
    detail = std::to_string(a.first.size()) + " log bytes and " + std::to_string(a.second.size()) +
             " image bytes identical";
    return true;
}

}  // namespace

int main() {
    std::cout << "reference config: " << (kRepoDir / "configs" / "reference_fit.json").string() << std::endl;
    Gate gate;
    gate.run(1, "denoiser residual equals scaled latent residual", check_eq5_eq6);
    gate.run(2, "analytic gradients match finite differences", check_fd_gradients);
    gate.run(3, "annealing endpoints, monotonicity, midpoint mass", check_annealing);
    gate.run(4, "kernel smoothing exact cases and sampled mass", check_kernel_smoothing);
    gate.run(5, "ray variance exact on dirac and two-point rays", check_zvar_semantics);
    gate.run(6, "target-oracle fit reaches 25 dB", check_oracle_convergence);
    gate.run(7, "variance penalty sharpens without hurting fidelity", check_zvar_ablation);
    gate.run(8, "pdf smoothing reduces seed flicker", check_flicker_ratio);
    gate.run(9, "sqrt annealing beats random timesteps", check_schedule_ablation);
    gate.run(10, "fixed-seed runs are bit-identical", check_determinism);

    if (gate.failures == 0) {
        std::cout << "acceptance: all 10 checks passed" << std::endl;
        return 0;
    }
    std::cout << "acceptance: " << gate.failures << " check(s) failed" << std::endl;
    return 1;
}
