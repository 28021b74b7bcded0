// Acceptance suite: one pass/fail line per criterion, nonzero exit if any fails.

#include "eqf/analysis.hpp"
#include "eqf/experiments.hpp"
#include "eqf/kp_experiment.hpp"
#include "eqf/order_detect.hpp"
#include "eqf/parallel.hpp"
#include "eqf/patch.hpp"
#include "eqf/projective.hpp"
#include "eqf/rng.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace eqf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [FAILED]");
    }
};

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

unsigned worker_count() { return std::max(1u, std::min(8u, std::thread::hardware_concurrency())); }

// Oversubscribed on small machines on purpose: the comparison must involve real concurrency.
constexpr unsigned determinism_threads = 4;

struct Criterion {
    int id;
    const char* name;
    double runtime_limit_s; // 0: no limit stated
    std::function<Outcome()> run;
};

// ---------------------------------------------------------------------------

Outcome effective_noise_law() {
    Outcome o;
    const projective::CoarseStepConfig cfg{10, 10, 1e-3, 0.1, 0.0};
    const auto t = projective::run_coarse_trajectory(0.0, micro::SdeModel::zero_drift(), cfg, 10000, {101, 0, 0},
                                                     worker_count());
    const auto m = analysis::increment_moments(t.values, cfg.dt_macro);
    const double expect = 0.1 / std::sqrt(10 * 10 * 1e-3);
    o.require(std::abs(projective::effective_noise_std(cfg) - expect) < 1e-12, "closed form " + num(expect));
    o.require(std::abs(m.std_per_step - expect) <= 3 * m.se_std,
              "increment std " + num(m.std_per_step) + " vs " + num(expect) + " within 3 SE (" + num(3 * m.se_std) + ")");
    return o;
}

Outcome noise_suppression() {
    Outcome o;
    const projective::CoarseStepConfig cfg{1000, 10, 1e-3, 0.1, 0.0};
    const auto t = projective::run_coarse_trajectory(0.0, micro::SdeModel::ornstein_uhlenbeck(), cfg, 20000,
                                                     {102, 0, 0}, worker_count());
    const double s_eff = projective::effective_noise_std(cfg);
    const double suppressed = oracle::ar1_variance(1.0 - cfg.dt_macro, s_eff);
    const auto law = analysis::stationary_variance_test(t.values, suppressed, 0.15);
    o.require(std::abs(suppressed - 5.263e-3) < 1e-5, "suppressed AR(1) value " + num(suppressed));
    o.require(law.pass, "tail variance " + num(law.measured) + " vs " + num(suppressed) + " within 15%");
    const auto consistent = analysis::stationary_variance_test(t.values, 0.5, 0.15);
    o.require(!consistent.pass, "comparison against consistent 0.5 fails as asserted");
    return o;
}

Outcome consistency_and_cost() {
    Outcome o;
    const projective::CoarseStepConfig cfg{10, 10, 1e-3, 0.1, 0.0};
    const long long n_steps = 100000;
    const auto t = projective::run_coarse_trajectory(0.0, micro::SdeModel::ornstein_uhlenbeck(), cfg, n_steps,
                                                     {103, 0, 0}, worker_count());
    // independent reference: direct Euler-Maruyama at step Delta t with a different generator
    const double reference = oracle::direct_em_ou_variance(1.0, cfg.dt_macro, 2000000, 103);
    const auto v = analysis::stationary_variance_test(t.values, reference, 0.10);
    o.require(v.pass, "tail variance " + num(v.measured) + " vs direct EM " + num(reference) + " within 10%");
    const long long brute = projective::brute_force_micro_steps(static_cast<double>(n_steps) * cfg.dt_macro, cfg.dt_micro);
    o.require(t.ledger.micro_steps_total == brute,
              "ledger " + std::to_string(t.ledger.micro_steps_total) + " == brute force " + std::to_string(brute));
    return o;
}

patch::PatchConfig patch_cfg(patch::LiftingVariant v, double dx, double Dt, int wind = 1) {
    patch::PatchConfig c;
    c.lifting = {v, wind};
    c.tooth = {0.5 * dx, std::nullopt};
    c.dt_macro = Dt;
    c.dt_micro = 1e-3 * Dt;
    return c;
}

analysis::DiscretizationFactory patch_factory(const PdeSpec& pde, patch::LiftingVariant v, double cfl, int order) {
    return [=](double dx, double T) {
        const auto n = static_cast<long long>(std::ceil(T / (cfl * std::pow(dx, order)) - 1e-9));
        const auto cfg = patch_cfg(v, dx, T / static_cast<double>(n));
        return analysis::Discretization{[=](const MacroState& U) { return patch::gap_tooth_step(U, pde, cfg); }, n};
    };
}

double max_matrix_deviation(std::size_t n, double dx, const analysis::Stepper& step,
                            const std::function<double(std::size_t, std::size_t)>& expect) {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> e(n, 0.0);
        e[i] = 1.0;
        const auto out = step(MacroState(e, dx));
        for (std::size_t r = 0; r < n; ++r) worst = std::max(worst, std::abs(out[r] - expect(r, i)));
    }
    return worst;
}

Outcome heat_gap_tooth() {
    Outcome o;
    const std::size_t n = 32;
    const double dx = 2 * std::numbers::pi / n, Dt = 0.4 * dx * dx;
    const auto cfg = patch_cfg(patch::LiftingVariant::central_d2, dx, Dt);
    const auto ftcs = oracle::ftcs_heat_matrix(n, Dt / (dx * dx));
    const double dev = max_matrix_deviation(
        n, dx, [&](const MacroState& U) { return patch::gap_tooth_step(U, PdeSpec::heat(), cfg); },
        [&](std::size_t r, std::size_t c) { return ftcs[r * n + c]; });
    o.require(dev <= 1e-12, "update matrix deviation " + num(dev));

    const std::size_t grids[] = {32, 64, 128};
    const auto conv = analysis::convergence_order(
        grids, patch_factory(PdeSpec::heat(), patch::LiftingVariant::central_d2, 0.4, 2),
        [](double x, double t) { return std::exp(-t) * std::sin(x); }, 0.5, 2 * std::numbers::pi);
    o.require(std::abs(conv.fitted_order - 2.0) <= 0.3, "fitted order " + num(conv.fitted_order));
    return o;
}

Outcome advection_instability() {
    Outcome o;
    const std::size_t n = 64;
    const double dx = 2 * std::numbers::pi / n, Dt = 0.5 * dx;
    const auto U0 = analysis::seeded_white_noise(n, dx, 105);
    const auto central = patch_cfg(patch::LiftingVariant::central_d2, dx, Dt);
    const auto g = analysis::growth_factor_probe(
        [&](const MacroState& U) { return patch::gap_tooth_step(U, PdeSpec::advection(), central); }, U0, 400);
    o.require(g.growth_factor_per_step >= 1.10 && g.growth_factor_per_step <= 1.13,
              "central growth " + num(g.growth_factor_per_step) + " in [1.10, 1.13] (von Neumann " +
                  num(oracle::ftcs_advection_max_amplification(n, 0.5)) + ")");

    const auto upwind = patch_cfg(patch::LiftingVariant::upwind_d2, dx, Dt, +1);
    const auto u = analysis::growth_factor_probe(
        [&](const MacroState& U) { return patch::gap_tooth_step(U, PdeSpec::advection(), upwind); }, U0, 400);
    o.require(u.growth_factor_per_step <= 1.0 + 1e-8, "upwind growth " + num(u.growth_factor_per_step) + " <= 1 + 1e-8");

    const std::size_t grids[] = {32, 64, 128};
    const auto conv = analysis::convergence_order(
        grids, patch_factory(PdeSpec::advection(), patch::LiftingVariant::upwind_d2, 0.5, 1),
        [](double x, double t) { return std::sin(x - t); }, 1.0, 2 * std::numbers::pi);
    o.require(std::abs(conv.fitted_order - 1.0) <= 0.3, "upwind order " + num(conv.fitted_order));
    return o;
}

Outcome biharmonic_inconsistency() {
    Outcome o;
    const std::size_t n = 24;
    const double dx = 2 * std::numbers::pi / n, Dt = 0.1 * std::pow(dx, 4);
    const auto d2 = patch_cfg(patch::LiftingVariant::central_d2, dx, Dt);
    const double id_dev = max_matrix_deviation(
        n, dx, [&](const MacroState& U) { return patch::gap_tooth_step(U, PdeSpec::biharmonic(), d2); },
        [](std::size_t r, std::size_t c) { return r == c ? 1.0 : 0.0; });
    o.require(id_dev <= 1e-12, "central_d2 identity deviation " + num(id_dev));

    // U - Dt D4 with the five-point D4 stencil [1, -4, 6, -4, 1] / dx^4
    const auto d4 = patch_cfg(patch::LiftingVariant::central_d4, dx, Dt);
    const double s = Dt / std::pow(dx, 4);
    const double d4_dev = max_matrix_deviation(
        n, dx, [&](const MacroState& U) { return patch::gap_tooth_step(U, PdeSpec::biharmonic(), d4); },
        [&](std::size_t r, std::size_t c) {
            const long offset = (static_cast<long>(c) - static_cast<long>(r) + static_cast<long>(n) + 2) % static_cast<long>(n);
            const double w[] = {1, -4, 6, -4, 1};
            return (r == c ? 1.0 : 0.0) - (offset < 5 ? s * w[offset] : 0.0);
        });
    o.require(d4_dev <= 1e-12, "central_d4 vs U - Dt*D4 deviation " + num(d4_dev));

    const std::size_t grids[] = {16, 32, 64};
    const auto conv = analysis::convergence_order(
        grids, patch_factory(PdeSpec::biharmonic(), patch::LiftingVariant::central_d4, 0.1, 4),
        [](double x, double t) { return std::exp(-t) * std::sin(x); }, 0.1, 2 * std::numbers::pi);
    const bool decreasing = conv.errors[1] < conv.errors[0] && conv.errors[2] < conv.errors[1];
    o.require(decreasing, "errors " + num(conv.errors[0]) + " > " + num(conv.errors[1]) + " > " + num(conv.errors[2]) +
                              " (order " + num(conv.fitted_order) + ")");
    return o;
}

Outcome round_trip() {
    Outcome o;
    std::mt19937_64 gen(107);
    double worst = 0.0;
    for (int state = 0; state < 100; ++state) {
        const auto n = std::uniform_int_distribution<std::size_t>(5, 64)(gen);
        const double dx = std::uniform_real_distribution<double>(0.01, 1.0)(gen);
        std::vector<double> v(n);
        for (auto& x : v) x = std::uniform_real_distribution<double>(-10, 10)(gen);
        const MacroState U(v, dx);
        const double h = std::uniform_real_distribution<double>(0.05, 0.95)(gen) * dx;
        for (auto variant : {patch::LiftingVariant::central_d2, patch::LiftingVariant::upwind_d2,
                             patch::LiftingVariant::central_d4})
            for (int wind : {1, -1})
                for (std::size_t j = 0; j < n; ++j) {
                    const auto p = patch::lift(U, static_cast<std::ptrdiff_t>(j), {variant, wind}, h);
                    worst = std::max(worst, std::abs(patch::restrict_average(p, {h, std::nullopt}) - U[j]));
                }
    }
    o.require(worst <= 1e-12, "max |restrict(lift(U, j)) - U_j| = " + num(worst) + " over 100 states, 3 variants");
    return o;
}

Outcome order_detection() {
    Outcome o;
    const order::ProbeSpec probe{16, 256, -1.0, 1.0, 108};
    const auto detect = [&](const PdeSpec& pde, int d_max) {
        order::DerivativeProbeConfig cfg;
        cfg.d_max = d_max;
        cfg.dt_micro = 1e-3;
        return order::detect_order(order::derivative_blackbox(pde, cfg), probe);
    };
    const auto heat = detect(PdeSpec::heat(), 2);
    o.require(heat.detected_order == 2, "heat -> " + std::to_string(heat.detected_order));
    const auto adv = detect(PdeSpec::advection(), 2);
    o.require(adv.detected_order == 1, "advection -> " + std::to_string(adv.detected_order) + " (D2 variance " +
                                           num(adv.per_index_variance[2]) + " <= threshold " + num(adv.threshold_used) + ")");
    const auto b4 = detect(PdeSpec::biharmonic(), 4);
    o.require(b4.detected_order == 4, "biharmonic d_max 4 -> " + std::to_string(b4.detected_order));
    const auto b2 = detect(PdeSpec::biharmonic(), 2);
    o.require(b2.detected_order == 0, "biharmonic d_max 2 -> " + std::to_string(b2.detected_order));

    order::BlackBoxFunction f;
    f.arity = 100;
    f.evaluator = [](std::span<const double> x) { return x[0] + x[99]; };
    const auto adv100 = order::detect_order(f, probe, {std::nullopt, 5});
    o.require(adv100.detected_order == 1 && adv100.stopped_early,
              "f(x1, x100) -> " + std::to_string(adv100.detected_order) +
                  (adv100.stopped_early ? ", stopped early at x" + std::to_string(adv100.stop_index) : ", no early stop"));
    return o;
}

Outcome scale_dependent_order() {
    Outcome o;
    // estimator check on synthetic references
    const double dt_s = 1e-3;
    const std::size_t len = 4001;
    std::vector<kp::ScaledTrajectory> brown(20), ballistic(20);
    for (std::size_t i = 0; i < 20; ++i) {
        auto& b = brown[i];
        auto& l = ballistic[i];
        b.v = oracle::brownian_path(len, dt_s, 900 + i);
        for (std::size_t s = 0; s < len; ++s) {
            b.times.push_back(s * dt_s);
            l.times.push_back(s * dt_s);
            l.v.push_back((1.0 + i) * s * dt_s);
        }
        b.x.assign(len, 0.0);
        l.x.assign(len, 0.0);
    }
    const double Ts = (len - 1) * dt_s;
    const double gb = kp::msd_exponent(brown, Ts / 100, Ts / 4).gamma;
    const double gl = kp::msd_exponent(ballistic, Ts / 100, Ts / 4).gamma;
    o.require(std::abs(gb - 1.0) <= 0.1, "synthetic Brownian gamma " + num(gb));
    o.require(std::abs(gl - 2.0) <= 0.1, "synthetic ballistic gamma " + num(gl));

    // rescaled dynamics in a random cosine-series field
    const std::size_t n_traj = 24;
    const double T = 0.003, dt = 1e-6;
    std::vector<kp::RandomForceField> fields(n_traj);
    std::vector<double> x0(n_traj);
    for (std::size_t i = 0; i < n_traj; ++i) {
        fields[i] = kp::synthesize_force_field(512, 0.0, random_bits({109, 1, i}));
        x0[i] = 2 * std::numbers::pi * uniform01({109, 2, i});
    }
    const auto gamma_at = [&](double delta) {
        std::vector<kp::ScaledTrajectory> ens(n_traj);
        parallel_for(n_traj, worker_count(), [&](std::size_t i) {
            ens[i] = kp::kp_integrate(fields[i], delta, T, dt, x0[i], 1.0, {10, true, 0.01});
        });
        return kp::msd_exponent(ens, T / 100, T / 4).gamma;
    };
    const double g_small = gamma_at(0.05);
    const double g_one = gamma_at(1.0);
    o.require(g_small >= 0.8 && g_small <= 1.2, "delta 0.05 gamma " + num(g_small) + " in [0.8, 1.2]");
    o.require(g_one >= 1.7 && g_one <= 2.1, "delta 1 gamma " + num(g_one) + " in [1.7, 2.1]");
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    Outcome o;
    const fs::path configs = EQF_CONFIG_DIR;
    const fs::path scratch = fs::temp_directory_path() / "eqf_acceptance_determinism";
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(configs))
        if (e.path().extension() == ".cfg") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    int identical = 0;
    for (const auto& f : files) {
        const auto cfg = cli::parse_config(slurp(f));
        const auto a = scratch / f.stem() / "serial", b = scratch / f.stem() / "parallel",
                   c = scratch / f.stem() / "repeat";
        fs::remove_all(scratch / f.stem());
        cli::write_results(cli::run_experiment(cfg, 1), a, false);
        cli::write_results(cli::run_experiment(cfg, determinism_threads), b, false);
        cli::write_results(cli::run_experiment(cfg, 1), c, false);
        bool same = true;
        for (const auto& entry : fs::directory_iterator(a)) {
            const auto name = entry.path().filename();
            const auto ref = slurp(entry.path());
            same = same && fs::exists(b / name) && slurp(b / name) == ref && slurp(c / name) == ref;
        }
        if (same) ++identical;
        else o.require(false, f.filename().string() + " outputs differ");
    }
    fs::remove_all(scratch);
    o.require(identical == static_cast<int>(files.size()),
              std::to_string(identical) + "/" + std::to_string(files.size()) +
                  " configs byte-identical across repeat and 1 vs " + std::to_string(determinism_threads) + " threads");
    return o;
}

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "effective-noise law", 10, effective_noise_law},
        {2, "noise suppression", 60, noise_suppression},
        {3, "consistency and cost parity", 0, consistency_and_cost},
        {4, "heat gap-tooth", 10, heat_gap_tooth},
        {5, "advection instability", 10, advection_instability},
        {6, "biharmonic inconsistency", 0, biharmonic_inconsistency},
        {7, "round-trip lifting identity", 0, round_trip},
        {8, "order detection", 30, order_detection},
        {9, "scale-dependent effective order", 300, scale_dependent_order},
        {10, "determinism", 0, determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.runtime_limit_s > 0) o.require(secs < c.runtime_limit_s, "runtime " + num(secs) + " s < " + num(c.runtime_limit_s) + " s");
        else o.detail += "; runtime " + num(secs) + " s";
        std::printf("%s AC%d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    }
    std::printf("%d/%zu acceptance criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
