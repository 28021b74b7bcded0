#include "eqf/projective.hpp"

#include "eqf/parallel.hpp"
#include "eqf/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace eqf::projective {
namespace {

constexpr std::size_t block_size = 256;

} // namespace

void CoarseStepConfig::validate() const {
    if (N < 1) throw Error(ErrorCode::invalid_argument, "ensemble size N must be >= 1");
    if (k < 1) throw Error(ErrorCode::invalid_argument, "micro step count k must be >= 1");
    if (!(dt_micro > 0.0)) throw Error(ErrorCode::invalid_argument, "dt_micro must be positive");
    if (!(dt_macro > 0.0)) throw Error(ErrorCode::invalid_argument, "dt_macro must be positive");
    if (window() > dt_macro * (1.0 + 1e-12))
        throw Error(ErrorCode::invalid_argument, "extrapolation window exceeds macro step");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw Error(ErrorCode::invalid_argument, "alpha must lie in [0, 1)");
    const double base = alpha * static_cast<double>(k);
    if (std::abs(base - std::round(base)) > 1e-9)
        throw Error(ErrorCode::invalid_argument, "alpha * k must be an integer number of micro steps");
}

long long CoarseStepConfig::alpha_steps() const {
    return std::llround(alpha * static_cast<double>(k));
}

EnsembleState lift_ensemble(double x, const CoarseStepConfig& cfg, const RngStreamSpec& rng) {
    cfg.validate();
    if (!std::isfinite(x)) throw Error(ErrorCode::invalid_argument, "coarse value must be finite");
    return {std::vector<double>(static_cast<std::size_t>(cfg.N), x), rng, 0.0};
}

double coarse_projective_step(double x, const micro::SdeModel& model, const CoarseStepConfig& cfg,
                              const RngStreamSpec& rng, unsigned threads) {
    EnsembleState ensemble = lift_ensemble(x, cfg, rng);
    auto& xs = ensemble.members;
    const std::size_t n = xs.size();
    const long long base_step = cfg.alpha_steps();
    std::vector<double> base(base_step == 0 ? 0 : n);
    const double noise_scale = model.noise_amplitude * std::sqrt(cfg.dt_micro);
    const auto k = static_cast<std::uint64_t>(cfg.k);

    const std::size_t n_blocks = (n + block_size - 1) / block_size;
    parallel_for(n_blocks, threads, [&](std::size_t b) {
        const std::size_t begin = b * block_size;
        const std::size_t len = std::min(block_size, n - begin);
        std::span<double> block(xs.data() + begin, len);
        std::vector<double> drift(len), noise(len);
        for (std::uint64_t i = 0; i < k; ++i) {
            for (std::size_t m = 0; m < len; ++m) {
                drift[m] = model.drift(block[m]);
                noise[m] = standard_normal(
                    {rng.master_seed, rng.stream_id + begin + m, rng.step_id * k + i});
            }
            simd::em_update(block, drift, noise, cfg.dt_micro, noise_scale);
            if (static_cast<long long>(i) + 1 == base_step)
                std::copy(block.begin(), block.end(), base.begin() + static_cast<std::ptrdiff_t>(begin));
        }
    });

    const double xbar = simd::sum(xs) / static_cast<double>(n);
    // with alpha = 0 the base average is the lifted value itself
    const double x_base = base_step == 0 ? x : simd::sum(base) / static_cast<double>(n);
    const double span = (1.0 - cfg.alpha) * cfg.window();
    return x + cfg.dt_macro * (xbar - x_base) / span;
}

double effective_noise_std(const CoarseStepConfig& cfg, double noise_amplitude) {
    cfg.validate();
    return noise_amplitude * cfg.dt_macro / std::sqrt(static_cast<double>(cfg.N) * cfg.window());
}

CoarseTrajectory run_coarse_trajectory(double x0, const micro::SdeModel& model, const CoarseStepConfig& cfg,
                                       long long n_steps, const RngStreamSpec& rng, unsigned threads) {
    cfg.validate();
    if (n_steps < 1) throw Error(ErrorCode::invalid_argument, "n_steps must be >= 1");
    CoarseTrajectory out;
    out.values.reserve(static_cast<std::size_t>(n_steps) + 1);
    out.values.push_back(x0);
    double x = x0;
    for (long long s = 0; s < n_steps; ++s) {
        x = coarse_projective_step(x, model, cfg, rng.with_step(rng.step_id + static_cast<std::uint64_t>(s)),
                                   threads);
        out.values.push_back(x);
        out.ledger.macro_steps_total += 1;
        out.ledger.micro_steps_total += cfg.N * cfg.k;
        if (!std::isfinite(x) || std::abs(x) > divergence_threshold) {
            out.divergence_step = s + 1;
            break;
        }
    }
    return out;
}

long long brute_force_micro_steps(double horizon, double dt_micro) {
    if (!(dt_micro > 0.0) || !(horizon >= 0.0))
        throw Error(ErrorCode::invalid_argument, "horizon must be >= 0 and dt_micro > 0");
    const double steps = horizon / dt_micro;
    const long long rounded = std::llround(steps);
    if (std::abs(steps - static_cast<double>(rounded)) > 1e-6 * std::max(1.0, steps)) {
        std::ostringstream os;
        os << "horizon " << horizon << " is not a whole number of micro steps";
        throw Error(ErrorCode::invalid_argument, os.str());
    }
    return rounded;
}

} // namespace eqf::projective
