#pragma once

// Coarse projective integration of a scalar SDE: lift the coarse value to an
// ensemble, run k Euler-Maruyama micro steps per member, average, and
// extrapolate the estimated time derivative over the macro step.

#include "eqf/micro_models.hpp"
#include "eqf/rng.hpp"

#include <optional>
#include <vector>

namespace eqf::projective {

struct CoarseStepConfig {
    long long N = 1;        // ensemble size
    long long k = 1;        // micro steps per macro step
    double dt_micro = 1e-3; // delta t
    double dt_macro = 0.1;  // Delta t
    double alpha = 0.0;     // extrapolation base point, fraction of the k steps

    void validate() const;
    /// Micro step index at which the base-point average is recorded.
    long long alpha_steps() const;
    /// Length of the micro window, k * dt_micro.
    double window() const { return static_cast<double>(k) * dt_micro; }
};

/// Member j draws from stream rng.stream_id + j; micro step i of macro step
/// rng.step_id uses step index rng.step_id * k + i.
struct EnsembleState {
    std::vector<double> members;
    RngStreamSpec rng;
    double time_offset = 0.0;

    RngStreamSpec member_stream(std::size_t j) const noexcept {
        return rng.with_stream(rng.stream_id + j);
    }
};

struct CostLedger {
    long long micro_steps_total = 0;
    long long macro_steps_total = 0;
};

EnsembleState lift_ensemble(double x, const CoarseStepConfig& cfg, const RngStreamSpec& rng);

/// One projective step x -> x + Delta t (xbar - x_base) / ((1 - alpha) k dt).
double coarse_projective_step(double x, const micro::SdeModel& model, const CoarseStepConfig& cfg,
                              const RngStreamSpec& rng, unsigned threads = 1);

/// Per-step noise std of the law-equivalent scheme: sigma Delta t / sqrt(N k dt).
double effective_noise_std(const CoarseStepConfig& cfg, double noise_amplitude = 1.0);

struct CoarseTrajectory {
    std::vector<double> values; // includes x0
    CostLedger ledger;
    /// First macro step whose value was non-finite or exceeded the threshold.
    std::optional<long long> divergence_step;
};

inline constexpr double divergence_threshold = 1e12;

/// Step n draws from rng.with_step(rng.step_id + n).
CoarseTrajectory run_coarse_trajectory(double x0, const micro::SdeModel& model, const CoarseStepConfig& cfg,
                                       long long n_steps, const RngStreamSpec& rng, unsigned threads = 1);

/// Micro steps one direct path needs to cover `horizon` at step dt_micro.
long long brute_force_micro_steps(double horizon, double dt_micro);

} // namespace eqf::projective
