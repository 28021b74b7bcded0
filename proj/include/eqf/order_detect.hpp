#pragma once

// Variance-based detection of which arguments a black-box right-hand side
// depends on: sweep one coordinate with the others frozen and look for
// nonzero conditional variance. Indices are scanned in increasing order with
// an inductive stop rule, which is exactly what makes the procedure blind to
// a far-away dependence such as F(x_1, x_100).

#include "eqf/core.hpp"
#include "eqf/micro_models.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace eqf::order {

struct BlackBoxFunction {
    int arity = 0;
    std::function<double(std::span<const double>)> evaluator;
    long long evaluation_budget = 100'000'000;
    /// Label of the first argument: 1 for x_1..x_M, 0 for D_0..D_d.
    int first_index = 1;
};

struct ProbeSpec {
    int n_base = 16;
    int n_perturb = 256;
    double lo = -1.0;
    double hi = 1.0;
    std::uint64_t seed = 0;
};

struct CoordinateVariance {
    double value = 0.0;  // mean conditional variance over the completed base points
    long long evaluations = 0;
    bool exhausted = false;
};

/// Mean over seeded base points of the variance of f as argument `index`
/// sweeps uniform values in [lo, hi]. `budget_used` is advanced per call.
CoordinateVariance coordinate_variance(const BlackBoxFunction& f, int index, const ProbeSpec& probe,
                                       long long& budget_used);

struct DetectOptions {
    /// Absolute threshold; nullopt selects 1e-6 * max observed variance (floor 1e-12).
    std::optional<double> threshold;
    int stop_after = 5; // consecutive non-dependent indices before giving up
};

inline constexpr double relative_threshold = 1e-6;
inline constexpr double threshold_floor = 1e-12;

struct DependencyReport {
    std::vector<double> per_index_variance; // NaN where never evaluated
    std::vector<bool> dependent;
    int detected_order = 0;
    long long budget_used = 0;
    double threshold_used = 0.0;
    bool stopped_early = false;
    int stop_index = 0; // label of the last index evaluated
    bool budget_exhausted = false;
    int first_index = 1;
};

DependencyReport detect_order(const BlackBoxFunction& f, const ProbeSpec& probe, const DetectOptions& options = {});

struct DerivativeProbeConfig {
    int d_max = 2;
    double dt_micro = 1e-3;
    double h = 0.1; // tooth width used for restriction
    micro::MicroGrid grid{1e-2, 1e-5};
    std::optional<double> H; // set to run the buffered FD microsolver
};

/// (D_0..D_dmax) -> (tooth average after dt_micro - initial tooth average) / dt_micro,
/// computed by the microsolver alone.
BlackBoxFunction derivative_blackbox(const PdeSpec& pde, const DerivativeProbeConfig& cfg);

} // namespace eqf::order
