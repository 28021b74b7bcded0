#pragma once

// Verification harness: stability probes, convergence-order fits and the
// moment statistics used to check the projective integrator's noise law.

#include "eqf/core.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace eqf::analysis {

using Stepper = std::function<MacroState(const MacroState&)>;

enum class Stability { stable, unstable, marginal };

const char* to_string(Stability s) noexcept;

struct StabilityReport {
    double growth_factor_per_step = 1.0;
    Stability classified = Stability::marginal;
    int steps_run = 0;
    bool overflowed = false;
};

inline constexpr double unstable_threshold = 1e-3;
inline constexpr double stable_threshold = 1e-8;
/// |factor - 1| below this counts as exactly norm-preserving.
inline constexpr double neutral_band = 1e-12;

Stability classify_growth(double factor) noexcept;

/// Seeded white noise with the mean removed and unit RMS.
MacroState seeded_white_noise(std::size_t n, double dx, std::uint64_t seed);

/// Iterates the stepper from U0 and reports the geometric-mean per-step L2
/// growth over the second half of the run, after transients have decayed.
StabilityReport growth_factor_probe(const Stepper& step, const MacroState& U0, int n_steps);

/// Largest Fourier-symbol modulus (mean mode excluded) of a linear,
/// translation-invariant stepper, from its impulse response.
double max_amplification(const Stepper& step, std::size_t n, double dx);

struct Discretization {
    Stepper step;
    long long n_steps;
};

/// Builds the stepper for spacing dx that reaches time T in n_steps.
using DiscretizationFactory = std::function<Discretization(double dx, double T)>;
using ExactSolution = std::function<double(double x, double t)>;

struct ConvergenceReport {
    std::vector<std::size_t> grid_sizes;
    std::vector<double> dx;
    std::vector<double> errors; // RMS error against the exact solution
    double fitted_order = 0.0;
    std::vector<std::string> warnings;
};

inline constexpr double rounding_floor = 1e-12;

ConvergenceReport convergence_order(std::span<const std::size_t> grid_sizes, const DiscretizationFactory& factory,
                                    const ExactSolution& exact, double T, double domain_length);

/// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(std::span<const double> x, std::span<const double> y);

struct IncrementMoments {
    double mean_rate = 0.0;    // mean increment / Delta t
    double std_per_step = 0.0; // std of one-step increments
    double se_mean_rate = 0.0;
    double se_std = 0.0;
    std::size_t n = 0;
};

IncrementMoments increment_moments(std::span<const double> trajectory, double dt_macro);

/// Least-squares theta in x_{n+1} - x_n = -theta x_n Delta t + noise.
double drift_regression(std::span<const double> trajectory, double dt_macro);

struct SampleMoments {
    double mean = 0.0;
    double variance = 0.0;
    double excess_kurtosis = 0.0;
    double se_mean = 0.0;
    double se_variance = 0.0;
    double se_kurtosis = 0.0;
    std::size_t n = 0;
};

/// Moments with Gaussian-reference standard errors.
SampleMoments sample_moments(std::span<const double> data);

struct VarianceTest {
    double measured = 0.0;
    double expected = 0.0;
    double tolerance_fraction = 0.0;
    bool pass = false;
    std::size_t tail_points = 0;
};

inline constexpr double burn_in_fraction = 0.1;

/// Tail (first 10% dropped) variance against `expected` within a relative
/// tolerance; with expected == 0 the tolerance is absolute.
VarianceTest stationary_variance_test(std::span<const double> trajectory, double expected,
                                      double tolerance_fraction);

} // namespace eqf::analysis
