#pragma once

// Microscale evolution operators: the exact propagator of a constant
// coefficient linear PDE acting on polynomials (unbounded micro box), an
// explicit finite-difference solver on a finite buffered box, and a single
// Euler-Maruyama step for scalar SDEs.

#include "eqf/core.hpp"

#include <functional>
#include <vector>

namespace eqf::micro {

/// dx = b(x) dt + noise_amplitude dW.
struct SdeModel {
    std::function<double(double)> drift;
    double noise_amplitude = 1.0;

    static SdeModel zero_drift(double noise_amplitude = 1.0);
    /// b(x) = -theta x.
    static SdeModel ornstein_uhlenbeck(double theta = 1.0, double noise_amplitude = 1.0);
};

/// Uniform micro grid; dt is the largest sub-step the solver may take.
struct MicroGrid {
    double dx;
    double dt;
};

/// Samples at center + (i - half) * dx, i = 0 .. 2*half.
struct MicroFieldState {
    double center = 0.0;
    double dx = 0.0;
    std::vector<double> samples;
    double time = 0.0;

    std::size_t half() const noexcept { return (samples.size() - 1) / 2; }
    double position(std::size_t i) const noexcept {
        return center + (static_cast<double>(i) - static_cast<double>(half())) * dx;
    }
    double left() const noexcept { return position(0); }
    double right() const noexcept { return position(samples.size() - 1); }
};

/// exp(dt L) p for L = sum_r a_r d^r/dx^r; the series terminates on polynomials.
TaylorPolynomial evolve_poly_exact(const TaylorPolynomial& p, const PdeSpec& pde, double dt);

/// Largest micro step the explicit solver accepts for this PDE and spacing.
double max_stable_micro_step(const PdeSpec& pde, double dx_micro);

/// Estimated distance boundary artifacts travel in time dt.
double influence_radius(const PdeSpec& pde, double dt);

/// p sampled on the micro grid covering [center - H/2, center + H/2].
MicroFieldState sample_polynomial(const TaylorPolynomial& p, double H, double dx_micro);

/// Explicit FD evolution on the buffered box with boundary values frozen at
/// their initial values. Supports derivative orders 1 (upwind), 2 and 4.
MicroFieldState evolve_fd_buffered(const TaylorPolynomial& p, const PdeSpec& pde, double dt,
                                   const ToothConfig& tooth, const MicroGrid& grid);

double em_step(double x, const SdeModel& model, double dt_micro, double noise);

} // namespace eqf::micro
