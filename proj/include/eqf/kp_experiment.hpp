#pragma once

// Inertial particles in a stationary random force field under the diffusive
// rescaling dx/dt = v / delta^2, dv/dt = F(x) / delta. For small delta the
// velocity behaves like a diffusion (MSD exponent ~ 1); for delta ~ 1 and
// short lags it is ballistic (exponent ~ 2).

#include <cstdint>
#include <span>
#include <vector>

namespace eqf::kp {

struct ForceMode {
    double amplitude;
    double wavenumber;
    double phase;
};

/// F(x) = sum_m a_m cos(kappa_m x + phi_m). F is used directly as the
/// acceleration; the matching potential is V(x) = -sum_m (a_m / kappa_m) sin(kappa_m x + phi_m).
class RandomForceField {
public:
    RandomForceField() = default;
    RandomForceField(std::vector<ForceMode> modes, std::uint64_t seed);

    double operator()(double x) const noexcept;
    double potential(double x) const noexcept;
    /// sum_m |a_m|, an upper bound for |F|.
    double amplitude_bound() const noexcept;

    std::span<const ForceMode> modes() const noexcept { return modes_; }
    std::uint64_t seed() const noexcept { return seed_; }

    /// Same field with every phase shifted by `offset`.
    RandomForceField with_phase_offset(double offset) const;

private:
    std::vector<ForceMode> modes_;
    std::uint64_t seed_ = 0;
};

/// kappa_m = m, a_m = m^-spectrum, phi_m uniform on [0, 2 pi) from `seed`.
RandomForceField synthesize_force_field(int n_modes, double spectrum, std::uint64_t seed);

struct ScaledTrajectory {
    double delta = 1.0;
    std::vector<double> times;
    std::vector<double> x;
    std::vector<double> v;
};

struct IntegrateOptions {
    int output_every = 1;
    /// Re-run at dt/2 and reject dt if the endpoint velocity moves by more
    /// than halving_tolerance relative to the velocity scale.
    bool verify_step_halving = true;
    double halving_tolerance = 0.01;
};

/// Kick-drift-kick leapfrog for the rescaled system up to time T.
ScaledTrajectory kp_integrate(const RandomForceField& field, double delta, double T, double dt, double x0,
                              double v0, const IntegrateOptions& options = {});

/// v^2 / 2 + delta V(x), conserved by the exact flow.
double scaled_energy(const RandomForceField& field, double delta, double x, double v);

struct MsdFit {
    double gamma = 0.0;
    double residual = 0.0; // RMS residual of the log-log fit
    std::vector<double> lags;
    std::vector<double> msd;
};

inline constexpr std::size_t min_ensemble = 20;

/// Fits <|v(t+s) - v(t)|^2> ~ s^gamma over log-spaced lags in [lag_min, lag_max],
/// averaging over trajectories and all time origins. Samples must be uniform in time.
MsdFit msd_exponent(std::span<const ScaledTrajectory> ensemble, double lag_min, double lag_max, int n_lags = 12);

} // namespace eqf::kp
