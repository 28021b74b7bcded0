#include "eqf/kp_experiment.hpp"

#include "eqf/analysis.hpp"
#include "eqf/core.hpp"
#include "eqf/rng.hpp"
#include "eqf/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace eqf::kp {

RandomForceField::RandomForceField(std::vector<ForceMode> modes, std::uint64_t seed)
    : modes_(std::move(modes)), seed_(seed) {
    for (const auto& m : modes_)
        if (!std::isfinite(m.amplitude) || !std::isfinite(m.wavenumber) || !std::isfinite(m.phase) ||
            m.wavenumber == 0.0)
            throw Error(ErrorCode::invalid_argument, "force modes need finite values and nonzero wavenumber");
}

double RandomForceField::operator()(double x) const noexcept {
    double f = 0.0;
    for (const auto& m : modes_) f += m.amplitude * std::cos(m.wavenumber * x + m.phase);
    return f;
}

double RandomForceField::potential(double x) const noexcept {
    double v = 0.0;
    for (const auto& m : modes_) v -= m.amplitude / m.wavenumber * std::sin(m.wavenumber * x + m.phase);
    return v;
}

double RandomForceField::amplitude_bound() const noexcept {
    double s = 0.0;
    for (const auto& m : modes_) s += std::abs(m.amplitude);
    return s;
}

RandomForceField RandomForceField::with_phase_offset(double offset) const {
    auto modes = modes_;
    for (auto& m : modes) m.phase += offset;
    return {std::move(modes), seed_};
}

RandomForceField synthesize_force_field(int n_modes, double spectrum, std::uint64_t seed) {
    if (n_modes < 1) throw Error(ErrorCode::invalid_argument, "force field needs at least one mode");
    std::vector<ForceMode> modes;
    modes.reserve(static_cast<std::size_t>(n_modes));
    for (int m = 1; m <= n_modes; ++m) {
        const double phase = 2.0 * std::numbers::pi * uniform01({seed, 0, static_cast<std::uint64_t>(m)});
        modes.push_back({std::pow(static_cast<double>(m), -spectrum), static_cast<double>(m), phase});
    }
    return {std::move(modes), seed};
}

double scaled_energy(const RandomForceField& field, double delta, double x, double v) {
    return 0.5 * v * v + delta * field.potential(x);
}

namespace {

ScaledTrajectory leapfrog(const RandomForceField& field, double delta, long long n_steps, double dt, double x0,
                          double v0, int output_every) {
    ScaledTrajectory traj;
    traj.delta = delta;
    const auto n_out = static_cast<std::size_t>(n_steps / output_every) + 1;
    traj.times.reserve(n_out);
    traj.x.reserve(n_out);
    traj.v.reserve(n_out);
    traj.times.push_back(0.0);
    traj.x.push_back(x0);
    traj.v.push_back(v0);

    const double kick = 0.5 * dt / delta;
    const double drift = dt / (delta * delta);
    double x = x0, v = v0;
    double f = field(x);
    for (long long s = 1; s <= n_steps; ++s) {
        v += kick * f;
        x += drift * v;
        f = field(x);
        v += kick * f;
        if (!std::isfinite(x) || !std::isfinite(v)) {
            std::ostringstream os;
            os << "trajectory blew up at step " << s;
            throw Error(ErrorCode::unstable_time_step, os.str());
        }
        if (s % output_every == 0) {
            traj.times.push_back(static_cast<double>(s) * dt);
            traj.x.push_back(x);
            traj.v.push_back(v);
        }
    }
    return traj;
}

} // namespace

ScaledTrajectory kp_integrate(const RandomForceField& field, double delta, double T, double dt, double x0,
                              double v0, const IntegrateOptions& options) {
    if (!(delta > 0.0)) throw Error(ErrorCode::invalid_argument, "delta must be positive");
    if (!(T > 0.0) || !(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "T and dt must be positive");
    if (options.output_every < 1) throw Error(ErrorCode::invalid_argument, "output_every must be >= 1");
    const long long n_steps = std::max(1LL, std::llround(T / dt));
    if (std::abs(static_cast<double>(n_steps) * dt - T) > 1e-9 * T)
        throw Error(ErrorCode::invalid_argument, "T must be a whole number of time steps");

    ScaledTrajectory traj = leapfrog(field, delta, n_steps, dt, x0, v0, options.output_every);
    if (options.verify_step_halving) {
        const ScaledTrajectory fine = leapfrog(field, delta, 2 * n_steps, 0.5 * dt, x0, v0, 2 * options.output_every);
        double scale = 0.0;
        for (double v : traj.v) scale = std::max(scale, std::abs(v));
        const double deviation = std::abs(fine.v.back() - traj.v.back());
        if (deviation > options.halving_tolerance * scale) {
            std::ostringstream os;
            os << "step halving moved the endpoint velocity by " << deviation << " (scale " << scale << ")";
            throw Error(ErrorCode::unstable_time_step, os.str());
        }
    }
    return traj;
}

MsdFit msd_exponent(std::span<const ScaledTrajectory> ensemble, double lag_min, double lag_max, int n_lags) {
    if (ensemble.size() < min_ensemble) {
        std::ostringstream os;
        os << "MSD fit needs >= " << min_ensemble << " trajectories, got " << ensemble.size();
        throw Error(ErrorCode::insufficient_data, os.str());
    }
    if (n_lags < 3) throw Error(ErrorCode::invalid_argument, "MSD fit needs >= 3 lags");
    const auto& ref = ensemble.front();
    if (ref.times.size() < 3) throw Error(ErrorCode::insufficient_data, "trajectories are too short");
    const double sample_dt = ref.times[1] - ref.times[0];
    const double T = ref.times.back() - ref.times.front();
    if (!(lag_min > 0.0) || !(lag_max > lag_min))
        throw Error(ErrorCode::invalid_argument, "lag range must satisfy 0 < lag_min < lag_max");
    if (lag_min < T / 100.0 * (1.0 - 1e-9) || lag_max > T / 4.0 * (1.0 + 1e-9))
        throw Error(ErrorCode::invalid_argument, "lag range must lie within [T/100, T/4]");
    for (const auto& tr : ensemble)
        if (tr.v.size() != ref.v.size() || tr.times.size() != tr.v.size())
            throw Error(ErrorCode::invalid_argument, "trajectories must share one sampling grid");

    std::vector<long long> lag_samples;
    for (int i = 0; i < n_lags; ++i) {
        const double lag = lag_min * std::pow(lag_max / lag_min, static_cast<double>(i) / (n_lags - 1));
        const long long L = std::max(1LL, std::llround(lag / sample_dt));
        if (lag_samples.empty() || lag_samples.back() != L) lag_samples.push_back(L);
    }
    if (lag_samples.size() < 3) throw Error(ErrorCode::insufficient_data, "sampling too coarse for the lag range");

    MsdFit fit;
    for (long long L : lag_samples) {
        double total = 0.0;
        std::size_t count = 0;
        for (const auto& tr : ensemble) {
            const std::span<const double> v(tr.v);
            const auto n = v.size() - static_cast<std::size_t>(L);
            total += simd::sum_sq_diff(v.subspan(static_cast<std::size_t>(L)), v.first(n));
            count += n;
        }
        fit.lags.push_back(static_cast<double>(L) * sample_dt);
        fit.msd.push_back(total / static_cast<double>(count));
    }
    fit.gamma = analysis::fit_loglog_slope(fit.lags, fit.msd);
    // intercept and residual of the same least-squares line
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < fit.lags.size(); ++i) {
        mx += std::log(fit.lags[i]);
        my += std::log(fit.msd[i]);
    }
    mx /= fit.lags.size();
    my /= fit.lags.size();
    double rss = 0.0;
    for (std::size_t i = 0; i < fit.lags.size(); ++i) {
        const double r = std::log(fit.msd[i]) - (my + fit.gamma * (std::log(fit.lags[i]) - mx));
        rss += r * r;
    }
    fit.residual = std::sqrt(rss / fit.lags.size());
    return fit;
}

} // namespace eqf::kp
