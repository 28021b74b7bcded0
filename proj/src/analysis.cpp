#include "eqf/analysis.hpp"

#include "eqf/rng.hpp"
#include "eqf/simd/kernels.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>

namespace eqf::analysis {

const char* to_string(Stability s) noexcept {
    switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    case Stability::marginal: return "marginal";
    }
    return "unknown";
}

Stability classify_growth(double factor) noexcept {
    if (factor > 1.0 + unstable_threshold) return Stability::unstable;
    if (std::abs(factor - 1.0) <= neutral_band) return Stability::marginal;
    if (factor < 1.0 + stable_threshold) return Stability::stable;
    return Stability::marginal;
}

MacroState seeded_white_noise(std::size_t n, double dx, std::uint64_t seed) {
    std::vector<double> v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = standard_normal({seed, 0, j});
    const double mean = simd::sum(v) / static_cast<double>(n);
    for (auto& x : v) x -= mean;
    const double rms = std::sqrt(simd::sum_squares(v) / static_cast<double>(n));
    if (rms > 0.0)
        for (auto& x : v) x /= rms;
    return {std::move(v), dx};
}

StabilityReport growth_factor_probe(const Stepper& step, const MacroState& U0, int n_steps) {
    if (n_steps < 10) throw Error(ErrorCode::invalid_argument, "stability probe needs at least 10 steps");
    const auto norm = [](const MacroState& U) { return std::sqrt(simd::sum_squares(U.values())); };

    StabilityReport report;
    MacroState U = U0;
    const int mid = n_steps / 2;
    double norm_mid = norm(U0);
    int mid_step = 0;
    double norm_last = norm_mid;
    for (int s = 1; s <= n_steps; ++s) {
        MacroState next = U;
        try {
            next = step(U);
        } catch (const Error&) {
            report.overflowed = true; // malformed (non-finite) state
            break;
        }
        const double nn = norm(next);
        if (!std::isfinite(nn) || nn > 1e150) {
            report.overflowed = true;
            break;
        }
        U = std::move(next);
        norm_last = nn;
        report.steps_run = s;
        if (s == mid) {
            norm_mid = nn;
            mid_step = s;
        }
    }
    if (report.overflowed && report.steps_run <= mid) {
        // partial data: measure from the start
        norm_mid = norm(U0);
        mid_step = 0;
    }
    const int span = report.steps_run - mid_step;
    if (span <= 0 || norm_mid == 0.0) {
        report.growth_factor_per_step = report.overflowed ? std::numeric_limits<double>::infinity() : 1.0;
    } else if (norm_last == 0.0) {
        report.growth_factor_per_step = std::numeric_limits<double>::min();
    } else {
        report.growth_factor_per_step = std::exp((std::log(norm_last) - std::log(norm_mid)) / span);
    }
    report.classified = report.overflowed ? Stability::unstable : classify_growth(report.growth_factor_per_step);
    return report;
}

double max_amplification(const Stepper& step, std::size_t n, double dx) {
    std::vector<double> impulse(n, 0.0);
    impulse[0] = 1.0;
    const MacroState response = step(MacroState(impulse, dx));
    double best = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        std::complex<double> g{0.0, 0.0};
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j)
            g += response[j] * std::polar(1.0, -theta * static_cast<double>(j));
        best = std::max(best, std::abs(g));
    }
    return best;
}

double fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw Error(ErrorCode::insufficient_data, "log-log fit needs at least two paired points");
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw Error(ErrorCode::invalid_argument, "log-log fit needs positive data");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw Error(ErrorCode::invalid_argument, "log-log fit needs distinct abscissae");
    return (n * sxy - sx * sy) / denom;
}

ConvergenceReport convergence_order(std::span<const std::size_t> grid_sizes, const DiscretizationFactory& factory,
                                    const ExactSolution& exact, double T, double domain_length) {
    if (grid_sizes.size() < 3) throw Error(ErrorCode::insufficient_data, "convergence study needs >= 3 grids");
    ConvergenceReport report;
    std::vector<double> fit_dx, fit_err;
    for (std::size_t n : grid_sizes) {
        const double dx = domain_length / static_cast<double>(n);
        std::vector<double> u0(n), uT(n);
        for (std::size_t j = 0; j < n; ++j) {
            u0[j] = exact(static_cast<double>(j) * dx, 0.0);
            uT[j] = exact(static_cast<double>(j) * dx, T);
        }
        const Discretization disc = factory(dx, T);
        MacroState U(std::move(u0), dx);
        for (long long s = 0; s < disc.n_steps; ++s) U = disc.step(U);
        const double err = std::sqrt(simd::sum_sq_diff(U.values(), uT) / static_cast<double>(n));
        report.grid_sizes.push_back(n);
        report.dx.push_back(dx);
        report.errors.push_back(err);
        if (err < rounding_floor) {
            std::ostringstream os;
            os << "grid " << n << ": error " << err << " is rounding-dominated, excluded from fit";
            report.warnings.push_back(os.str());
        } else {
            fit_dx.push_back(dx);
            fit_err.push_back(err);
        }
    }
    report.fitted_order = fit_dx.size() >= 2 ? fit_loglog_slope(fit_dx, fit_err) : 0.0;
    return report;
}

IncrementMoments increment_moments(std::span<const double> trajectory, double dt_macro) {
    if (trajectory.size() < 100)
        throw Error(ErrorCode::insufficient_data, "increment moments need a trajectory of length >= 100");
    std::vector<double> inc(trajectory.size() - 1);
    for (std::size_t i = 0; i + 1 < trajectory.size(); ++i) inc[i] = trajectory[i + 1] - trajectory[i];
    const SampleMoments m = sample_moments(inc);
    IncrementMoments out;
    out.n = inc.size();
    out.mean_rate = m.mean / dt_macro;
    out.std_per_step = std::sqrt(m.variance);
    out.se_mean_rate = out.std_per_step / std::sqrt(static_cast<double>(out.n)) / dt_macro;
    out.se_std = out.std_per_step / std::sqrt(2.0 * static_cast<double>(out.n));
    return out;
}

double drift_regression(std::span<const double> trajectory, double dt_macro) {
    if (trajectory.size() < 100)
        throw Error(ErrorCode::insufficient_data, "drift regression needs a trajectory of length >= 100");
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i + 1 < trajectory.size(); ++i) {
        sxy += (trajectory[i + 1] - trajectory[i]) * trajectory[i];
        sxx += trajectory[i] * trajectory[i];
    }
    if (sxx == 0.0) throw Error(ErrorCode::insufficient_data, "drift regression on an identically zero path");
    return -sxy / (sxx * dt_macro);
}

SampleMoments sample_moments(std::span<const double> data) {
    if (data.size() < 4) throw Error(ErrorCode::insufficient_data, "moments need at least 4 samples");
    SampleMoments m;
    m.n = data.size();
    const auto n = static_cast<double>(m.n);
    m.mean = simd::sum(data) / n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : data) {
        const double d = v - m.mean;
        const double d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m.variance = m2 / (n - 1.0);
    const double pop2 = m2 / n;
    m.excess_kurtosis = pop2 > 0.0 ? (m4 / n) / (pop2 * pop2) - 3.0 : 0.0;
    m.se_mean = std::sqrt(m.variance / n);
    m.se_variance = m.variance * std::sqrt(2.0 / (n - 1.0));
    m.se_kurtosis = std::sqrt(24.0 / n);
    return m;
}

VarianceTest stationary_variance_test(std::span<const double> trajectory, double expected,
                                      double tolerance_fraction) {
    const auto burn = static_cast<std::size_t>(burn_in_fraction * static_cast<double>(trajectory.size()));
    const auto tail = trajectory.subspan(burn);
    if (tail.size() < 1000)
        throw Error(ErrorCode::insufficient_data, "stationary variance test needs >= 1000 tail points");
    VarianceTest t;
    t.tail_points = tail.size();
    t.expected = expected;
    t.tolerance_fraction = tolerance_fraction;
    t.measured = sample_moments(tail).variance;
    t.pass = expected == 0.0 ? t.measured <= tolerance_fraction
                             : std::abs(t.measured - expected) <= tolerance_fraction * std::abs(expected);
    return t;
}

} // namespace eqf::analysis
