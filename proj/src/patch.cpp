#include "eqf/patch.hpp"

#include "eqf/parallel.hpp"

#include <cmath>
#include <sstream>

namespace eqf::patch {

const char* to_string(LiftingVariant v) noexcept {
    switch (v) {
    case LiftingVariant::central_d2: return "central_d2";
    case LiftingVariant::upwind_d2: return "upwind_d2";
    case LiftingVariant::central_d4: return "central_d4";
    }
    return "unknown";
}

void PatchConfig::validate() const {
    tooth.validate();
    if (!(dt_micro > 0.0)) throw Error(ErrorCode::invalid_argument, "dt_micro must be positive");
    if (!(dt_macro > 0.0)) throw Error(ErrorCode::invalid_argument, "dt_macro must be positive");
    if (dt_micro > dt_macro) throw Error(ErrorCode::invalid_argument, "dt_micro must not exceed dt_macro");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw Error(ErrorCode::invalid_argument, "alpha must lie in [0, 1)");
    if (lifting.wind_sign != 1 && lifting.wind_sign != -1)
        throw Error(ErrorCode::invalid_argument, "wind_sign must be +1 or -1");
    if (evolution == Evolution::fd_buffered && !tooth.H)
        throw Error(ErrorCode::invalid_argument, "fd_buffered evolution needs a finite buffer width H");
}

void PatchConfig::validate_against(const MacroState& U) const {
    validate();
    tooth.validate_against(U);
}

TaylorPolynomial lift(const MacroState& U, std::ptrdiff_t j, const LiftingScheme& scheme, double h) {
    const double dx = U.dx();
    const double um2 = U.at(j - 2), um1 = U.at(j - 1), u0 = U.at(j), up1 = U.at(j + 1), up2 = U.at(j + 2);
    const double center = U.position(j);

    switch (scheme.variant) {
    case LiftingVariant::central_d2: {
        const double d2 = (up1 - 2.0 * u0 + um1) / (dx * dx);
        const double d1 = (up1 - um1) / (2.0 * dx);
        return {center, {u0 - h * h * d2 / 24.0, d1, d2}};
    }
    case LiftingVariant::upwind_d2: {
        const double d2 = (up1 - 2.0 * u0 + um1) / (dx * dx);
        const double d1 = scheme.wind_sign > 0 ? (u0 - um1) / dx : (up1 - u0) / dx;
        return {center, {u0 - h * h * d2 / 24.0, d1, d2}};
    }
    case LiftingVariant::central_d4: {
        const double dx2 = dx * dx;
        const double d1 = (-up2 + 8.0 * up1 - 8.0 * um1 + um2) / (12.0 * dx);
        const double d2 = (-up2 + 16.0 * up1 - 30.0 * u0 + 16.0 * um1 - um2) / (12.0 * dx2);
        const double d3 = (up2 - 2.0 * up1 + 2.0 * um1 - um2) / (2.0 * dx2 * dx);
        const double d4 = (up2 - 4.0 * up1 + 6.0 * u0 - 4.0 * um1 + um2) / (dx2 * dx2);
        const double h2 = h * h;
        return {center, {u0 - h2 * d2 / 24.0 - h2 * h2 * d4 / 1920.0, d1, d2, d3, d4}};
    }
    }
    throw Error(ErrorCode::invalid_argument, "unknown lifting variant");
}

double restrict_average(const TaylorPolynomial& p, const ToothConfig& tooth) {
    return poly_average(p, tooth.h);
}

double restrict_average(const micro::MicroFieldState& field, const ToothConfig& tooth) {
    tooth.validate();
    const std::size_t n = field.samples.size();
    const double half_h = 0.5 * tooth.h;
    const double half_box = static_cast<double>(field.half()) * field.dx;
    if (n < 2 || half_box < half_h * (1.0 - 1e-12)) {
        std::ostringstream os;
        os << "micro samples span +-" << half_box << " around the center, tooth needs +-" << half_h;
        throw Error(ErrorCode::tooth_not_covered, os.str());
    }
    // integrate the piecewise-linear interpolant over [-h/2, h/2] in local coordinates
    const auto local = [&](std::size_t i) { return (static_cast<double>(i) - static_cast<double>(field.half())) * field.dx; };
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double x0 = local(i), x1 = local(i + 1);
        const double lo = std::max(x0, -half_h), hi = std::min(x1, half_h);
        if (!(hi > lo)) continue;
        const double slope = (field.samples[i + 1] - field.samples[i]) / (x1 - x0);
        const double f_lo = field.samples[i] + slope * (lo - x0);
        const double f_hi = field.samples[i] + slope * (hi - x0);
        integral += 0.5 * (hi - lo) * (f_lo + f_hi);
    }
    return integral / tooth.h;
}

double extrapolate(double U_n, double U_tilde_dt, double U_tilde_alpha, const PatchConfig& cfg) {
    if (!(cfg.alpha >= 0.0 && cfg.alpha < 1.0)) throw Error(ErrorCode::invalid_argument, "alpha must lie in [0, 1)");
    return U_n + cfg.dt_macro * (U_tilde_dt - U_tilde_alpha) / ((1.0 - cfg.alpha) * cfg.dt_micro);
}

namespace {

// Tooth average after evolving the lifted profile for time t.
double evolved_average(const TaylorPolynomial& p, const PdeSpec& pde, double t, const PatchConfig& cfg) {
    if (cfg.evolution == Evolution::exact)
        return restrict_average(micro::evolve_poly_exact(p, pde, t), cfg.tooth);
    return restrict_average(micro::evolve_fd_buffered(p, pde, t, cfg.tooth, cfg.grid), cfg.tooth);
}

} // namespace

MacroState gap_tooth_step(const MacroState& U, const PdeSpec& pde, const PatchConfig& cfg, unsigned threads) {
    cfg.validate_against(U);
    std::vector<double> next(U.size());
    parallel_for(U.size(), threads, [&](std::size_t j) {
        try {
            const auto p = lift(U, static_cast<std::ptrdiff_t>(j), cfg.lifting, cfg.tooth.h);
            const double u_dt = evolved_average(p, pde, cfg.dt_micro, cfg);
            // The base point is the restriction at time alpha*dt; at alpha = 0 this
            // equals U_j up to rounding (exact path) or quadrature error (FD path).
            const double u_alpha = evolved_average(p, pde, cfg.alpha * cfg.dt_micro, cfg);
            next[j] = extrapolate(U[j], u_dt, u_alpha, cfg);
        } catch (const Error& e) {
            std::ostringstream os;
            os << "tooth " << j << ": " << e.what();
            throw Error(e.code(), os.str());
        }
    });
    return {std::move(next), U.dx(), U.time() + cfg.dt_macro};
}

} // namespace eqf::patch
