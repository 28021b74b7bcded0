#pragma once

// Gap-tooth patch dynamics on a periodic 1D macro grid:
// lift -> evolve inside each tooth -> restrict (tooth average) -> extrapolate.

#include "eqf/core.hpp"
#include "eqf/micro_models.hpp"

namespace eqf::patch {

enum class LiftingVariant { central_d2, upwind_d2, central_d4 };

const char* to_string(LiftingVariant v) noexcept;

struct LiftingScheme {
    LiftingVariant variant = LiftingVariant::central_d2;
    /// Direction the data travels; upwind_d2 differences against it.
    /// For u_t + c u_x = 0 use wind_sign = sign(c), i.e. -sign(a_1).
    int wind_sign = +1;
};

enum class Evolution { exact, fd_buffered };

struct PatchConfig {
    LiftingScheme lifting;
    ToothConfig tooth{0.1, std::nullopt};
    double dt_micro = 1e-4; // delta t, the micro evolution time per tooth
    double dt_macro = 1e-2; // Delta t
    double alpha = 0.0;
    Evolution evolution = Evolution::exact;
    micro::MicroGrid grid{1e-3, 1e-7}; // fd_buffered only

    void validate() const;
    void validate_against(const MacroState& U) const;
};

/// Local Taylor reconstruction around x_j whose h-average reproduces U_j.
TaylorPolynomial lift(const MacroState& U, std::ptrdiff_t j, const LiftingScheme& scheme, double h);

/// Tooth average of an exactly evolved polynomial.
double restrict_average(const TaylorPolynomial& p, const ToothConfig& tooth);

/// Tooth average of micro-grid samples (piecewise-linear, i.e. trapezoidal).
double restrict_average(const micro::MicroFieldState& field, const ToothConfig& tooth);

/// U_n + Delta t (U_dt - U_alpha) / ((1 - alpha) delta t).
double extrapolate(double U_n, double U_tilde_dt, double U_tilde_alpha, const PatchConfig& cfg);

/// One macro step. Tooth failures are rethrown with the tooth index.
MacroState gap_tooth_step(const MacroState& U, const PdeSpec& pde, const PatchConfig& cfg,
                          unsigned threads = 1);

} // namespace eqf::patch
