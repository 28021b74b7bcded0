#pragma once

// Shared value types: local Taylor polynomials, periodic macro grids,
// constant-coefficient linear PDE descriptors and tooth geometry.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eqf {

enum class ErrorCode {
    invalid_argument,
    unstable_micro_step,
    buffer_too_small,
    tooth_not_covered,
    unsupported_operator,
    budget_exhausted,
    unstable_time_step,
    insufficient_data,
    config_error,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Local reconstruction u(x) = sum_k D_k (x - center)^k / k!.
///
/// Coefficients are the raw derivative values D_k; the 1/k! factor is applied
/// at evaluation time. The zero polynomial is stored as a single 0 coefficient.
class TaylorPolynomial {
public:
    TaylorPolynomial(double center, std::vector<double> coeffs);

    static TaylorPolynomial zero(double center) { return {center, {0.0}}; }

    double center() const noexcept { return center_; }
    int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
    std::span<const double> coeffs() const noexcept { return coeffs_; }
    double coeff(int k) const noexcept {
        return k >= 0 && k < static_cast<int>(coeffs_.size()) ? coeffs_[k] : 0.0;
    }

    bool operator==(const TaylorPolynomial&) const = default;

private:
    double center_;
    std::vector<double> coeffs_;
};

double poly_eval(const TaylorPolynomial& p, double x);

/// Mean of p over [center - h/2, center + h/2], in closed form.
double poly_average(const TaylorPolynomial& p, double h);

/// Taylor polynomial of d^r p / dx^r (coefficients shift down by r).
TaylorPolynomial poly_apply_derivative(const TaylorPolynomial& p, int r);

TaylorPolynomial poly_add(const TaylorPolynomial& a, const TaylorPolynomial& b);
TaylorPolynomial poly_scale(const TaylorPolynomial& p, double s);

/// Periodic macro grid values U_j at x_j = j * dx.
class MacroState {
public:
    MacroState(std::vector<double> values, double dx, double time = 0.0);

    std::size_t size() const noexcept { return values_.size(); }
    double dx() const noexcept { return dx_; }
    double time() const noexcept { return time_; }
    std::span<const double> values() const noexcept { return values_; }

    double position(std::ptrdiff_t j) const noexcept { return static_cast<double>(j) * dx_; }
    std::size_t wrap(std::ptrdiff_t j) const noexcept;
    /// Periodic access, any integer offset.
    double at(std::ptrdiff_t j) const noexcept { return values_[wrap(j)]; }

    double operator[](std::size_t j) const noexcept { return values_[j]; }

private:
    std::vector<double> values_;
    double dx_;
    double time_;
};

/// du/dt = sum_r a_r d^r u / dx^r.
class PdeSpec {
public:
    explicit PdeSpec(std::map<int, double> coefficients);

    static PdeSpec heat(double diffusivity = 1.0) { return PdeSpec({{2, diffusivity}}); }
    /// u_t + c u_x = 0.
    static PdeSpec advection(double speed = 1.0) { return PdeSpec({{1, -speed}}); }
    /// u_t = -kappa u_xxxx.
    static PdeSpec biharmonic(double kappa = 1.0) { return PdeSpec({{4, -kappa}}); }

    const std::map<int, double>& coefficients() const noexcept { return coefficients_; }
    double coefficient(int r) const noexcept;
    int max_order() const noexcept { return coefficients_.rbegin()->first; }
    int min_order() const noexcept { return coefficients_.begin()->first; }

private:
    std::map<int, double> coefficients_;
};

/// Averaging width h inside a simulation box of width H (nullopt: unbounded).
struct ToothConfig {
    double h;
    std::optional<double> H;

    void validate() const;
    void validate_against(const MacroState& U) const;
};

/// Factorial as a double; exact for k <= 22.
double factorial(int k) noexcept;

} // namespace eqf
