#include "eqf/core.hpp"

#include <cmath>
#include <sstream>

namespace eqf {

const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::unstable_micro_step: return "unstable_micro_step";
    case ErrorCode::buffer_too_small: return "buffer_too_small";
    case ErrorCode::tooth_not_covered: return "tooth_not_covered";
    case ErrorCode::unsupported_operator: return "unsupported_operator";
    case ErrorCode::budget_exhausted: return "budget_exhausted";
    case ErrorCode::unstable_time_step: return "unstable_time_step";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::config_error: return "config_error";
    }
    return "unknown";
}

double factorial(int k) noexcept {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

TaylorPolynomial::TaylorPolynomial(double center, std::vector<double> coeffs)
    : center_(center), coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) coeffs_.push_back(0.0);
    if (!std::isfinite(center_))
        throw Error(ErrorCode::invalid_argument, "polynomial center must be finite");
    for (double c : coeffs_)
        if (!std::isfinite(c))
            throw Error(ErrorCode::invalid_argument, "polynomial coefficients must be finite");
}

double poly_eval(const TaylorPolynomial& p, double x) {
    const auto c = p.coeffs();
    const double t = x - p.center();
    // Horner on sum_k D_k t^k / k!
    double acc = c.back();
    for (int k = p.degree() - 1; k >= 0; --k) acc = c[k] + acc * t / (k + 1);
    return acc;
}

double poly_average(const TaylorPolynomial& p, double h) {
    if (!(h > 0.0)) throw Error(ErrorCode::invalid_argument, "averaging width must be positive");
    const auto c = p.coeffs();
    double sum = 0.0;
    for (int k = 0; k <= p.degree(); k += 2)
        sum += c[k] * std::pow(h, k) / (factorial(k) * (k + 1) * std::pow(2.0, k));
    return sum;
}

TaylorPolynomial poly_apply_derivative(const TaylorPolynomial& p, int r) {
    if (r < 1) throw Error(ErrorCode::invalid_argument, "derivative order must be >= 1");
    const auto c = p.coeffs();
    if (r > p.degree()) return TaylorPolynomial::zero(p.center());
    return {p.center(), std::vector<double>(c.begin() + r, c.end())};
}

TaylorPolynomial poly_add(const TaylorPolynomial& a, const TaylorPolynomial& b) {
    if (a.center() != b.center())
        throw Error(ErrorCode::invalid_argument, "cannot add polynomials with different centers");
    const int d = std::max(a.degree(), b.degree());
    std::vector<double> c(d + 1);
    for (int k = 0; k <= d; ++k) c[k] = a.coeff(k) + b.coeff(k);
    return {a.center(), std::move(c)};
}

TaylorPolynomial poly_scale(const TaylorPolynomial& p, double s) {
    std::vector<double> c(p.coeffs().begin(), p.coeffs().end());
    for (auto& v : c) v *= s;
    return {p.center(), std::move(c)};
}

MacroState::MacroState(std::vector<double> values, double dx, double time)
    : values_(std::move(values)), dx_(dx), time_(time) {
    if (values_.size() < 3)
        throw Error(ErrorCode::invalid_argument, "macro grid needs at least 3 points");
    if (!(dx_ > 0.0) || !std::isfinite(dx_))
        throw Error(ErrorCode::invalid_argument, "macro grid spacing must be positive");
    if (!(time_ >= 0.0)) throw Error(ErrorCode::invalid_argument, "macro time must be >= 0");
    for (std::size_t j = 0; j < values_.size(); ++j)
        if (!std::isfinite(values_[j])) {
            std::ostringstream os;
            os << "macro value at index " << j << " is not finite";
            throw Error(ErrorCode::invalid_argument, os.str());
        }
}

std::size_t MacroState::wrap(std::ptrdiff_t j) const noexcept {
    const auto n = static_cast<std::ptrdiff_t>(values_.size());
    auto m = j % n;
    if (m < 0) m += n;
    return static_cast<std::size_t>(m);
}

PdeSpec::PdeSpec(std::map<int, double> coefficients) {
    for (auto [r, a] : coefficients) {
        if (r < 1) throw Error(ErrorCode::invalid_argument, "derivative orders must be >= 1");
        if (!std::isfinite(a)) throw Error(ErrorCode::invalid_argument, "PDE coefficient not finite");
        if (a != 0.0) coefficients_.emplace(r, a);
    }
    if (coefficients_.empty())
        throw Error(ErrorCode::invalid_argument, "PDE needs at least one nonzero coefficient");
}

double PdeSpec::coefficient(int r) const noexcept {
    auto it = coefficients_.find(r);
    return it == coefficients_.end() ? 0.0 : it->second;
}

void ToothConfig::validate() const {
    if (!(h > 0.0)) throw Error(ErrorCode::invalid_argument, "tooth width h must be positive");
    if (H && !(*H >= h)) throw Error(ErrorCode::invalid_argument, "buffer width H must be >= h");
}

void ToothConfig::validate_against(const MacroState& U) const {
    validate();
    if (!(h < U.dx()))
        throw Error(ErrorCode::invalid_argument, "tooth width h must be smaller than the macro spacing");
}

} // namespace eqf
