#include "eqf/simd/kernels.hpp"

#include <algorithm>
#include <cstddef>

namespace eqf::simd::scalar {
namespace {

// Reduction tree shared with the vector variants: element i accumulates into
// lane i % 4, lanes combine as (l0 + l1) + (l2 + l3).
template <class Term>
double lane_reduce(std::size_t n, Term term) noexcept {
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) lane[i % 4] += term(i);
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

} // namespace

void em_update(std::span<double> x, std::span<const double> drift, std::span<const double> noise,
               double dt, double noise_scale) noexcept {
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double deterministic = x[i] + drift[i] * dt;
        const double stochastic = noise_scale * noise[i];
        x[i] = deterministic + stochastic;
    }
}

double sum(std::span<const double> a) noexcept {
    return lane_reduce(a.size(), [&](std::size_t i) { return a[i]; });
}

double sum_squares(std::span<const double> a) noexcept {
    return lane_reduce(a.size(), [&](std::size_t i) {
        const double v = a[i];
        return v * v;
    });
}

double sum_sq_diff(std::span<const double> a, std::span<const double> b) noexcept {
    return lane_reduce(std::min(a.size(), b.size()), [&](std::size_t i) {
        const double d = a[i] - b[i];
        return d * d;
    });
}

void stencil3_update(std::span<const double> u, std::span<double> out,
                     const std::array<double, 3>& c) noexcept {
    const std::size_t n = u.size();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        double acc = c[0] * u[i - 1];
        acc = acc + c[1] * u[i];
        acc = acc + c[2] * u[i + 1];
        out[i] = u[i] + acc;
    }
}

void stencil5_update(std::span<const double> u, std::span<double> out,
                     const std::array<double, 5>& c) noexcept {
    const std::size_t n = u.size();
    for (std::size_t i = 2; i + 2 < n; ++i) {
        double acc = c[0] * u[i - 2];
        acc = acc + c[1] * u[i - 1];
        acc = acc + c[2] * u[i];
        acc = acc + c[3] * u[i + 1];
        acc = acc + c[4] * u[i + 2];
        out[i] = u[i] + acc;
    }
}

} // namespace eqf::simd::scalar
