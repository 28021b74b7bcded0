// Built with -mavx2 (never -mfma): mul and add stay separately rounded so the
// results match the scalar reference bit for bit.

#include "eqf/simd/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <immintrin.h>

namespace eqf::simd::avx2 {
namespace {

// Fold the scalar tail into the matching lanes, then combine like the scalar tree.
double finish(__m256d acc, std::size_t start, std::size_t n, auto term) noexcept {
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    for (std::size_t i = start; i < n; ++i) lane[i % 4] += term(i);
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

} // namespace

void em_update(std::span<double> x, std::span<const double> drift, std::span<const double> noise,
               double dt, double noise_scale) noexcept {
    const std::size_t n = x.size();
    const __m256d vdt = _mm256_set1_pd(dt);
    const __m256d vscale = _mm256_set1_pd(noise_scale);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xi = _mm256_loadu_pd(x.data() + i);
        const __m256d det = _mm256_add_pd(xi, _mm256_mul_pd(_mm256_loadu_pd(drift.data() + i), vdt));
        const __m256d sto = _mm256_mul_pd(vscale, _mm256_loadu_pd(noise.data() + i));
        _mm256_storeu_pd(x.data() + i, _mm256_add_pd(det, sto));
    }
    for (; i < n; ++i) {
        const double deterministic = x[i] + drift[i] * dt;
        const double stochastic = noise_scale * noise[i];
        x[i] = deterministic + stochastic;
    }
}

double sum(std::span<const double> a) noexcept {
    const std::size_t n = a.size();
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a.data() + i));
    return finish(acc, i, n, [&](std::size_t j) { return a[j]; });
}

double sum_squares(std::span<const double> a) noexcept {
    const std::size_t n = a.size();
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(a.data() + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
    }
    return finish(acc, i, n, [&](std::size_t j) { return a[j] * a[j]; });
}

double sum_sq_diff(std::span<const double> a, std::span<const double> b) noexcept {
    const std::size_t n = std::min(a.size(), b.size());
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    return finish(acc, i, n, [&](std::size_t j) {
        const double d = a[j] - b[j];
        return d * d;
    });
}

void stencil3_update(std::span<const double> u, std::span<double> out,
                     const std::array<double, 3>& c) noexcept {
    const std::size_t n = u.size();
    if (n < 3) return;
    const __m256d c0 = _mm256_set1_pd(c[0]);
    const __m256d c1 = _mm256_set1_pd(c[1]);
    const __m256d c2 = _mm256_set1_pd(c[2]);
    const double* p = u.data();
    std::size_t i = 1;
    for (; i + 4 < n; i += 4) {
        __m256d acc = _mm256_mul_pd(c0, _mm256_loadu_pd(p + i - 1));
        const __m256d ui = _mm256_loadu_pd(p + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(c1, ui));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(c2, _mm256_loadu_pd(p + i + 1)));
        _mm256_storeu_pd(out.data() + i, _mm256_add_pd(ui, acc));
    }
    for (; i + 1 < n; ++i) {
        double acc = c[0] * u[i - 1];
        acc = acc + c[1] * u[i];
        acc = acc + c[2] * u[i + 1];
        out[i] = u[i] + acc;
    }
}

void stencil5_update(std::span<const double> u, std::span<double> out,
                     const std::array<double, 5>& c) noexcept {
    const std::size_t n = u.size();
    if (n < 5) return;
    __m256d cv[5];
    for (int s = 0; s < 5; ++s) cv[s] = _mm256_set1_pd(c[s]);
    const double* p = u.data();
    std::size_t i = 2;
    for (; i + 6 <= n; i += 4) {
        __m256d acc = _mm256_mul_pd(cv[0], _mm256_loadu_pd(p + i - 2));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(cv[1], _mm256_loadu_pd(p + i - 1)));
        const __m256d ui = _mm256_loadu_pd(p + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(cv[2], ui));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(cv[3], _mm256_loadu_pd(p + i + 1)));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(cv[4], _mm256_loadu_pd(p + i + 2)));
        _mm256_storeu_pd(out.data() + i, _mm256_add_pd(ui, acc));
    }
    for (; i + 2 < n; ++i) {
        double acc = c[0] * u[i - 2];
        acc = acc + c[1] * u[i - 1];
        acc = acc + c[2] * u[i];
        acc = acc + c[3] * u[i + 1];
        acc = acc + c[4] * u[i + 2];
        out[i] = u[i] + acc;
    }
}

} // namespace eqf::simd::avx2
