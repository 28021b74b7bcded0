#pragma once

// Data-parallel inner loops with a scalar reference and an AVX2 variant.
//
// Every variant performs the same IEEE operations in the same order (no FMA
// contraction, fixed 4-lane reduction tree), so the selected ISA never
// changes a result bit. The active variant is picked once at startup from
// CPUID and can be overridden with set_isa() for equivalence testing.

#include <array>
#include <span>

namespace eqf::simd {

enum class Isa { scalar, avx2 };

const char* to_string(Isa isa) noexcept;
bool isa_available(Isa isa) noexcept;
Isa active_isa() noexcept;
/// Not synchronized with in-flight kernel calls; call before any work starts.
void set_isa(Isa isa);

/// x[i] = (x[i] + drift[i] * dt) + noise_scale * noise[i]
void em_update(std::span<double> x, std::span<const double> drift, std::span<const double> noise,
               double dt, double noise_scale);

double sum(std::span<const double> a);
double sum_squares(std::span<const double> a);
/// sum_i (a[i] - b[i])^2 over the common length.
double sum_sq_diff(std::span<const double> a, std::span<const double> b);

/// out[i] = u[i] + ((c0 u[i-1] + c1 u[i]) + c2 u[i+1]) for 1 <= i < n-1.
/// Edge entries of out are left untouched.
void stencil3_update(std::span<const double> u, std::span<double> out, const std::array<double, 3>& c);

/// out[i] = u[i] + sum_s c[s] u[i+s-2] (left to right) for 2 <= i < n-2.
void stencil5_update(std::span<const double> u, std::span<double> out, const std::array<double, 5>& c);

#define EQF_KERNEL_DECLS                                                                           \
    void em_update(std::span<double> x, std::span<const double> drift,                             \
                   std::span<const double> noise, double dt, double noise_scale) noexcept;         \
    double sum(std::span<const double> a) noexcept;                                                \
    double sum_squares(std::span<const double> a) noexcept;                                        \
    double sum_sq_diff(std::span<const double> a, std::span<const double> b) noexcept;             \
    void stencil3_update(std::span<const double> u, std::span<double> out,                         \
                         const std::array<double, 3>& c) noexcept;                                 \
    void stencil5_update(std::span<const double> u, std::span<double> out,                         \
                         const std::array<double, 5>& c) noexcept;

namespace scalar {
EQF_KERNEL_DECLS
}

#if defined(EQF_HAVE_AVX2)
namespace avx2 {
EQF_KERNEL_DECLS
}
#endif

#undef EQF_KERNEL_DECLS

} // namespace eqf::simd
