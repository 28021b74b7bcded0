#include "eqf/core.hpp"
#include "eqf/simd/kernels.hpp"

#include <atomic>

namespace eqf::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(EQF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Isa detect() noexcept { return cpu_has_avx2() ? Isa::avx2 : Isa::scalar; }

std::atomic<Isa>& current() noexcept {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

} // namespace

const char* to_string(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    }
    return "unknown";
}

bool isa_available(Isa isa) noexcept {
    return isa == Isa::scalar || (isa == Isa::avx2 && cpu_has_avx2());
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
    if (!isa_available(isa))
        throw Error(ErrorCode::invalid_argument, std::string("ISA not available: ") + to_string(isa));
    current().store(isa, std::memory_order_relaxed);
}

#if defined(EQF_HAVE_AVX2)
#define EQF_DISPATCH(call)                                                                         \
    if (active_isa() == Isa::avx2) return avx2::call;                                              \
    return scalar::call
#else
#define EQF_DISPATCH(call) return scalar::call
#endif

void em_update(std::span<double> x, std::span<const double> drift, std::span<const double> noise,
               double dt, double noise_scale) {
    if (drift.size() < x.size() || noise.size() < x.size())
        throw Error(ErrorCode::invalid_argument, "em_update: drift/noise shorter than state");
    EQF_DISPATCH(em_update(x, drift, noise, dt, noise_scale));
}

double sum(std::span<const double> a) { EQF_DISPATCH(sum(a)); }

double sum_squares(std::span<const double> a) { EQF_DISPATCH(sum_squares(a)); }

double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
    EQF_DISPATCH(sum_sq_diff(a, b));
}

void stencil3_update(std::span<const double> u, std::span<double> out, const std::array<double, 3>& c) {
    if (out.size() < u.size()) throw Error(ErrorCode::invalid_argument, "stencil output too short");
    EQF_DISPATCH(stencil3_update(u, out, c));
}

void stencil5_update(std::span<const double> u, std::span<double> out, const std::array<double, 5>& c) {
    if (out.size() < u.size()) throw Error(ErrorCode::invalid_argument, "stencil output too short");
    EQF_DISPATCH(stencil5_update(u, out, c));
}

#undef EQF_DISPATCH

} // namespace eqf::simd
