#include "eqf/rng.hpp"

#include <cmath>
#include <numbers>

namespace eqf {
namespace {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t random_bits(const RngStreamSpec& key, std::uint64_t lane) noexcept {
    std::uint64_t h = mix64(key.master_seed);
    h = mix64(h ^ mix64(key.stream_id + 0x632be59bd9b4e019ULL));
    h = mix64(h ^ mix64(key.step_id + 0x85157af5a3b8c9d1ULL));
    h = mix64(h ^ lane);
    return h;
}

double uniform01(const RngStreamSpec& key, std::uint64_t lane) noexcept {
    // 53 random mantissa bits, offset by half an ulp so 0 is never returned
    return (static_cast<double>(random_bits(key, lane) >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(const RngStreamSpec& key, std::uint64_t lane) noexcept {
    const double u1 = uniform01(key, 2 * lane);
    const double u2 = uniform01(key, 2 * lane + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace eqf
