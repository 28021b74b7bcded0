#pragma once

// Counter-based random draws. Every draw is a pure function of
// (master_seed, stream_id, step_id, lane), so results never depend on the
// order in which replicas, teeth or trajectories are evaluated.

#include <cstdint>

namespace eqf {

struct RngStreamSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;
    std::uint64_t step_id = 0;

    RngStreamSpec with_stream(std::uint64_t s) const noexcept { return {master_seed, s, step_id}; }
    RngStreamSpec with_step(std::uint64_t s) const noexcept { return {master_seed, stream_id, s}; }

    bool operator==(const RngStreamSpec&) const = default;
};

/// 64 well-mixed bits for the given key.
std::uint64_t random_bits(const RngStreamSpec& key, std::uint64_t lane = 0) noexcept;

/// Uniform on the open interval (0, 1).
double uniform01(const RngStreamSpec& key, std::uint64_t lane = 0) noexcept;

/// Standard normal via Box-Muller on lanes (2*lane, 2*lane+1).
double standard_normal(const RngStreamSpec& key, std::uint64_t lane = 0) noexcept;

/// Sequential view over one stream: the i-th call returns draw step_id + i.
class CounterStream {
public:
    explicit CounterStream(RngStreamSpec base) : base_(base) {}

    double normal() noexcept { return standard_normal(base_.with_step(base_.step_id + counter_++)); }
    double uniform() noexcept { return uniform01(base_.with_step(base_.step_id + counter_++)); }

private:
    RngStreamSpec base_;
    std::uint64_t counter_ = 0;
};

} // namespace eqf
