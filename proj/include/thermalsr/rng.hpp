#pragma once

#include <array>
#include <cstdint>
#include <optional>

namespace thermalsr {

/// Philox-4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seedable, splittable, counter-based random stream.
///
/// A stream is identified by a 64-bit key. `derive(id)` returns a child stream
/// whose key depends only on the parent key and `id`, never on how many draws
/// the parent has made, so work units keyed by (seed, image, channel) produce
/// the same draws in any execution order.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) noexcept;

    RngStream derive(std::uint64_t id) const noexcept;
    std::uint64_t key() const noexcept { return key_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() noexcept;
    /// Uniform on (0, 1].
    double uniform_open_left() noexcept { return 1.0 - uniform(); }
    /// Uniform integer on [lo, hi], unbiased (rejection sampling).
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) noexcept;
    /// Standard normal via Box-Muller.
    double normal() noexcept;
    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

private:
    struct KeyTag {};
    RngStream(std::uint64_t key, KeyTag) noexcept : key_(key) {}

    std::uint64_t key_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int buffered_ = 0;
    std::optional<double> spare_normal_;
};

} // namespace thermalsr
