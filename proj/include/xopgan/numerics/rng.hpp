#pragma once

#include <cstdint>
#include <string_view>

namespace xopgan {

/// Counter-based random stream. The n-th draw is a pure function of
/// (key, n), so a stream can be split or replayed without shared state.
/// Streams are keyed by a seed and a consumer name ("init", "labels", ...).
class RngStream {
public:
    RngStream() = default;
    RngStream(std::uint64_t seed, std::string_view name);

    /// Independent child stream, e.g. one per layer or per record.
    RngStream split(std::string_view name) const;
    RngStream split(std::uint64_t index) const;

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;
    double normal() noexcept;

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace xopgan
