#include "xopgan/numerics/rng.hpp"

#include <cmath>
#include <numbers>

namespace xopgan {

namespace {

constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

RngStream::RngStream(std::uint64_t seed, std::string_view name) : key_(mix(mix(seed) ^ fnv1a64(name))) {}

RngStream RngStream::split(std::string_view name) const {
    RngStream s;
    s.key_ = mix(key_ ^ mix(fnv1a64(name)));
    return s;
}

RngStream RngStream::split(std::uint64_t index) const {
    RngStream s;
    s.key_ = mix(key_ + mix(index ^ 0x5851f42d4c957f2dULL));
    return s;
}

std::uint64_t RngStream::next_u64() noexcept {
    return mix(key_ ^ mix(counter_++));
}

double RngStream::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::below(std::uint64_t n) noexcept {
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double RngStream::normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace xopgan
