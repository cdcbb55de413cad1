#pragma once

#include <cstdint>
#include <random>

namespace pdmp {

/// Seeded, indexable stream of uniform variates.
///
/// Identical (seed, stream) pairs reproduce the same sequence bit for bit on
/// every platform (mt19937_64 initialization and output are fully specified
/// by the standard; the uniform mapping below avoids the
/// implementation-defined std::uniform_real_distribution). Distinct stream
/// indices give statistically independent sequences.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream), engine_(mix(seed, stream)) {}

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t stream() const noexcept { return stream_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform on the open interval (0, 1); never returns an endpoint.
    double uniform_open01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Index drawn proportionally to the given nonnegative weights.
    std::size_t categorical(const double* weights, std::size_t count, double total) {
        const double u = uniform_open01() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < count; ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return count - 1;
    }

    static std::uint64_t splitmix64(std::uint64_t x) noexcept {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) noexcept {
        return splitmix64(seed ^ splitmix64(stream * 0x9e3779b97f4a7c15ULL + 1));
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
};

/// FNV-1a over a byte string; used to derive deterministic sub-streams from
/// canonical state keys.
inline std::uint64_t fnv1a64(const char* data, std::size_t size) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace pdmp
