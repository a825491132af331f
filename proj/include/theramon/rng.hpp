#pragma once

// Seedable random streams.
//
// Stream derivation rule: the engine for stream `name` under master seed `s`
// is mt19937_64 seeded with splitmix64(s ^ fnv1a64(name)). The mapping only
// depends on (s, name), so streams are stable across runs and independent of
// the order in which they are created.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace theramon {

inline constexpr std::uint64_t fnv1a64(std::string_view text,
                                       std::uint64_t hash = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    using result_type = std::mt19937_64::result_type;

    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    static Rng derive(std::uint64_t seed, std::string_view stream) {
        return Rng(splitmix64(seed ^ fnv1a64(stream)));
    }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal(double mean, double sd) {
        std::normal_distribution<double> dist(mean, sd);
        return dist(engine_);
    }

    /// Gamma with shape/rate parameterization.
    double gamma(double shape, double rate) {
        std::gamma_distribution<double> dist(shape, 1.0 / rate);
        return dist(engine_);
    }

    std::size_t index(std::size_t n) {
        std::uniform_int_distribution<std::size_t> dist(0, n - 1);
        return dist(engine_);
    }

    bool operator==(const Rng&) const = default;

private:
    std::mt19937_64 engine_;
};

}  // namespace theramon
