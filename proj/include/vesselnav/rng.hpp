#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace vn {

// All randomness in the library flows through this generator so that results
// do not depend on the standard library's distribution implementations.
// xoshiro256++ state, seeded through splitmix64.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_name(std::string_view name) {
    // FNV-1a, used to derive named sub-streams from a root seed.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    /// Derive an independent stream from a root seed and a stream name.
    static Rng stream(std::uint64_t root_seed, std::string_view name) {
        std::uint64_t mix = root_seed;
        std::uint64_t a = splitmix64(mix);
        return Rng(a ^ hash_name(name));
    }

    /// Derive a child stream indexed by an integer (episode counters etc.).
    Rng split(std::uint64_t index) const {
        std::uint64_t mix = s_[0] ^ (s_[2] * 0x9e3779b97f4a7c15ULL);
        std::uint64_t a = splitmix64(mix);
        return Rng(a ^ (index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    }

    Rng split(std::string_view name) const {
        std::uint64_t mix = s_[0] ^ s_[2];
        std::uint64_t a = splitmix64(mix);
        return Rng(a ^ hash_name(name));
    }

    std::uint64_t next_u64() {
        auto rotl = [](std::uint64_t x, int k) {
            return (x << k) | (x >> (64 - k));
        };
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    /// Standard normal via Box-Muller. Consumes exactly two uniforms per draw
    /// so the stream position stays easy to reason about.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    const std::array<std::uint64_t, 4>& state() const { return s_; }
    void set_state(const std::array<std::uint64_t, 4>& st) { s_ = st; }

private:
    std::array<std::uint64_t, 4> s_{};
};

} // namespace vn
