#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace nrlearn {

// splitmix64 step; also used as the seed-derivation mix.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Splittable-stream contract: every (master seed, index) pair maps to an
// independent stream seed. Nested derivation (trial -> trace/noise/init)
// just chains this.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    return splitmix64(s);
}

// xoshiro256++ with explicit distribution transforms. All draws are
// bit-reproducible across platforms; a normal consumes exactly two
// uniforms, so every consumer uses a deterministic number of draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // [0, 1), 53-bit resolution
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // (0, 1), never returns an endpoint; safe under log()
    double uniform01_open() {
        return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
    }

    // integer in [0, n)
    std::uint64_t uniform_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform01() * static_cast<double>(n)) % n;
    }

    double exponential(double rate) { return -std::log(uniform01_open()) / rate; }

    // Box-Muller; two uniforms -> two independent standard normals
    std::pair<double, double> normal_pair() {
        const double u1 = uniform01_open();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        return {r * std::cos(angle), r * std::sin(angle)};
    }

    double normal() { return normal_pair().first; }

    void normal_fill(double* out, long n) {
        long i = 0;
        for (; i + 1 < n; i += 2) {
            const auto [z0, z1] = normal_pair();
            out[i] = z0;
            out[i + 1] = z1;
        }
        if (i < n) out[i] = normal();
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t state_[4];
};

} // namespace nrlearn
