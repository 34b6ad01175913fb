#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace eswt {

// Deterministic counter-based RNG. Every consumer derives its own stream from
// (root seed, purpose, index), so adding a new consumer never shifts the
// values seen by existing ones.
class Rng {
public:
    explicit Rng(std::uint64_t state) : state_(state) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

    bool coin() { return (next_u64() & 1u) != 0; }

    double normal() {
        // Box-Muller; consumes exactly two draws
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t hash_purpose(std::string_view purpose) {
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : purpose) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline Rng derive_rng(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0) {
    std::uint64_t mix = seed;
    mix ^= hash_purpose(purpose) + 0x9e3779b97f4a7c15ULL + (mix << 6) + (mix >> 2);
    mix ^= index + 0x9e3779b97f4a7c15ULL + (mix << 6) + (mix >> 2);
    Rng r(mix);
    r.next_u64();  // decorrelate nearby indices
    return r;
}

}  // namespace eswt
