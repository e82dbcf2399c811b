#pragma once

#include <cstdint>
#include <cmath>

namespace frax {

// splitmix64 step; also used as the finalizer in seed derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

// Deterministic child-seed derivation: folds each index into the hash state.
// Used to key classes, members, epochs and renders off one master seed.
template <class... Parts>
std::uint64_t derive_seed(std::uint64_t root, Parts... parts) {
    std::uint64_t h = mix64(root + 0x9e3779b97f4a7c15ULL);
    ((h = mix64(h ^ (static_cast<std::uint64_t>(parts) + 0x9e3779b97f4a7c15ULL))), ...);
    return h;
}

// Domain tags keep the different seed streams disjoint.
enum SeedDomain : std::uint64_t {
    SEED_CLASS_MEMBER = 0x11,
    SEED_EPOCH_CLASS = 0x22,
    SEED_EPOCH_MEMBER = 0x33,
    SEED_EPOCH_RENDER = 0x44,
    SEED_EPOCH_AUGMENT = 0x55,
    SEED_EXPORT_RENDER = 0x66,
    SEED_FILTER_BANK = 0x77,
    SEED_CHANNEL_SUBSET = 0x88,
};

// xoshiro256**. Hand-rolled so streams are bit-identical on every platform;
// the standard library distributions make no such guarantee.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1): never returns an exact endpoint.
    double uniform_open() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n) via 128-bit multiply; avoids modulo skew.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<__uint128_t>(next()) * n) >> 64);
    }

    bool coin() { return (next() >> 63) != 0; }

    // Standard normal, Box-Muller with the spare cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u = uniform_open();
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 6.283185307179586476925286766559 * v;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace frax
