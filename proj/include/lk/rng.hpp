#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace lk {

// splitmix64, used both as a generator and as a seed/key mixer.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    return splitmix64(s);
}

inline uint64_t hash_str(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Deterministic RNG with explicit distributions so results do not depend on
// the standard library's <random> implementation.
class Rng {
  public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {
        // warm up so nearby seeds diverge immediately
        splitmix64(state_);
    }

    uint64_t next_u64() { return splitmix64(state_); }

    // uniform double in [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // uniform double in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n), n > 0
    uint64_t uniform_int(uint64_t n) {
        // rejection sampling to avoid modulo bias
        uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // standard normal via Box-Muller; draws two uniforms per pair
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

  private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Derived per-purpose seed: hash(global_seed, salt strings / indices).
inline uint64_t derive_seed(uint64_t base, uint64_t a) { return mix_seed(base, a); }
inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b) {
    return mix_seed(mix_seed(base, a), b);
}
inline uint64_t derive_seed(uint64_t base, const std::string& tag) {
    return mix_seed(base, hash_str(tag));
}
inline uint64_t derive_seed(uint64_t base, const std::string& tag, uint64_t a) {
    return mix_seed(mix_seed(base, hash_str(tag)), a);
}
inline uint64_t derive_seed(uint64_t base, const std::string& tag, uint64_t a, uint64_t b) {
    return mix_seed(mix_seed(mix_seed(base, hash_str(tag)), a), b);
}

}  // namespace lk
