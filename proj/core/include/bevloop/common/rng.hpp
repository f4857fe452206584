#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace bevloop {

// SplitMix64 finalizer. Counter-based generation keeps every consumer of
// randomness addressable by (seed, stream, counter) so independent parts of
// a run never share a stream and results replay bit-identically on any
// platform. Standard-library distributions are implementation-defined and
// deliberately avoided.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return splitmix64(a ^ (splitmix64(b) + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

inline uint64_t hash_str(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a folded through splitmix
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return splitmix64(h);
}

class Rng {
  public:
    explicit Rng(uint64_t seed, uint64_t stream = 0)
        : key_(hash_combine(seed, stream)) {}

    static Rng derive(uint64_t seed, std::string_view tag, uint64_t stream = 0) {
        return Rng(hash_combine(seed, hash_str(tag)), stream);
    }

    uint64_t next_u64() { return splitmix64(key_ + ctr_++); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive bounds.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(next_u64() % span);
    }

    // Box-Muller; consumes two draws per value, no cached half.
    double gaussian() {
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Bernoulli with probability p.
    bool flip(double p) { return uniform() < p; }

  private:
    uint64_t key_;
    uint64_t ctr_ = 0;
};

}  // namespace bevloop
