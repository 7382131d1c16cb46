#ifndef DTREG_RNG_HPP
#define DTREG_RNG_HPP

#include <cstdint>

namespace dtreg {

// SplitMix64 (Steele, Lea & Flood). A fixed 64-bit mixing scheme makes
// seeded generation bit-identical across platforms and compilers, which is
// what keeps synthetic cases reproducible everywhere.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    // Derives an independent stream; `salt` separates the per-purpose
    // substreams of one case seed.
    static SplitMix64 stream(std::uint64_t seed, std::uint64_t salt) {
        SplitMix64 mixer(seed ^ (0x9E3779B97F4A7C15ULL * (salt + 1)));
        return SplitMix64(mixer.next_u64());
    }

private:
    std::uint64_t state_;
};

} // namespace dtreg

#endif
