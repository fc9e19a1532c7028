#pragma once

#include <cstdint>

namespace dqhe {

/// Counter-free splittable generator (splitmix64). Every consumer derives its
/// own stream from (seed, index), so parallel sampling is reproducible
/// independent of worker count and scheduling.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53 mantissa bits, identical across platforms.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Symmetric uniform in (-scale, scale).
    double symmetric(double scale) { return scale * (2.0 * uniform() - 1.0); }

private:
    std::uint64_t state_;
};

/// Derives an independent stream for substream `index` of a master seed.
inline SplitMix64 substream(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 mixer(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    return SplitMix64(mixer.next());
}

}  // namespace dqhe
