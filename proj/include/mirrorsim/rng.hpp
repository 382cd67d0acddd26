#pragma once

#include <cstdint>

namespace mirrorsim {

// SplitMix64 (Vigna, public domain).  Small, fast, and identical on every
// platform, which the reproducibility guarantees lean on.  Each particle gets
// its own stream so that draws never shift between particles when sampling
// parameters change.
class SplitMix64 {
  public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    // Independent stream for substream `index` of a master seed.
    SplitMix64(std::uint64_t seed, std::uint64_t index)
        : state_(scramble(seed) ^ scramble(index * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL)) {}

    std::uint64_t operator()() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return scramble(state_);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~0ULL; }

  private:
    static std::uint64_t scramble(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

}  // namespace mirrorsim
