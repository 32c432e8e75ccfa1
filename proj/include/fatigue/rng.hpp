#pragma once

#include <cstdint>

namespace fatigue {

// SplitMix64 (Steele, Lea, Flood 2014). Counter based: the k-th output of a
// stream depends only on (seed, k), so a stream position is fully described by
// two integers and replays identically in any language.
//
//   z = seed + (k + 1) * 0x9E3779B97F4A7C15
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   out = z ^ (z >> 31)
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t k) noexcept {
    return splitmix64_mix(seed + (k + 1) * 0x9E3779B97F4A7C15ULL);
}

// Top 53 bits mapped to [0, 1).
constexpr double to_unit_double(std::uint64_t x) noexcept {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Seed of an independent sub-stream, e.g. (study seed, run index, purpose).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
    return splitmix64_at(splitmix64_at(seed, a) ^ 0xD1B54A32D192ED03ULL, b);
}

class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed, std::uint64_t position = 0) noexcept
        : seed_(seed), position_(position) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept { return splitmix64_at(seed_, position_++); }
    double uniform() noexcept { return to_unit_double((*this)()); }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t position() const noexcept { return position_; }

private:
    std::uint64_t seed_;
    std::uint64_t position_;
};

} // namespace fatigue
