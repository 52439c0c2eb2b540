#pragma once

#include <cstdint>
#include <random>

namespace cde::rng {

// SplitMix64 finalizer. Used as a counter-based generator: the value for a
// (seed, index) pair does not depend on how many other draws were made.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Top 53 bits mapped to [0, 1).
constexpr double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Uniform [0, 1) draw determined solely by (seed, index).
constexpr double counter_uniform(std::uint64_t seed, std::uint64_t index) {
    return to_unit(mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL)));
}

/// Child seed for stream `index` of a parent seed.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
    return mix64(parent ^ mix64(index ^ 0xd1b54a32d192ed03ULL));
}

// Sequential stream. std::mt19937_64 output is fixed by the standard; the
// conversion to double is done here rather than through
// std::uniform_real_distribution so draws match across standard libraries.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return to_unit(engine_()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t bits() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace cde::rng
