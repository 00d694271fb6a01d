#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace tblm {

// SplitMix64 finalizer, used for seed derivation.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seedable generator with a fixed bit-stream contract.
///
/// The engine is std::mt19937_64 (its output sequence is fixed by the C++
/// standard). The distributions below are implemented here rather than taken
/// from <random>, whose distribution algorithms are implementation-defined:
///   - uniform01():  (next() >> 11) * 2^-53, in [0, 1)
///   - below(n):     rejection sampling on next() against the largest
///                   multiple of n not exceeding 2^64
///   - shuffle():    Fisher-Yates from the back, swap(i, below(i + 1))
///   - split(k):     new engine seeded with splitmix64(seed ^ splitmix64(k + 1))
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next() { return engine_(); }

    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = (~std::uint64_t{0} / n) * n;
        std::uint64_t x;
        do {
            x = next();
        } while (x >= limit);
        return x % n;
    }

    bool coin() { return (next() >> 63) != 0; }

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Independent stream derived from this generator's seed.
    Rng split(std::uint64_t stream) const { return Rng(splitmix64(seed_ ^ splitmix64(stream + 1))); }

    // UniformRandomBitGenerator surface.
    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return next(); }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace tblm
