#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace ibprox {

/// Seeded random source with a platform-independent output stream.
///
/// Raw mt19937_64 words are mapped to doubles and indices directly instead of
/// going through std::uniform_*_distribution, whose output is
/// implementation-defined. Two builds given the same seed therefore draw the
/// same sequence, which the trace/CSV determinism contracts rely on.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform index in [0, n). Rejection sampling keeps the draw unbiased.
    std::size_t uniform_index(std::size_t n) {
        const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
        const std::uint64_t limit = max - max % n;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return static_cast<std::size_t>(v % n);
    }

    /// Fisher-Yates shuffle driven by uniform_index.
    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::swap(values[i - 1], values[uniform_index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace ibprox
