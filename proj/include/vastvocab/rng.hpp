#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "vastvocab/matrix.hpp"

namespace vastvocab {

// splitmix64 finalizer. Used both as the seed-splitting rule for parallel
// streams (stream i gets mix64(seed ^ (i+1)*GOLDEN)) and nowhere else.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed ^ (stream + 1) * 0x9E3779B97F4A7C15ULL);
}

// Seeded generator with hand-rolled distributions so a seed pins the exact
// value stream independent of the standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // uniform in [0, 1)
    double uniform01() {
        return (engine_() >> 11) * (1.0 / 9007199254740992.0);  // 53-bit mantissa
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // inclusive bounds
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        // modulo bias is < 2^-40 for the span sizes used here
        return lo + static_cast<std::int64_t>(engine_() % span);
    }

    // Box-Muller without caching: two uniforms per draw, fully stateless
    // between calls.
    double gaussian(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * 3.141592653589793 * u2);
    }

    DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, double mean,
                                double stddev) {
        DenseMatrix m(rows, cols);
        for (auto& v : m.data) v = gaussian(mean, stddev);
        return m;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace vastvocab
