#ifndef MOODKIT_RNG_HPP
#define MOODKIT_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace moodkit {

/// Deterministic random source. The engine is std::mt19937_64 (fully specified
/// by the standard) and every distribution below is implemented explicitly on
/// top of the raw 64-bit stream, so a given seed produces the same draws on
/// every platform and standard library. Single-owner: not safe to share
/// across threads.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform();

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi);

    /// Uniform integer in [0, bound), unbiased via rejection. bound must be > 0.
    std::size_t index(std::size_t bound);

    /// Standard normal via Box-Muller (two uniforms per draw, no caching).
    double normal();

    /// Gamma(shape, 1), shape > 0. Marsaglia-Tsang squeeze for shape >= 1,
    /// boost trick gamma(shape+1) * U^(1/shape) below 1.
    double gamma(double shape);

    /// Beta(a, b) as X/(X+Y) with X~Gamma(a), Y~Gamma(b). Result clamped to
    /// the open interval (0, 1).
    double beta(double a, double b);

    /// Fisher-Yates shuffle driven by index().
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    /// Independent substream keyed by (seed, stream); deterministic.
    SeededRng derive(std::uint64_t stream) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace moodkit

#endif  // MOODKIT_RNG_HPP
