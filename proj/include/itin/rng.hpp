#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include <Eigen/Core>

#include "itin/errors.hpp"

namespace itin {

namespace detail {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

}  // namespace detail

/// Counter-based deterministic random source (splitmix64 finalizer applied to
/// seed + counter * gamma). Each draw is a pure function of (seed, counter),
/// so the sequence is reproducible bit-for-bit across runs, and independent
/// substreams can be derived from the seed alone without touching the parent's
/// position. Single-owner: clone or derive substreams for parallel consumers.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), counter_(0) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() {
        ++counter_;
        return detail::mix64(seed_ + counter_ * detail::kGoldenGamma);
    }

    /// Uniform double in [0, 1), 53 mantissa bits.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform_in(double lo, double hi) {
        return lo + (hi - lo) * next_uniform();
    }

    /// Two independent standard normals via Box-Muller; consumes two draws.
    /// The first uniform is taken in (0, 1] so the log is always finite.
    std::pair<double, double> next_normal_pair() {
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

    double next_normal() { return next_normal_pair().first; }

    /// Independent stream keyed by (seed, stream_id). Does not advance or
    /// depend on this stream's counter.
    RngStream substream(std::uint64_t stream_id) const {
        return RngStream(detail::mix64(seed_ ^ detail::mix64(stream_id + 0x632BE59BD9B4E019ull)));
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

/// dim independent draws from Normal(0, scale^2). scale = 0 yields the zero
/// vector while consuming the same number of draws as scale > 0.
inline Eigen::VectorXd gaussian_vector(RngStream& rng, Eigen::Index dim, double scale) {
    if (!(scale >= 0.0) || !std::isfinite(scale))
        throw InvalidInput("gaussian_vector: scale must be finite and >= 0");
    if (dim < 0) throw InvalidInput("gaussian_vector: dim must be >= 0");
    Eigen::VectorXd out(dim);
    for (Eigen::Index i = 0; i < dim; i += 2) {
        const auto [z0, z1] = rng.next_normal_pair();
        out[i] = scale * z0;
        if (i + 1 < dim) out[i + 1] = scale * z1;
    }
    return out;
}

}  // namespace itin
