#pragma once

#include <cstdint>
#include <random>

namespace mkest {

/// Reproducible random stream identified by (seed, stream id).
///
/// Each MCMC chain owns one stream; chain c of a run seeded with s uses
/// stream (s, c), so traces do not depend on how chains are scheduled.
/// Satisfies UniformRandomBitGenerator and can feed std distributions.
class RandomStream {
public:
    using result_type = std::mt19937_64::result_type;

    explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0);

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Child stream keyed on this stream's identity; does not advance *this.
    RandomStream split(std::uint64_t child) const;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

    /// Uniform on the open interval (0, 1).
    double uniform();
    double normal();
    /// Gamma(shape, 1). Shapes below 1 go through the boost identity
    /// G(a) = G(a + 1) * U^(1/a), returned on the log scale by log_gamma().
    double gamma(double shape);
    double log_gamma(double shape);
    double beta(double a, double b);
    bool bernoulli(double p);
    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive well-separated seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace mkest
