#include "mkest/random.hpp"

#include <algorithm>
#include <cmath>

namespace mkest {

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    const std::uint64_t a = mix64(seed);
    const std::uint64_t b = mix64(a ^ mix64(stream + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(make_engine(seed, stream)) {}

RandomStream RandomStream::split(std::uint64_t child) const {
    return RandomStream(mix64(seed_ ^ mix64(stream_)), child);
}

double RandomStream::uniform() {
    // 53 random bits, shifted off zero.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(*this);
}

double RandomStream::gamma(double shape) {
    if (shape < 1.0) return std::exp(log_gamma(shape));
    std::gamma_distribution<double> dist(shape, 1.0);
    return dist(*this);
}

double RandomStream::log_gamma(double shape) {
    if (shape >= 1.0) {
        std::gamma_distribution<double> dist(shape, 1.0);
        return std::log(dist(*this));
    }
    std::gamma_distribution<double> dist(shape + 1.0, 1.0);
    const double g = dist(*this);
    return std::log(g) + std::log(uniform()) / shape;
}

double RandomStream::beta(double a, double b) {
    const double la = log_gamma(a);
    const double lb = log_gamma(b);
    // x = ga / (ga + gb), evaluated without overflow for tiny shapes
    const double m = std::max(la, lb);
    const double ea = std::exp(la - m);
    const double eb = std::exp(lb - m);
    return ea / (ea + eb);
}

bool RandomStream::bernoulli(double p) { return uniform() < p; }

std::int64_t RandomStream::uniform_int(std::int64_t lo, std::int64_t hi) {
    std::uniform_int_distribution<std::int64_t> dist(lo, hi);
    return dist(*this);
}

}  // namespace mkest
