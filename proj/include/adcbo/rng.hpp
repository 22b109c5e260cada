#pragma once

#include <cstdint>
#include <random>

namespace adcbo {

/// SplitMix64 finalizer. Used both to derive replication seeds and to
/// decorrelate nearby user seeds before they reach the Mersenne Twister.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for replication `index` of a batch with master seed `master`:
///   seed_i = mix64(master ^ mix64(index)).
/// The inner mix keeps consecutive indices far apart in seed space.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master,
                                                  std::uint64_t index) noexcept {
    return mix64(master ^ mix64(index));
}

/// Seeded variate stream. Copying a handle forks the stream: both copies
/// produce the same variates from that point on.
class RngHandle {
public:
    explicit RngHandle(std::uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {}

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    /// N(mean, stddev^2) variate.
    double normal(double mean = 0.0, double stddev = 1.0) {
        return mean + stddev * normal_(engine_);
    }

    /// Uniform on [lo, hi).
    double uniform(double lo = 0.0, double hi = 1.0) {
        return lo + (hi - lo) * uniform_(engine_);
    }

    /// Exp(1) variate, used for Dirichlet(1, ..., 1) sampling.
    double exponential() { return exponential_(engine_); }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::exponential_distribution<double> exponential_{1.0};
};

}  // namespace adcbo
