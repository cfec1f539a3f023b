#pragma once

// Gaussian instantiation of the distribution map and the sampled-gradient
// variant of the exponentiated-gradient dynamics.
//
// Sampling model: x ~ N(0, A), x0 ~ N(0, sigma0^2) independent of x (so the
// spec must have c = 0), y = <theta0 - sum_i lambda_i theta^i, x> + x0.

#include <cstdint>

#include "perfdyn/dynamics.hpp"
#include "perfdyn/model.hpp"

namespace perfdyn {

/// SplitMix64 finalizer: a bijective 64-bit mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// child = mix(mix(mix(seed) ^ step) ^ agent), with step and agent each
/// pre-multiplied by distinct odd constants.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t step, std::uint64_t agent) noexcept {
  return mix64(mix64(mix64(seed) ^ (step * 0x9e3779b97f4a7c15ULL)) ^ (agent * 0xd1b54a32d192ed03ULL));
}

/// Counter-based generator: the i-th draw is mix64(key + (i + 1) * golden),
/// so any draw can be reproduced from (key, i) alone.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(mix64(key)), counter_(counter) {}

  std::uint64_t next() noexcept { return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct SampleBatch {
  Matrix features;  // m x d
  Vector outcomes;  // m
  std::uint64_t seed = 0;
  long m = 0;
};

/// Throws ValidationError when c != 0 or m < 1.
SampleBatch sample_batch(const MarketSpec& spec, const ModelProfile& profile, long m, std::uint64_t seed);

struct EmpiricalMoments {
  Matrix A_hat;    // (1/m) sum x x^T
  Vector xy_mean;  // (1/m) sum y x
};

EmpiricalMoments empirical_moments(const SampleBatch& batch);

/// (2/m) sum_j (<theta', x_j> - y_j) x_j, accumulated per sample.
Vector empirical_gradient(const SampleBatch& batch, const Eigen::Ref<const Vector>& predictive);

struct StochasticOptions {
  /// All agents use one batch per step instead of independent ones.
  bool shared_batch = false;
  TrajectoryOptions trajectory;
};

/// Seed of the batch agent `agent` draws at round `step`; the shared-batch
/// mode uses agent index 0 for everyone.
std::uint64_t batch_seed(std::uint64_t seed, long step, int agent, bool shared);

/// Sampled empirical gradients for every agent at one round.
Matrix stochastic_gradients(const MarketSpec& spec, const ModelProfile& profile, long m,
                            std::uint64_t seed, long step = 0, bool shared = false);

ModelProfile stochastic_eg_step(const MarketSpec& spec, const ModelProfile& profile,
                                const LearningRates& rates, long m, std::uint64_t seed,
                                long step = 0, bool shared = false);

/// T rounds; round t (1-based) uses step index t - 1 for seed derivation.
Trajectory stochastic_simulate(const MarketSpec& spec, const ModelProfile& initial,
                               const LearningRates& rates, long T, long m, std::uint64_t seed,
                               StochasticOptions options = {});

}  // namespace perfdyn
