#include "perfdyn/stochastic.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace perfdyn {

double CounterRng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

SampleBatch sample_batch(const MarketSpec& spec, const ModelProfile& profile, long m, std::uint64_t seed) {
  if (m < 1) throw ValidationError("sample_batch: m must be >= 1");
  if (!(spec.c().array() == 0.0).all()) {
    throw ValidationError("sample_batch: sampling requires c = 0 (noise independent of features)");
  }
  const Vector w = effective_outcome_weights(spec, profile);
  const int d = spec.d();
  const Matrix& chol = spec.cholesky_factor();
  const double noise_sd = std::sqrt(spec.sigma0_sq());

  SampleBatch batch;
  batch.seed = seed;
  batch.m = m;
  batch.features.resize(m, d);
  batch.outcomes.resize(m);
  CounterRng rng(seed);
  Vector z(d);
  for (long j = 0; j < m; ++j) {
    for (int k = 0; k < d; ++k) z(k) = rng.normal();
    const Vector x = chol * z;
    batch.features.row(j) = x.transpose();
    batch.outcomes(j) = w.dot(x) + noise_sd * rng.normal();
  }
  return batch;
}

EmpiricalMoments empirical_moments(const SampleBatch& batch) {
  if (batch.m < 1 || batch.features.rows() < 1) throw ValidationError("empirical_moments: empty batch");
  const double m = static_cast<double>(batch.features.rows());
  EmpiricalMoments out;
  out.A_hat = batch.features.transpose() * batch.features / m;
  out.A_hat = 0.5 * (out.A_hat + out.A_hat.transpose());
  out.xy_mean = batch.features.transpose() * batch.outcomes / m;
  return out;
}

Vector empirical_gradient(const SampleBatch& batch, const Eigen::Ref<const Vector>& predictive) {
  const Eigen::Index m = batch.features.rows();
  if (m < 1) throw ValidationError("empirical_gradient: empty batch");
  if (predictive.size() != batch.features.cols()) throw ValidationError("empirical_gradient: dimension mismatch");
  Vector g = Vector::Zero(predictive.size());
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto x = batch.features.row(j);
    const double residual = x.dot(predictive) - batch.outcomes(j);
    g += 2.0 * residual * x.transpose();
  }
  return g / static_cast<double>(m);
}

std::uint64_t batch_seed(std::uint64_t seed, long step, int agent, bool shared) {
  return derive_seed(seed, static_cast<std::uint64_t>(step), shared ? 0u : static_cast<std::uint64_t>(agent));
}

Matrix stochastic_gradients(const MarketSpec& spec, const ModelProfile& profile, long m,
                            std::uint64_t seed, long step, bool shared) {
  require_compatible(spec, profile);
  Matrix grads(spec.n(), spec.d());
  std::optional<SampleBatch> common;
  if (shared) common = sample_batch(spec, profile, m, batch_seed(seed, step, 0, true));
  for (int i = 0; i < spec.n(); ++i) {
    const Vector theta = profile.matrix().row(i).transpose();
    if (shared) {
      grads.row(i) = empirical_gradient(*common, theta).transpose();
    } else {
      const SampleBatch batch = sample_batch(spec, profile, m, batch_seed(seed, step, i, false));
      grads.row(i) = empirical_gradient(batch, theta).transpose();
    }
  }
  return grads;
}

ModelProfile stochastic_eg_step(const MarketSpec& spec, const ModelProfile& profile,
                                const LearningRates& rates, long m, std::uint64_t seed, long step,
                                bool shared) {
  if (rates.agents() != spec.n()) throw ValidationError("stochastic_eg_step: rate count != n");
  return eg_step_with_gradients(profile, stochastic_gradients(spec, profile, m, seed, step, shared), rates);
}

Trajectory stochastic_simulate(const MarketSpec& spec, const ModelProfile& initial,
                               const LearningRates& rates, long T, long m, std::uint64_t seed,
                               StochasticOptions options) {
  require_compatible(spec, initial);
  if (T < 1) throw ValidationError("stochastic_simulate: T must be >= 1");
  if (m < 1) throw ValidationError("stochastic_simulate: m must be >= 1");
  if (rates.agents() != spec.n()) throw ValidationError("stochastic_simulate: rate count != n");
  TrajectoryRecorder rec(spec, std::move(options.trajectory));
  rec.record(0.0, initial);
  ModelProfile state = initial;
  for (long t = 1; t <= T; ++t) {
    try {
      state = stochastic_eg_step(spec, state, rates, m, seed, t - 1, options.shared_batch);
    } catch (const NumericalError& e) {
      throw DivergenceError(e.what(), t);
    }
    rec.record(static_cast<double>(t), state);
  }
  return std::move(rec).finish();
}

}  // namespace perfdyn
