#include "perfdyn/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "perfdyn/equilibrium.hpp"

namespace perfdyn {

LearningRates::LearningRates(Vector eta) : eta_(std::move(eta)) {
  if (eta_.size() < 1) throw ValidationError("learning rates: empty");
  for (Eigen::Index i = 0; i < eta_.size(); ++i) {
    if (!(eta_(i) > 0.0) || !std::isfinite(eta_(i))) {
      throw ValidationError("learning rates: eta[" + std::to_string(i) + "] must be positive");
    }
  }
}

namespace {

void require_rates(const MarketSpec& spec, const LearningRates& rates) {
  if (rates.agents() != spec.n()) {
    throw ValidationError("learning rates: expected " + std::to_string(spec.n()) + " entries, got " +
                          std::to_string(rates.agents()));
  }
}

}  // namespace

StepDiagnostics diagnose(const MarketSpec& spec, const ModelProfile& profile) {
  StepDiagnostics out;
  out.potential = potential(spec, profile);
  out.xi_l1 = xi(spec, profile).cwiseAbs().sum();
  out.agent_loss.resize(spec.n());
  for (int i = 0; i < spec.n(); ++i) {
    out.agent_loss(i) = decoupled_loss(spec, profile, profile.agent(i));
  }
  out.total_loss = out.agent_loss.sum();
  return out;
}

TrajectoryRecorder::TrajectoryRecorder(const MarketSpec& spec, TrajectoryOptions options)
    : spec_(spec), options_(std::move(options)) {}

void TrajectoryRecorder::record(double time, const ModelProfile& state) {
  StepDiagnostics diag = diagnose(spec_, state);
  const std::size_t index = traj_.times.size();
  if (options_.sink) options_.sink(index, time, state, diag);
  const std::size_t per_state = static_cast<std::size_t>(state.agents()) * state.dim();
  if (!traj_.states_truncated && (traj_.states.size() + 1) * per_state <= options_.max_stored_scalars) {
    traj_.states.push_back(state);
  } else {
    traj_.states_truncated = true;
  }
  if (index == 0) traj_.boundary_start = !state.interior();
  traj_.times.push_back(time);
  traj_.diagnostics.push_back(std::move(diag));
  traj_.final_state = state;
}

Trajectory TrajectoryRecorder::finish() && { return std::move(traj_); }

ModelProfile eg_step_with_gradients(const ModelProfile& profile, const Matrix& grads,
                                    const LearningRates& rates) {
  const int n = profile.agents();
  const int d = profile.dim();
  if (grads.rows() != n || grads.cols() != d || rates.agents() != n) {
    throw ValidationError("eg_step: gradient or rate dimensions do not match the profile");
  }
  if (!grads.allFinite()) throw NumericalError("eg_step: non-finite gradient");
  Matrix next(n, d);
  for (int i = 0; i < n; ++i) {
    const double eta = rates.eta()(i);
    // Shift the exponents by their maximum; the update is invariant to it.
    double shift = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < d; ++k) {
      if (profile(i, k) > 0.0) shift = std::max(shift, -eta * grads(i, k));
    }
    double denom = 0.0;
    for (int k = 0; k < d; ++k) {
      const double w = profile(i, k) > 0.0 ? profile(i, k) * std::exp(-eta * grads(i, k) - shift) : 0.0;
      next(i, k) = w;
      denom += w;
    }
    next.row(i) /= denom;
  }
  return ModelProfile(std::move(next));
}

ModelProfile eg_step(const MarketSpec& spec, const ModelProfile& profile, const LearningRates& rates) {
  require_rates(spec, rates);
  return eg_step_with_gradients(profile, grad_profile(spec, profile).grads, rates);
}

Trajectory simulate(const MarketSpec& spec, const ModelProfile& initial, const LearningRates& rates,
                    long T, TrajectoryOptions options) {
  require_compatible(spec, initial);
  require_rates(spec, rates);
  if (T < 1) throw ValidationError("simulate: T must be >= 1");
  TrajectoryRecorder rec(spec, std::move(options));
  rec.record(0.0, initial);
  ModelProfile state = initial;
  for (long t = 1; t <= T; ++t) {
    try {
      state = eg_step(spec, state, rates);
    } catch (const NumericalError& e) {
      throw DivergenceError(e.what(), t);
    } catch (const ValidationError& e) {
      throw DivergenceError(std::string("simulate: invalid state: ") + e.what(), t);
    }
    rec.record(static_cast<double>(t), state);
  }
  return std::move(rec).finish();
}

Matrix ode_rhs(const MarketSpec& spec, const ModelProfile& profile, const LearningRates& rates) {
  require_rates(spec, rates);
  const Vector weight = rates.eta() / rates.eta().sum();
  return weight.asDiagonal() * xi(spec, profile);
}

namespace {

// rhs evaluated on an unconstrained matrix (intermediate RK stages need not
// lie exactly on the simplex).
Matrix raw_rhs(const MarketSpec& spec, const Matrix& theta, const Vector& weight) {
  const Vector s = theta.transpose() * spec.lambda();
  const Vector shared = 2.0 * spec.A() * s - 2.0 * spec.b();
  Matrix grads = 2.0 * theta * spec.A();
  grads.rowwise() += shared.transpose();
  const Vector avg = (theta.array() * grads.array()).rowwise().sum();
  Matrix centered = (-grads).colwise() + avg;
  return weight.asDiagonal() * theta.cwiseProduct(centered);
}

}  // namespace

Trajectory integrate_ode(const MarketSpec& spec, const ModelProfile& initial,
                         const LearningRates& rates, double t_end, double dt, OdeOptions options) {
  require_compatible(spec, initial);
  require_rates(spec, rates);
  if (!(dt > 0.0) || !(t_end >= dt)) throw ValidationError("integrate_ode: need dt > 0 and t_end >= dt");
  if (options.record_every < 1) throw ValidationError("integrate_ode: record_every must be >= 1");
  const Vector weight = rates.eta() / rates.eta().sum();
  const long steps = std::lround(t_end / dt);

  TrajectoryRecorder rec(spec, std::move(options.trajectory));
  rec.record(0.0, initial);
  Matrix theta = initial.matrix();
  for (long s = 1; s <= steps; ++s) {
    const Matrix k1 = raw_rhs(spec, theta, weight);
    const Matrix k2 = raw_rhs(spec, theta + 0.5 * dt * k1, weight);
    const Matrix k3 = raw_rhs(spec, theta + 0.5 * dt * k2, weight);
    const Matrix k4 = raw_rhs(spec, theta + dt * k3, weight);
    theta += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!theta.allFinite()) throw DivergenceError("integrate_ode: non-finite state", s);
    const Vector sums = theta.rowwise().sum();
    if ((sums.array() - 1.0).abs().maxCoeff() > options.drift_tolerance) {
      throw DivergenceError("integrate_ode: row sum drifted from 1; dt too large", s);
    }
    if ((theta.array() < 0.0).any()) {
      throw DivergenceError("integrate_ode: negative coordinate; dt too large", s);
    }
    theta = sums.cwiseInverse().asDiagonal() * theta;
    if (s % options.record_every == 0 || s == steps) rec.record(s * dt, ModelProfile(theta));
  }
  return std::move(rec).finish();
}

Matrix discretization_error(const MarketSpec& spec, const ModelProfile& profile,
                            const LearningRates& rates) {
  require_rates(spec, rates);
  const GradProfile gp = grad_profile(spec, profile);
  const Matrix x = xi(profile, gp);
  const int n = spec.n();
  const int d = spec.d();
  Matrix e(n, d);
  for (int i = 0; i < n; ++i) {
    const double eta = rates.eta()(i);
    double denom = 0.0;
    for (int l = 0; l < d; ++l) denom += profile(i, l) * std::exp(eta * (gp.average(i) - gp.grads(i, l)));
    for (int k = 0; k < d; ++k) {
      const double updated = profile(i, k) * std::exp(eta * (gp.average(i) - gp.grads(i, k))) / denom;
      e(i, k) = (updated - profile(i, k) - eta * x(i, k)) / (eta * eta);
    }
  }
  return e;
}

}  // namespace perfdyn
