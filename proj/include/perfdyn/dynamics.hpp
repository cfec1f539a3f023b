#pragma once

// Exponentiated-gradient dynamics, their continuous-time limit, and
// trajectory bookkeeping.

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "perfdyn/model.hpp"

namespace perfdyn {

/// Per-agent step sizes, all strictly positive.
class LearningRates {
 public:
  explicit LearningRates(Vector eta);
  static LearningRates uniform(int n, double eta) { return LearningRates(Vector::Constant(n, eta)); }

  const Vector& eta() const noexcept { return eta_; }
  int agents() const noexcept { return static_cast<int>(eta_.size()); }
  double max() const { return eta_.maxCoeff(); }
  /// max eta / min eta
  double ratio() const { return eta_.maxCoeff() / eta_.minCoeff(); }

 private:
  Vector eta_;
};

struct StepDiagnostics {
  double potential = 0.0;
  double xi_l1 = 0.0;
  Vector agent_loss;  // decoupled_loss(theta, theta^i)
  double total_loss = 0.0;
};

StepDiagnostics diagnose(const MarketSpec& spec, const ModelProfile& profile);

/// Receives every state as it is produced, including those not retained.
using StateSink = std::function<void(std::size_t index, double time, const ModelProfile& state,
                                     const StepDiagnostics& diag)>;

struct TrajectoryOptions {
  /// States are retained while n * d * (stored states) stays under this cap;
  /// past it only diagnostics are kept and states go to the sink.
  std::size_t max_stored_scalars = 10'000'000;
  StateSink sink;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<ModelProfile> states;  // may be shorter than times when truncated
  std::vector<StepDiagnostics> diagnostics;
  std::optional<ModelProfile> final_state;
  bool states_truncated = false;
  bool boundary_start = false;  // initial profile had a zero coordinate

  std::size_t size() const noexcept { return times.size(); }
  const ModelProfile& last() const { return *final_state; }
};

/// Incrementally builds a Trajectory under the storage cap.
class TrajectoryRecorder {
 public:
  TrajectoryRecorder(const MarketSpec& spec, TrajectoryOptions options);

  void record(double time, const ModelProfile& state);
  Trajectory finish() &&;
  Trajectory& trajectory() noexcept { return traj_; }

 private:
  const MarketSpec& spec_;
  TrajectoryOptions options_;
  Trajectory traj_;
};

/// One round of the multiplicative update
///   theta^i_k <- theta^i_k exp(-eta_i g^i_k) / sum_l theta^i_l exp(-eta_i g^i_l).
ModelProfile eg_step(const MarketSpec& spec, const ModelProfile& profile, const LearningRates& rates);

/// Same update with externally supplied gradients (n x d).
ModelProfile eg_step_with_gradients(const ModelProfile& profile, const Matrix& grads,
                                    const LearningRates& rates);

/// T rounds of eg_step; T + 1 states.
Trajectory simulate(const MarketSpec& spec, const ModelProfile& initial, const LearningRates& rates,
                    long T, TrajectoryOptions options = {});

/// (eta_i / ||eta||_1) xi^i_k.
Matrix ode_rhs(const MarketSpec& spec, const ModelProfile& profile, const LearningRates& rates);

struct OdeOptions {
  long record_every = 1;
  double drift_tolerance = 1e-6;
  TrajectoryOptions trajectory;
};

/// Classical fixed-step RK4 on the replicator-type ODE, renormalizing each
/// row after every step.
Trajectory integrate_ode(const MarketSpec& spec, const ModelProfile& initial,
                         const LearningRates& rates, double t_end, double dt,
                         OdeOptions options = {});

/// Second-order remainder e with eg_step(theta) = theta + eta xi + eta^2 e.
Matrix discretization_error(const MarketSpec& spec, const ModelProfile& profile,
                            const LearningRates& rates);

}  // namespace perfdyn
