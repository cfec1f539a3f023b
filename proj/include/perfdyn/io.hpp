#pragma once

// Config ingestion and report / CSV emission.
//
// A config is a JSON object holding the market keys
//   d, n, lambda, theta0, A (row-major, d*d), c, sigma0_sq
// at the top level, plus optional per-command sections.  Unknown keys are
// rejected with the offending key named.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "perfdyn/chaos.hpp"
#include "perfdyn/dynamics.hpp"
#include "perfdyn/equilibrium.hpp"
#include "perfdyn/model.hpp"

namespace perfdyn {

using Json = nlohmann::json;

/// 17 significant digits; round-trips every finite double.
std::string format_double(double x);

MarketSpec market_from_json(const Json& j);
Json market_to_json(const MarketSpec& spec);
MarketSpec load_market(const std::string& path);
void save_market(const MarketSpec& spec, const std::string& path);

struct StablePointSection {
  double tol = 1e-10;
  long max_iters = 2'000'000;
  double R_eta = 1.0;
};

struct SimulateSection {
  Vector eta;                          // empty until validated
  long T = 100;
  std::optional<Matrix> initial;       // n x d; defaults to uniform
};

struct StochasticSection {
  Vector eta;
  long T = 100;
  std::optional<Matrix> initial;
  long m = 10;
  std::uint64_t seed = 0;
  long runs = 1;                       // seeds seed, seed+1, ...
  bool shared_batch = false;
};

struct OdeSection {
  Vector eta;
  double t_end = 50.0;
  double dt = 1e-3;
  long record_every = 1;
  std::optional<Matrix> initial;
};

struct ChaosSection {
  double eta = 0.05;
  std::optional<double> L;             // defaults to sum(lambda)
  bool certificate = true;
  bool capacity = false;
  double L_min = 0.0;
  double L_max = 100.0;
  double tol = 1e-6;
  bool lyapunov = true;
  double x0 = 0.2;
  long burn_in = 1000;
  long iters = 10000;
  bool bifurcation = false;
};

struct BifurcationSection {
  double eta = 0.05;
  std::vector<double> L_grid;
  double x0 = 0.2;
  long burn_in = 1000;
  long samples = 100;
  unsigned threads = 1;
};

struct ExperimentConfig {
  MarketSpec market;
  StablePointSection stable_point;
  std::optional<SimulateSection> simulate;
  std::optional<StochasticSection> stochastic;
  std::optional<OdeSection> ode;
  std::optional<ChaosSection> chaos;
  std::optional<BifurcationSection> bifurcation;
};

/// Parses and validates a whole config; throws ValidationError.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::string& path);

/// Ordered flat key = value report.
class Report {
 public:
  void add(const std::string& key, double value);
  void add(const std::string& key, long value);
  void add(const std::string& key, int value) { add(key, static_cast<long>(value)); }
  void add(const std::string& key, bool value);
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, const char* value) { add(key, std::string(value)); }

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }
  std::optional<std::string> find(const std::string& key) const;
  std::string render() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

Report stable_point_report(const StablePointResult& result, bool stable, bool optimal);
void append_safe_rate(Report& report, const SafeRateReport& rates);
Report certificate_report(const Period3Outcome& outcome, bool permuted);

/// agent,coordinate,value
void write_profile_csv(std::ostream& out, const ModelProfile& profile);

struct StochasticTag {
  std::uint64_t seed;
  long m;
};

/// t,agent,coord,theta,phi,xi_l1,loss_agent,loss_total[,seed,m]
void write_trajectory_header(std::ostream& out, bool stochastic);
void write_trajectory_rows(std::ostream& out, double time, const ModelProfile& state,
                           const StepDiagnostics& diag, std::optional<StochasticTag> tag = std::nullopt);
void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                          std::optional<StochasticTag> tag = std::nullopt);

/// L,alpha,beta,sample_index,x,lyapunov
void write_bifurcation_csv(std::ostream& out, const std::vector<BifurcationRow>& rows);

}  // namespace perfdyn
