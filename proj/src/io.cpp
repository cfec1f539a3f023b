#include "perfdyn/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace perfdyn {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

const std::set<std::string> kMarketKeys = {"d", "n", "lambda", "theta0", "A", "c", "sigma0_sq"};

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ValidationError(where + ": unknown key '" + key + "'");
  }
}

double get_number(const Json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + ": missing key '" + key + "'");
  if (!j.at(key).is_number()) throw ValidationError(where + ": key '" + key + "' must be a number");
  return j.at(key).get<double>();
}

long get_integer(const Json& j, const std::string& key, const std::string& where) {
  if (!j.at(key).is_number_integer()) throw ValidationError(where + ": key '" + key + "' must be an integer");
  return j.at(key).get<long>();
}

bool get_bool(const Json& j, const std::string& key, const std::string& where) {
  if (!j.at(key).is_boolean()) throw ValidationError(where + ": key '" + key + "' must be a boolean");
  return j.at(key).get<bool>();
}

Vector get_vector(const Json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + ": missing key '" + key + "'");
  const Json& a = j.at(key);
  if (!a.is_array()) throw ValidationError(where + ": key '" + key + "' must be a list");
  Vector out(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!a[k].is_number()) throw ValidationError(where + ": '" + key + "' must contain numbers");
    out(static_cast<Eigen::Index>(k)) = a[k].get<double>();
  }
  return out;
}

template <class T>
void maybe(const Json& j, const std::string& key, T& target, const std::string& where) {
  if (!j.contains(key)) return;
  if constexpr (std::is_same_v<T, double>) {
    target = get_number(j, key, where);
  } else if constexpr (std::is_same_v<T, bool>) {
    target = get_bool(j, key, where);
  } else {
    target = static_cast<T>(get_integer(j, key, where));
  }
}

// A scalar is replicated to all n agents; a list must have n entries.
Vector parse_rates(const Json& j, int n, const std::string& where) {
  if (!j.contains("eta")) throw ValidationError(where + ": missing key 'eta'");
  const Json& e = j.at("eta");
  Vector eta = e.is_number() ? Vector::Constant(n, e.get<double>()) : get_vector(j, "eta", where);
  if (eta.size() != n) throw ValidationError(where + ": 'eta' must have n entries");
  LearningRates check(eta);
  return eta;
}

// A flat list of d numbers is replicated to all agents; otherwise n lists.
std::optional<Matrix> parse_initial(const Json& j, int n, int d, const std::string& where) {
  if (!j.contains("initial")) return std::nullopt;
  const Json& a = j.at("initial");
  if (!a.is_array() || a.empty()) throw ValidationError(where + ": 'initial' must be a non-empty list");
  Matrix out(n, d);
  if (a[0].is_number()) {
    const Vector row = get_vector(j, "initial", where);
    if (row.size() != d) throw ValidationError(where + ": 'initial' must have d entries");
    for (int i = 0; i < n; ++i) out.row(i) = row.transpose();
  } else {
    if (static_cast<int>(a.size()) != n) throw ValidationError(where + ": 'initial' must have n rows");
    for (int i = 0; i < n; ++i) {
      if (!a[i].is_array() || static_cast<int>(a[i].size()) != d) {
        throw ValidationError(where + ": each 'initial' row must have d numbers");
      }
      for (int k = 0; k < d; ++k) out(i, k) = a[i][k].get<double>();
    }
  }
  ModelProfile check(out);
  return out;
}

std::vector<double> parse_grid(const Json& j, const std::string& where) {
  if (j.contains("L_grid")) {
    const Vector g = get_vector(j, "L_grid", where);
    return {g.data(), g.data() + g.size()};
  }
  if (!j.contains("L_min") || !j.contains("L_max") || !j.contains("points")) {
    throw ValidationError(where + ": need 'L_grid' or 'L_min', 'L_max', 'points'");
  }
  const double lo = get_number(j, "L_min", where);
  const double hi = get_number(j, "L_max", where);
  const long points = get_integer(j, "points", where);
  if (points < 2 || !(lo < hi)) throw ValidationError(where + ": need points >= 2 and L_min < L_max");
  std::vector<double> grid(points);
  for (long p = 0; p < points; ++p) grid[p] = lo + (hi - lo) * static_cast<double>(p) / (points - 1);
  return grid;
}

void require_positive(long value, const char* key, const std::string& where) {
  if (value < 1) throw ValidationError(where + ": '" + key + "' must be >= 1");
}

}  // namespace

MarketSpec market_from_json(const Json& j) {
  const std::string where = "market";
  reject_unknown(j, kMarketKeys, where);
  const long d = get_integer(j, "d", where);
  const long n = get_integer(j, "n", where);
  const Vector lambda = get_vector(j, "lambda", where);
  const Vector theta0 = get_vector(j, "theta0", where);
  const Vector a = get_vector(j, "A", where);
  Vector c = j.contains("c") ? get_vector(j, "c", where) : Vector::Zero(d);
  const double sigma0_sq = j.contains("sigma0_sq") ? get_number(j, "sigma0_sq", where) : 1.0;
  if (d < 2) throw ValidationError("market: d must be >= 2");
  if (n < 1) throw ValidationError("market: n must be >= 1");
  if (lambda.size() != n) throw ValidationError("market: 'lambda' must have n entries");
  if (theta0.size() != d) throw ValidationError("market: 'theta0' must have d entries");
  if (a.size() != d * d) throw ValidationError("market: 'A' must have d*d entries (row-major)");
  if (c.size() != d) throw ValidationError("market: 'c' must have d entries");
  Matrix A(d, d);
  for (long r = 0; r < d; ++r) {
    for (long col = 0; col < d; ++col) A(r, col) = a(r * d + col);
  }
  return MarketSpec(lambda, theta0, std::move(A), std::move(c), sigma0_sq);
}

Json market_to_json(const MarketSpec& spec) {
  auto list = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  std::vector<double> a;
  for (int r = 0; r < spec.d(); ++r) {
    for (int c = 0; c < spec.d(); ++c) a.push_back(spec.A()(r, c));
  }
  Json j;
  j["d"] = spec.d();
  j["n"] = spec.n();
  j["lambda"] = list(spec.lambda());
  j["theta0"] = list(spec.theta0());
  j["A"] = a;
  j["c"] = list(spec.c());
  j["sigma0_sq"] = spec.sigma0_sq();
  return j;
}

namespace {

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError("'" + path + "': " + e.what());
  }
}

}  // namespace

MarketSpec load_market(const std::string& path) { return market_from_json(read_json(path)); }

void save_market(const MarketSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << market_to_json(spec).dump(2) << '\n';
}

namespace {

ExperimentConfig parse_config_at(const Json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ValidationError("config: expected an object");
  static const std::set<std::string> kSections = {"market_path", "stable_point", "simulate", "stochastic",
                                                  "ode",         "chaos",        "bifurcation"};
  Json market_json = Json::object();
  for (const auto& [key, value] : j.items()) {
    if (kMarketKeys.count(key)) {
      market_json[key] = value;
    } else if (!kSections.count(key)) {
      throw ValidationError("config: unknown key '" + key + "'");
    }
  }
  std::optional<MarketSpec> market;
  if (j.contains("market_path")) {
    if (!market_json.empty()) throw ValidationError("config: give either 'market_path' or inline market keys");
    if (!j.at("market_path").is_string()) throw ValidationError("config: 'market_path' must be a string");
    std::filesystem::path p = j.at("market_path").get<std::string>();
    if (p.is_relative()) p = base / p;
    market = load_market(p.string());
  } else {
    market = market_from_json(market_json);
  }
  ExperimentConfig cfg{*market, {}, {}, {}, {}, {}, {}};
  const int n = market->n();
  const int d = market->d();

  if (j.contains("stable_point")) {
    const std::string w = "stable_point";
    const Json& s = j.at(w);
    reject_unknown(s, {"tol", "max_iters", "R_eta"}, w);
    maybe(s, "tol", cfg.stable_point.tol, w);
    maybe(s, "max_iters", cfg.stable_point.max_iters, w);
    maybe(s, "R_eta", cfg.stable_point.R_eta, w);
    if (!(cfg.stable_point.tol > 0.0)) throw ValidationError(w + ": 'tol' must be positive");
    require_positive(cfg.stable_point.max_iters, "max_iters", w);
    if (!(cfg.stable_point.R_eta >= 1.0)) throw ValidationError(w + ": 'R_eta' must be >= 1");
  }
  if (j.contains("simulate")) {
    const std::string w = "simulate";
    const Json& s = j.at(w);
    reject_unknown(s, {"eta", "T", "initial"}, w);
    SimulateSection sec;
    sec.eta = parse_rates(s, n, w);
    maybe(s, "T", sec.T, w);
    require_positive(sec.T, "T", w);
    sec.initial = parse_initial(s, n, d, w);
    cfg.simulate = std::move(sec);
  }
  if (j.contains("stochastic")) {
    const std::string w = "stochastic";
    const Json& s = j.at(w);
    reject_unknown(s, {"eta", "T", "initial", "m", "seed", "runs", "shared_batch"}, w);
    StochasticSection sec;
    sec.eta = parse_rates(s, n, w);
    maybe(s, "T", sec.T, w);
    maybe(s, "m", sec.m, w);
    maybe(s, "runs", sec.runs, w);
    maybe(s, "shared_batch", sec.shared_batch, w);
    if (s.contains("seed")) {
      if (!s.at("seed").is_number_unsigned()) throw ValidationError(w + ": 'seed' must be a nonnegative integer");
      sec.seed = s.at("seed").get<std::uint64_t>();
    }
    require_positive(sec.T, "T", w);
    require_positive(sec.m, "m", w);
    require_positive(sec.runs, "runs", w);
    sec.initial = parse_initial(s, n, d, w);
    if (!(market->c().array() == 0.0).all()) throw ValidationError(w + ": sampling requires c = 0");
    cfg.stochastic = std::move(sec);
  }
  if (j.contains("ode")) {
    const std::string w = "ode";
    const Json& s = j.at(w);
    reject_unknown(s, {"eta", "t_end", "dt", "record_every", "initial"}, w);
    OdeSection sec;
    sec.eta = parse_rates(s, n, w);
    maybe(s, "t_end", sec.t_end, w);
    maybe(s, "dt", sec.dt, w);
    maybe(s, "record_every", sec.record_every, w);
    if (!(sec.dt > 0.0) || !(sec.t_end >= sec.dt)) throw ValidationError(w + ": need dt > 0 and t_end >= dt");
    require_positive(sec.record_every, "record_every", w);
    sec.initial = parse_initial(s, n, d, w);
    cfg.ode = std::move(sec);
  }
  if (j.contains("chaos")) {
    const std::string w = "chaos";
    const Json& s = j.at(w);
    reject_unknown(s, {"eta", "L", "certificate", "capacity", "L_min", "L_max", "tol", "lyapunov", "x0",
                       "burn_in", "iters", "bifurcation"},
                   w);
    ChaosSection sec;
    maybe(s, "eta", sec.eta, w);
    if (s.contains("L")) sec.L = get_number(s, "L", w);
    maybe(s, "certificate", sec.certificate, w);
    maybe(s, "capacity", sec.capacity, w);
    maybe(s, "L_min", sec.L_min, w);
    maybe(s, "L_max", sec.L_max, w);
    maybe(s, "tol", sec.tol, w);
    maybe(s, "lyapunov", sec.lyapunov, w);
    maybe(s, "x0", sec.x0, w);
    maybe(s, "burn_in", sec.burn_in, w);
    maybe(s, "iters", sec.iters, w);
    maybe(s, "bifurcation", sec.bifurcation, w);
    if (!(sec.eta > 0.0)) throw ValidationError(w + ": 'eta' must be positive");
    if (d != 2) throw ValidationError(w + ": requires d = 2");
    cfg.chaos = sec;
  }
  if (j.contains("bifurcation")) {
    const std::string w = "bifurcation";
    const Json& s = j.at(w);
    reject_unknown(s, {"eta", "L_grid", "L_min", "L_max", "points", "x0", "burn_in", "samples", "threads"}, w);
    BifurcationSection sec;
    maybe(s, "eta", sec.eta, w);
    sec.L_grid = parse_grid(s, w);
    maybe(s, "x0", sec.x0, w);
    maybe(s, "burn_in", sec.burn_in, w);
    maybe(s, "samples", sec.samples, w);
    maybe(s, "threads", sec.threads, w);
    if (!(sec.eta > 0.0)) throw ValidationError(w + ": 'eta' must be positive");
    require_positive(sec.samples, "samples", w);
    if (d != 2) throw ValidationError(w + ": requires d = 2");
    cfg.bifurcation = std::move(sec);
  }
  return cfg;
}

}  // namespace

ExperimentConfig parse_config(const Json& j) { return parse_config_at(j, std::filesystem::current_path()); }

ExperimentConfig load_config(const std::string& path) {
  return parse_config_at(read_json(path), std::filesystem::path(path).parent_path());
}

void Report::add(const std::string& key, double value) { entries_.emplace_back(key, format_double(value)); }
void Report::add(const std::string& key, long value) { entries_.emplace_back(key, std::to_string(value)); }
void Report::add(const std::string& key, bool value) { entries_.emplace_back(key, value ? "true" : "false"); }
void Report::add(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }

std::optional<std::string> Report::find(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::string Report::render() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
  return out.str();
}

Report stable_point_report(const StablePointResult& result, bool stable, bool optimal) {
  Report r;
  const ModelProfile& star = result.theta_star;
  for (int i = 0; i < star.agents(); ++i) {
    for (int k = 0; k < star.dim(); ++k) {
      r.add("theta_star[" + std::to_string(i) + "][" + std::to_string(k) + "]", star(i, k));
    }
  }
  r.add("kkt_residual", result.kkt_residual);
  for (std::size_t i = 0; i < result.supports.size(); ++i) {
    std::string s;
    for (int k : result.supports[i]) s += (s.empty() ? "" : " ") + std::to_string(k);
    r.add("support[" + std::to_string(i) + "]", s);
  }
  r.add("proper", result.proper);
  r.add("potential", result.potential_value);
  r.add("iterations", result.iterations);
  r.add("stable", stable);
  r.add("optimal", optimal);
  return r;
}

void append_safe_rate(Report& r, const SafeRateReport& s) {
  r.add("C1", s.C1);
  r.add("C2", s.C2);
  r.add("C3", s.C3);
  r.add("C4", s.C4);
  r.add("max_abs_gradient", s.max_abs_gradient);
  r.add("xi_l1_bound", s.xi_l1_bound);
  r.add("gradient_l1_bound", s.gradient_l1_bound);
  r.add("eta_bound_gradient", s.eta_bound_gradient);
  r.add("eta_bound_xi", s.eta_bound_xi);
  r.add("eta_bound_descent", s.eta_bound_descent);
  r.add("R_eta", s.R_eta);
  r.add("eta_star", s.eta_star);
}

Report certificate_report(const Period3Outcome& outcome, bool permuted) {
  Report r;
  r.add("permuted", permuted);
  if (const auto* cert = std::get_if<Period3Certificate>(&outcome)) {
    r.add("certified", true);
    r.add("u", cert->params.u);
    r.add("v", cert->params.v);
    r.add("x0", cert->x0);
    r.add("x1", cert->x1);
    r.add("x2", cert->x2);
    r.add("x3", cert->x3);
    r.add("margin_x0_minus_x3", cert->margin_x0_x3);
    r.add("margin_x1_minus_x0", cert->margin_x1_x0);
    r.add("residual_f_x0_minus_x1", cert->residual);
  } else {
    const auto& fail = std::get<Period3Failure>(outcome);
    r.add("certified", false);
    const char* name = fail.violation == Period3Violation::LeftBracket    ? "left_bracket"
                       : fail.violation == Period3Violation::RightBracket ? "right_bracket"
                                                                          : "ordering";
    r.add("violation", name);
    r.add("reason", fail.reason);
  }
  return r;
}

void write_profile_csv(std::ostream& out, const ModelProfile& profile) {
  out << "agent,coordinate,value\n";
  for (int i = 0; i < profile.agents(); ++i) {
    for (int k = 0; k < profile.dim(); ++k) out << i << ',' << k << ',' << format_double(profile(i, k)) << '\n';
  }
}

void write_trajectory_header(std::ostream& out, bool stochastic) {
  out << "t,agent,coord,theta,phi,xi_l1,loss_agent,loss_total";
  if (stochastic) out << ",seed,m";
  out << '\n';
}

void write_trajectory_rows(std::ostream& out, double time, const ModelProfile& state,
                           const StepDiagnostics& diag, std::optional<StochasticTag> tag) {
  const std::string t = format_double(time);
  const std::string phi = format_double(diag.potential);
  const std::string xl1 = format_double(diag.xi_l1);
  const std::string total = format_double(diag.total_loss);
  for (int i = 0; i < state.agents(); ++i) {
    const std::string loss = format_double(diag.agent_loss(i));
    for (int k = 0; k < state.dim(); ++k) {
      out << t << ',' << i << ',' << k << ',' << format_double(state(i, k)) << ',' << phi << ',' << xl1 << ','
          << loss << ',' << total;
      if (tag) out << ',' << tag->seed << ',' << tag->m;
      out << '\n';
    }
  }
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, std::optional<StochasticTag> tag) {
  if (traj.states_truncated) {
    throw ValidationError("write_trajectory_csv: states were truncated; stream them through a sink instead");
  }
  write_trajectory_header(out, tag.has_value());
  for (std::size_t s = 0; s < traj.size(); ++s) {
    write_trajectory_rows(out, traj.times[s], traj.states[s], traj.diagnostics[s], tag);
  }
}

void write_bifurcation_csv(std::ostream& out, const std::vector<BifurcationRow>& rows) {
  out << "L,alpha,beta,sample_index,x,lyapunov\n";
  for (const auto& r : rows) {
    out << format_double(r.L) << ',' << format_double(r.alpha) << ',' << format_double(r.beta) << ','
        << r.sample_index << ',' << format_double(r.x) << ',' << format_double(r.lyapunov) << '\n';
  }
}

}  // namespace perfdyn
