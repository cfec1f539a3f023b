#include "perfdyn/commands.hpp"

#include <ostream>

#include "perfdyn/stochastic.hpp"

namespace perfdyn {

namespace {

ModelProfile initial_profile(const ExperimentConfig& cfg, const std::optional<Matrix>& initial) {
  if (initial) return ModelProfile(*initial);
  return ModelProfile::uniform(cfg.market.n(), cfg.market.d());
}

template <class Section>
const Section& require_section(const std::optional<Section>& s, const char* name) {
  if (!s) throw ValidationError(std::string("config has no '") + name + "' section");
  return *s;
}

// Streams rows as they are produced and keeps only what the cap allows.
TrajectoryOptions streaming(std::ostream* csv, std::optional<StochasticTag> tag = std::nullopt) {
  TrajectoryOptions opts;
  if (csv) {
    opts.sink = [csv, tag](std::size_t, double time, const ModelProfile& state, const StepDiagnostics& diag) {
      write_trajectory_rows(*csv, time, state, diag, tag);
    };
  }
  return opts;
}

void summarize(Report& r, const Trajectory& traj) {
  const ModelProfile& last = traj.last();
  r.add("states", static_cast<long>(traj.size()));
  r.add("final_time", traj.times.back());
  for (int i = 0; i < last.agents(); ++i) {
    for (int k = 0; k < last.dim(); ++k) {
      r.add("final[" + std::to_string(i) + "][" + std::to_string(k) + "]", last(i, k));
    }
  }
  r.add("final_potential", traj.diagnostics.back().potential);
  r.add("final_total_loss", traj.diagnostics.back().total_loss);
  r.add("boundary_start", traj.boundary_start);
}

}  // namespace

Report cmd_stable_point(const ExperimentConfig& cfg, std::ostream* csv, const CommandOptions&) {
  const StablePointSection& s = cfg.stable_point;
  const StablePointResult result = find_stable_point(cfg.market, s.tol, s.max_iters);
  const StabilityCheck stable = check_stable(cfg.market, result.theta_star, s.tol);
  const bool optimal = check_optimal(cfg.market, result.theta_star, s.tol);
  Report r = stable_point_report(result, stable.stable, optimal);
  append_safe_rate(r, safe_learning_rate(cfg.market, result.theta_star, s.R_eta));
  r.add("hessian_min_eigenvalue", potential_hessian(cfg.market).min_eigenvalue);
  if (csv) write_profile_csv(*csv, result.theta_star);
  return r;
}

Report cmd_simulate(const ExperimentConfig& cfg, std::ostream* csv, const CommandOptions&) {
  const SimulateSection& s = require_section(cfg.simulate, "simulate");
  if (csv) write_trajectory_header(*csv, false);
  const Trajectory traj =
      simulate(cfg.market, initial_profile(cfg, s.initial), LearningRates(s.eta), s.T, streaming(csv));
  Report r;
  r.add("command", "simulate");
  r.add("T", s.T);
  summarize(r, traj);
  return r;
}

Report cmd_stochastic(const ExperimentConfig& cfg, std::ostream* csv, const CommandOptions& opts) {
  const StochasticSection& s = require_section(cfg.stochastic, "stochastic");
  const std::uint64_t base = opts.seed.value_or(s.seed);
  if (csv) write_trajectory_header(*csv, true);
  Report r;
  r.add("command", "stochastic");
  r.add("T", s.T);
  r.add("m", s.m);
  r.add("runs", s.runs);
  r.add("shared_batch", s.shared_batch);
  for (long run = 0; run < s.runs; ++run) {
    const std::uint64_t seed = base + static_cast<std::uint64_t>(run);
    StochasticOptions so;
    so.shared_batch = s.shared_batch;
    so.trajectory = streaming(csv, StochasticTag{seed, s.m});
    const Trajectory traj =
        stochastic_simulate(cfg.market, initial_profile(cfg, s.initial), LearningRates(s.eta), s.T, s.m, seed, so);
    const std::string prefix = "run[" + std::to_string(run) + "].";
    r.add(prefix + "seed", std::to_string(seed));
    const ModelProfile& last = traj.last();
    for (int i = 0; i < last.agents(); ++i) {
      for (int k = 0; k < last.dim(); ++k) {
        r.add(prefix + "final[" + std::to_string(i) + "][" + std::to_string(k) + "]", last(i, k));
      }
    }
  }
  return r;
}

Report cmd_ode(const ExperimentConfig& cfg, std::ostream* csv, const CommandOptions&) {
  const OdeSection& s = require_section(cfg.ode, "ode");
  if (csv) write_trajectory_header(*csv, false);
  OdeOptions oo;
  oo.record_every = s.record_every;
  oo.trajectory = streaming(csv);
  const Trajectory traj =
      integrate_ode(cfg.market, initial_profile(cfg, s.initial), LearningRates(s.eta), s.t_end, s.dt, oo);
  Report r;
  r.add("command", "ode");
  r.add("dt", s.dt);
  summarize(r, traj);
  return r;
}

Report cmd_chaos(const ExperimentConfig& cfg, std::ostream* csv, const CommandOptions&) {
  const ChaosSection& s = require_section(cfg.chaos, "chaos");
  const double L = s.L.value_or(cfg.market.total_influence());
  const ReducedMapParams p = alpha_beta(cfg.market, s.eta, L);
  Report r;
  r.add("command", "chaos");
  r.add("eta", s.eta);
  r.add("L", L);
  r.add("alpha", p.u);
  r.add("beta", p.v);
  r.add("beta_inf", p.origin->beta_inf);
  r.add("delta", p.origin->delta);
  r.add("li_yorke", "not certified");
  if (s.certificate) {
    if (p.u > 1.0 && p.v > 0.0 && p.v < 1.0) {
      // f_{u,1-v}(1 - x) = 1 - f_{u,v}(x): certify on the side with v < 1/2.
      const bool swap = p.v > 0.5;
      ReducedMapParams q = p;
      if (swap) q.v = 1.0 - p.v;
      const Period3Outcome out = period3_certificate(q);
      const Report cert = certificate_report(out, swap);
      for (const auto& [k, v] : cert.entries()) r.add("certificate." + k, v);
      if (std::holds_alternative<Period3Certificate>(out)) {
        r.add("li_yorke", "certified (period three)");
      }
    } else {
      r.add("certificate.attempted", false);
      r.add("certificate.reason", "alpha <= 1: x1 = 1 - 1/alpha is not in (0, 1)");
    }
  }
  if (s.capacity) {
    const CarryingCapacity cc = carrying_capacity(cfg.market, s.eta, s.L_min, s.L_max, s.tol);
    r.add("capacity.certified_L_star", cc.L_star);
    r.add("capacity.permuted", cc.permuted);
    r.add("capacity.monotone_above", cc.monotone_above);
    r.add("capacity.x0", cc.certificate.x0);
    r.add("capacity.x1", cc.certificate.x1);
    r.add("capacity.x3", cc.certificate.x3);
  }
  if (s.lyapunov) {
    try {
      r.add("lyapunov_diagnostic", lyapunov_exponent(p, s.x0, s.burn_in, s.iters));
    } catch (const NumericalError& e) {
      r.add("lyapunov_diagnostic", "degenerate orbit");
    }
  }
  if (s.bifurcation) {
    const BifurcationSection& b = require_section(cfg.bifurcation, "bifurcation");
    const auto rows = bifurcation_scan(cfg.market, b.eta, b.L_grid, b.x0, b.burn_in, b.samples, b.threads);
    if (csv) write_bifurcation_csv(*csv, rows);
    r.add("bifurcation_rows", static_cast<long>(rows.size()));
  }
  return r;
}

Report cmd_bifurcation(const ExperimentConfig& cfg, std::ostream* csv, const CommandOptions&) {
  const BifurcationSection& b = require_section(cfg.bifurcation, "bifurcation");
  const auto rows = bifurcation_scan(cfg.market, b.eta, b.L_grid, b.x0, b.burn_in, b.samples, b.threads);
  if (csv) write_bifurcation_csv(*csv, rows);
  Report r;
  r.add("command", "bifurcation");
  r.add("cells", static_cast<long>(b.L_grid.size()));
  r.add("rows", static_cast<long>(rows.size()));
  return r;
}

}  // namespace perfdyn
