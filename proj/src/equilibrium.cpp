#include "perfdyn/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace perfdyn {

double potential(const MarketSpec& spec, const ModelProfile& profile) {
  require_compatible(spec, profile);
  return potential_at(spec, profile.matrix());
}

double potential_at(const MarketSpec& spec, const Matrix& theta) {
  if (theta.rows() != spec.n() || theta.cols() != spec.d()) throw ValidationError("potential: dimension mismatch");
  const Matrix& A = spec.A();
  const Vector s = theta.transpose() * spec.lambda();
  double self = 0.0;
  for (int i = 0; i < spec.n(); ++i) {
    const Vector row = theta.row(i).transpose();
    self += spec.lambda()(i) * row.dot(A * row);
  }
  return s.dot(A * s) + self - 2.0 * spec.b().dot(s);
}

Matrix potential_gradient(const MarketSpec& spec, const ModelProfile& profile) {
  const GradProfile gp = grad_profile(spec, profile);
  return spec.lambda().asDiagonal() * gp.grads;
}

PotentialHessian potential_hessian(const MarketSpec& spec) {
  const int n = spec.n();
  const int d = spec.d();
  const Vector& lambda = spec.lambda();
  Matrix coupling(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      coupling(i, j) = i == j ? 2.0 * lambda(i) * (1.0 + lambda(i)) : 2.0 * lambda(i) * lambda(j);
    }
  }
  PotentialHessian out;
  out.H.resize(n * d, n * d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out.H.block(i * d, j * d, d, d) = coupling(i, j) * spec.A();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(out.H, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = eig.eigenvalues().minCoeff();
  out.positive_definite = out.min_eigenvalue > 0.0;
  return out;
}

namespace {

// Per-agent KKT residuals, optionally scaled per agent.
struct AgentResiduals {
  std::vector<double> residual;
  std::vector<std::vector<int>> supports;
  bool proper = true;
};

AgentResiduals agent_residuals(const ModelProfile& profile, const GradProfile& gp) {
  AgentResiduals out;
  const int n = profile.agents();
  const int d = profile.dim();
  out.residual.assign(n, 0.0);
  out.supports.resize(n);
  for (int i = 0; i < n; ++i) {
    const double avg = gp.average(i);
    double on_support = 0.0;
    double off_support = 0.0;
    for (int k = 0; k < d; ++k) {
      const double gap = gp.grads(i, k) - avg;
      if (profile(i, k) > kSupportEps) {
        out.supports[i].push_back(k);
        on_support = std::max(on_support, std::abs(gap));
      } else {
        off_support = std::max(off_support, -gap);
        if (!(gap > kProperMargin)) out.proper = false;
      }
    }
    out.residual[i] = on_support + off_support;
  }
  return out;
}

}  // namespace

KktReport kkt_report(const MarketSpec& spec, const ModelProfile& profile) {
  const GradProfile gp = grad_profile(spec, profile);
  AgentResiduals r = agent_residuals(profile, gp);
  KktReport out;
  out.residual = *std::max_element(r.residual.begin(), r.residual.end());
  out.supports = std::move(r.supports);
  out.proper = r.proper;
  return out;
}

Vector project_to_simplex(const Eigen::Ref<const Vector>& v) {
  const Eigen::Index d = v.size();
  std::vector<double> sorted(v.data(), v.data() + d);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double tau = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) tau = candidate;
  }
  Vector out = (v.array() - tau).max(0.0).matrix();
  const double sum = out.sum();
  return out / sum;
}

StablePointResult find_stable_point(const MarketSpec& spec, double tol, long max_iters) {
  return find_stable_point(spec, ModelProfile::uniform(spec.n(), spec.d()), tol, max_iters);
}

StablePointResult find_stable_point(const MarketSpec& spec, const ModelProfile& initial,
                                    double tol, long max_iters) {
  require_compatible(spec, initial);
  if (!(tol > 0.0)) throw ValidationError("find_stable_point: tol must be positive");
  const PotentialHessian hess = potential_hessian(spec);
  const double step = 1.0 / (2.0 * hess.H.cwiseAbs().rowwise().sum().maxCoeff());

  Matrix theta = initial.matrix();
  double residual = kkt_report(spec, initial).residual;
  long iter = 0;
  while (residual > tol) {
    if (iter >= max_iters) {
      throw NonConvergenceError("find_stable_point: KKT residual " + std::to_string(residual) +
                                    " > tol after " + std::to_string(iter) + " iterations",
                                ModelProfile(theta), residual);
    }
    const Matrix grad = potential_gradient(spec, ModelProfile(theta));
    for (int i = 0; i < spec.n(); ++i) {
      theta.row(i) = project_to_simplex((theta.row(i) - step * grad.row(i)).transpose()).transpose();
    }
    ++iter;
    residual = kkt_report(spec, ModelProfile(theta)).residual;
    if (!std::isfinite(residual)) throw NumericalError("find_stable_point: non-finite residual");
  }

  ModelProfile star(theta);
  KktReport report = kkt_report(spec, star);
  StablePointResult out{star, report.residual, std::move(report.supports), report.proper,
                        potential(spec, star), iter};
  return out;
}

StabilityCheck check_stable(const MarketSpec& spec, const ModelProfile& profile, double tol) {
  const double r = kkt_report(spec, profile).residual;
  return {r <= tol, r};
}

bool check_optimal(const MarketSpec& spec, const ModelProfile& profile, double tol) {
  require_compatible(spec, profile);
  GradProfile gp = grad_profile(spec, profile);
  const double n = spec.n();
  Vector scale = (1.0 + n * spec.lambda().array()).matrix();
  gp.grads = scale.asDiagonal() * gp.grads;
  gp.average = scale.cwiseProduct(gp.average);
  const AgentResiduals r = agent_residuals(profile, gp);
  for (int i = 0; i < spec.n(); ++i) {
    if (!(r.residual[i] <= scale(i) * tol)) return false;
  }
  return true;
}

double max_abs_gradient(const MarketSpec& spec) {
  // g^i_k = 2 [(1 + lambda_i) (A theta^i)_k + sum_{j != i} lambda_j (A theta^j)_k] - 2 b_k;
  // each (A theta^j)_k ranges over [min_l A_kl, max_l A_kl].
  const double scale = 2.0 * (1.0 + spec.total_influence());
  double best = 0.0;
  for (int k = 0; k < spec.d(); ++k) {
    const double hi = scale * spec.A().row(k).maxCoeff() - 2.0 * spec.b()(k);
    const double lo = scale * spec.A().row(k).minCoeff() - 2.0 * spec.b()(k);
    best = std::max({best, std::abs(hi), std::abs(lo)});
  }
  return best;
}

double max_gradient_l1_bound(const MarketSpec& spec) {
  const double scale = 2.0 * (1.0 + spec.total_influence());
  double per_agent = 0.0;
  for (int k = 0; k < spec.d(); ++k) {
    const double hi = scale * spec.A().row(k).maxCoeff() - 2.0 * spec.b()(k);
    const double lo = scale * spec.A().row(k).minCoeff() - 2.0 * spec.b()(k);
    per_agent += std::max(std::abs(hi), std::abs(lo));
  }
  return spec.n() * per_agent;
}

double descent_condition_rhs(const MarketSpec& spec, const SafeRateReport& r) {
  const Vector& lambda = spec.lambda();
  const double d = spec.d();
  const double lam_min = lambda.minCoeff();
  const double lam_max = lambda.maxCoeff();
  const double first = 4.0 / (r.C3 * lam_max * r.gradient_l1_bound);
  const double second = 1.0 / (d * d * r.C4);
  return lam_min * lam_min / (16.0 * lambda.sum()) * std::min(first, second);
}

SafeRateReport safe_learning_rate(const MarketSpec& spec, const ModelProfile& theta_star,
                                  double R_eta) {
  require_compatible(spec, theta_star);
  if (!(R_eta >= 1.0)) throw ValidationError("safe_learning_rate: R_eta must be >= 1");
  const int n = spec.n();
  const int d = spec.d();

  double min_support = 1.0;
  bool any_support = false;
  for (int i = 0; i < n; ++i) {
    bool agent_support = false;
    for (int k = 0; k < d; ++k) {
      if (theta_star(i, k) > kSupportEps) {
        min_support = std::min(min_support, theta_star(i, k));
        agent_support = true;
      }
    }
    if (!agent_support) throw ValidationError("safe_learning_rate: agent with empty support");
    any_support = true;
  }
  if (!any_support) throw ValidationError("safe_learning_rate: empty support");

  SafeRateReport r;
  r.R_eta = R_eta;
  r.max_abs_gradient = max_abs_gradient(spec);
  r.gradient_l1_bound = max_gradient_l1_bound(spec);
  r.xi_l1_bound = 2.0 * n * d * r.max_abs_gradient;
  r.C1 = 0.25 * r.max_abs_gradient;
  r.C2 = 2.0 / min_support;
  r.C3 = std::numbers::e * d * std::max(r.C1, r.C2);
  r.C4 = spec.lambda().cwiseProduct((spec.lambda().array() + 1.0).matrix()).maxCoeff() *
         spec.A().maxCoeff();
  if (!(r.C1 > 0.0) || !(r.C4 > 0.0)) {
    throw NumericalError("safe_learning_rate: degenerate constants (zero gradient bound or A)");
  }

  r.eta_bound_gradient = 0.5 / r.max_abs_gradient;
  r.eta_bound_xi = 1.0 / (n * d * r.C3 * r.xi_l1_bound);
  const double rhs = descent_condition_rhs(spec, r);
  double eta3 = std::cbrt(rhs / (R_eta * R_eta));
  while (R_eta * R_eta * eta3 * eta3 * eta3 >= rhs) eta3 = std::nextafter(eta3, 0.0);
  r.eta_bound_descent = eta3;
  r.eta_star = std::min({r.eta_bound_gradient, r.eta_bound_xi, r.eta_bound_descent});
  return r;
}

}  // namespace perfdyn
