#pragma once

// Potential function, stable-point solver and certificates, and the
// sufficient learning-rate bound for the exponentiated-gradient dynamics.

#include <vector>

#include "perfdyn/model.hpp"

namespace perfdyn {

inline constexpr double kSupportEps = 1e-9;
inline constexpr double kProperMargin = 1e-8;

/// Phi(theta) = s^T A s + sum_i lambda_i theta^iT A theta^i - 2 b^T s,
/// with s = sum_i lambda_i theta^i.  Its block gradient is lambda_i g^i.
double potential(const MarketSpec& spec, const ModelProfile& profile);
/// Same quadratic evaluated on an arbitrary n x d matrix.
double potential_at(const MarketSpec& spec, const Matrix& theta);

/// n x d matrix of partial derivatives lambda_i g^i_k.
Matrix potential_gradient(const MarketSpec& spec, const ModelProfile& profile);

struct PotentialHessian {
  Matrix H;  // (n d) x (n d), block (i, j) is H[i d .. , j d ..]
  bool positive_definite = false;
  double min_eigenvalue = 0.0;
};

/// Constant Hessian of Phi: the Kronecker product of the agent-coupling
/// matrix (2 lambda_i lambda_j off the diagonal, 2 lambda_i (1 + lambda_i)
/// on it) with A.
PotentialHessian potential_hessian(const MarketSpec& spec);

struct KktReport {
  double residual = 0.0;              // see kkt_report
  std::vector<std::vector<int>> supports;
  bool proper = false;
};

/// Residual of the stability conditions
///   g^i_k = gbar^i on the support, g^i_l >= gbar^i off it,
/// measured as max |g^i_k - gbar^i| over supports plus
/// max(0, gbar^i - g^i_l) over non-support coordinates, maximized over
/// agents.  Support is {k : theta^i_k > kSupportEps}.
KktReport kkt_report(const MarketSpec& spec, const ModelProfile& profile);

struct StablePointResult {
  ModelProfile theta_star;
  double kkt_residual = 0.0;
  std::vector<std::vector<int>> supports;
  bool proper = false;
  double potential_value = 0.0;
  long iterations = 0;
};

/// Thrown when the solver exhausts its iteration budget.
class NonConvergenceError : public NumericalError {
 public:
  NonConvergenceError(const std::string& what, ModelProfile last, double residual)
      : NumericalError(what), last_(std::move(last)), residual_(residual) {}

  const ModelProfile& last_iterate() const noexcept { return last_; }
  double residual() const noexcept { return residual_; }

 private:
  ModelProfile last_;
  double residual_;
};

/// Minimizes Phi over the product of simplices by projected gradient descent
/// with step 1 / (2 ||H||_inf).  Stops once the KKT residual is <= tol.
StablePointResult find_stable_point(const MarketSpec& spec, double tol = 1e-10,
                                    long max_iters = 2'000'000);
StablePointResult find_stable_point(const MarketSpec& spec, const ModelProfile& initial,
                                    double tol = 1e-10, long max_iters = 2'000'000);

struct StabilityCheck {
  bool stable = false;
  double residual = 0.0;
};

StabilityCheck check_stable(const MarketSpec& spec, const ModelProfile& profile, double tol);

/// KKT test for the total loss sum_j loss(theta, theta^j).  Its block
/// gradient is (1 + n lambda_i) g^i, so each agent's residual is compared
/// against (1 + n lambda_i) tol.
bool check_optimal(const MarketSpec& spec, const ModelProfile& profile, double tol);

/// Euclidean projection onto the probability simplex.
Vector project_to_simplex(const Eigen::Ref<const Vector>& v);

/// max over agents i, coordinates k and profiles in the product of simplices
/// of |g^i_k|.  g^i_k is affine and separable across agents, so the maximum
/// is taken agent-by-agent at vertices.
double max_abs_gradient(const MarketSpec& spec);

/// max over profiles of ||g||_1 bounded by sum_{i,k} max |g^i_k|.
double max_gradient_l1_bound(const MarketSpec& spec);

struct SafeRateReport {
  double C1 = 0.0;
  double C2 = 0.0;
  double C3 = 0.0;
  double C4 = 0.0;
  double max_abs_gradient = 0.0;
  double xi_l1_bound = 0.0;      // 2 n d max|g|
  double gradient_l1_bound = 0.0;
  double eta_bound_gradient = 0.0;   // eta max|g| <= 1/2
  double eta_bound_xi = 0.0;         // eta n d C3 max||xi||_1 <= 1
  double eta_bound_descent = 0.0;    // R^2 eta^3 < rhs
  double eta_star = 0.0;
  double R_eta = 1.0;
};

/// Largest maximum learning rate satisfying the three sufficient conditions
/// for discrete descent of Phi near theta_star.  Sufficient, not necessary.
SafeRateReport safe_learning_rate(const MarketSpec& spec, const ModelProfile& theta_star,
                                  double R_eta = 1.0);

/// Right-hand side of the cubic condition R^2 eta^3 < rhs.
double descent_condition_rhs(const MarketSpec& spec, const SafeRateReport& report);

}  // namespace perfdyn
