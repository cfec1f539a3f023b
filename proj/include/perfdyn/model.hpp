#pragma once

// Location-scale distribution map, decoupled loss, and the gradient field
// shared by every other part of the library.
//
// The outcome under a deployed profile (theta^1, ..., theta^n) is
//
//     y = <theta0 - sum_i lambda_i theta^i, x> + x0,
//
// and a predictive model theta' is scored by the mean squared error
// E[(y - <theta', x>)^2].  Only the moments A = E[x x^T], c = E[x0 x] and
// sigma0^2 = E[x0^2] enter the analytic formulas.

#include <Eigen/Dense>

#include <vector>

#include "perfdyn/error.hpp"

namespace perfdyn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kSimplexTolerance = 1e-12;
inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kXiRowSumTolerance = 1e-10;

/// A point of the probability simplex: nonnegative coordinates summing to one.
class SimplexPoint {
 public:
  explicit SimplexPoint(Vector coords);

  static SimplexPoint uniform(int d);
  static SimplexPoint vertex(int d, int k);

  const Vector& coords() const noexcept { return coords_; }
  int dim() const noexcept { return static_cast<int>(coords_.size()); }
  double operator[](int k) const { return coords_(k); }

 private:
  Vector coords_;
};

/// The n-tuple of deployed models, one simplex point per row.
class ModelProfile {
 public:
  explicit ModelProfile(Matrix rows);

  /// Every agent deploys the same model.
  static ModelProfile replicate(const SimplexPoint& model, int n);
  static ModelProfile uniform(int n, int d);

  int agents() const noexcept { return static_cast<int>(rows_.rows()); }
  int dim() const noexcept { return static_cast<int>(rows_.cols()); }
  const Matrix& matrix() const noexcept { return rows_; }
  SimplexPoint agent(int i) const { return SimplexPoint(rows_.row(i).transpose()); }
  double operator()(int i, int k) const { return rows_(i, k); }

  /// True when every coordinate is strictly positive.
  bool interior() const;

 private:
  Matrix rows_;
};

/// Moments of the location-scale map.  Immutable after construction.
class MarketSpec {
 public:
  /// Validates dimensions, positivity of lambda, symmetry and positive
  /// definiteness of A.  Throws ValidationError.
  MarketSpec(Vector lambda, Vector theta0, Matrix A, Vector c, double sigma0_sq = 1.0);

  int d() const noexcept { return static_cast<int>(theta0_.size()); }
  int n() const noexcept { return static_cast<int>(lambda_.size()); }
  const Vector& lambda() const noexcept { return lambda_; }
  const Vector& theta0() const noexcept { return theta0_; }
  const Matrix& A() const noexcept { return A_; }
  const Vector& c() const noexcept { return c_; }
  double sigma0_sq() const noexcept { return sigma0_sq_; }

  /// b = A theta0 + c.
  const Vector& b() const noexcept { return b_; }
  /// L_n = sum_i lambda_i.
  double total_influence() const noexcept { return total_influence_; }
  /// Lower Cholesky factor of A.
  const Matrix& cholesky_factor() const noexcept { return chol_; }

  /// Same moments with different influence parameters (n may change).
  MarketSpec with_lambda(Vector lambda) const;
  /// Relabels feature coordinates: new coordinate k is old coordinate perm[k].
  MarketSpec permuted(const std::vector<int>& perm) const;

  bool operator==(const MarketSpec& other) const;

 private:
  Vector lambda_;
  Vector theta0_;
  Matrix A_;
  Vector c_;
  double sigma0_sq_;
  Vector b_;
  double total_influence_;
  Matrix chol_;
};

/// Per-agent gradients g^i_k (rows) and their theta-weighted averages.
struct GradProfile {
  Matrix grads;    // n x d
  Vector average;  // gbar^i = sum_l theta^i_l g^i_l
};

/// Throws ValidationError unless the profile has n rows and d columns.
void require_compatible(const MarketSpec& spec, const ModelProfile& profile);

/// w = theta0 - sum_i lambda_i theta^i.
Vector effective_outcome_weights(const MarketSpec& spec, const ModelProfile& profile);

/// Expected squared error of `predictive` on the distribution induced by
/// `deployed`.
double decoupled_loss(const MarketSpec& spec, const ModelProfile& deployed,
                      const SimplexPoint& predictive);

/// Closed form extended to any predictive vector in R^d.
double decoupled_loss_at(const MarketSpec& spec, const ModelProfile& deployed,
                         const Eigen::Ref<const Vector>& predictive);

/// 2 A (theta' + sum_i lambda_i theta^i) - 2 b.
Vector gradient(const MarketSpec& spec, const ModelProfile& deployed, const SimplexPoint& predictive);

GradProfile grad_profile(const MarketSpec& spec, const ModelProfile& profile);

/// xi^i_k = theta^i_k (gbar^i - g^i_k), as an n x d matrix.
Matrix xi(const MarketSpec& spec, const ModelProfile& profile);
Matrix xi(const ModelProfile& profile, const GradProfile& grads);

}  // namespace perfdyn
