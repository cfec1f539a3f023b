#include "perfdyn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace perfdyn {

namespace {

void validate_simplex_row(const Eigen::Ref<const Vector>& row, const char* what) {
  for (Eigen::Index k = 0; k < row.size(); ++k) {
    if (!std::isfinite(row(k)) || row(k) < 0.0) {
      throw ValidationError(std::string(what) + ": coordinate " + std::to_string(k) +
                            " is negative or non-finite");
    }
  }
  const double sum = row.sum();
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    throw ValidationError(std::string(what) + ": coordinates sum to " + std::to_string(sum) +
                          ", expected 1");
  }
}

}  // namespace

SimplexPoint::SimplexPoint(Vector coords) : coords_(std::move(coords)) {
  if (coords_.size() < 1) throw ValidationError("simplex point: empty");
  validate_simplex_row(coords_, "simplex point");
}

SimplexPoint SimplexPoint::uniform(int d) {
  if (d < 1) throw ValidationError("simplex point: dimension must be positive");
  return SimplexPoint(Vector::Constant(d, 1.0 / d));
}

SimplexPoint SimplexPoint::vertex(int d, int k) {
  if (k < 0 || k >= d) throw ValidationError("simplex vertex index out of range");
  Vector v = Vector::Zero(d);
  v(k) = 1.0;
  return SimplexPoint(std::move(v));
}

ModelProfile::ModelProfile(Matrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() < 1 || rows_.cols() < 1) throw ValidationError("model profile: empty");
  for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
    validate_simplex_row(rows_.row(i).transpose(), "model profile");
  }
}

ModelProfile ModelProfile::replicate(const SimplexPoint& model, int n) {
  if (n < 1) throw ValidationError("model profile: agent count must be positive");
  Matrix rows(n, model.dim());
  for (int i = 0; i < n; ++i) rows.row(i) = model.coords().transpose();
  return ModelProfile(std::move(rows));
}

ModelProfile ModelProfile::uniform(int n, int d) { return replicate(SimplexPoint::uniform(d), n); }

bool ModelProfile::interior() const { return (rows_.array() > 0.0).all(); }

MarketSpec::MarketSpec(Vector lambda, Vector theta0, Matrix A, Vector c, double sigma0_sq)
    : lambda_(std::move(lambda)),
      theta0_(std::move(theta0)),
      A_(std::move(A)),
      c_(std::move(c)),
      sigma0_sq_(sigma0_sq) {
  const auto d = theta0_.size();
  if (d < 2) throw ValidationError("market spec: d must be at least 2");
  if (lambda_.size() < 1) throw ValidationError("market spec: n must be at least 1");
  if (A_.rows() != d || A_.cols() != d) {
    throw ValidationError("market spec: A must be " + std::to_string(d) + "x" + std::to_string(d));
  }
  if (c_.size() != d) throw ValidationError("market spec: c must have length d");
  for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
    if (!(lambda_(i) > 0.0) || !std::isfinite(lambda_(i))) {
      throw ValidationError("market spec: lambda[" + std::to_string(i) + "] must be positive");
    }
  }
  if (!A_.allFinite() || !theta0_.allFinite() || !c_.allFinite()) {
    throw ValidationError("market spec: non-finite moment");
  }
  if (!(sigma0_sq_ >= 0.0) || !std::isfinite(sigma0_sq_)) {
    throw ValidationError("market spec: sigma0_sq must be nonnegative");
  }
  if ((A_ - A_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance) {
    throw ValidationError("market spec: A is not symmetric");
  }
  Eigen::LLT<Matrix> llt(A_);
  if (llt.info() != Eigen::Success) {
    throw ValidationError("market spec: A is not positive definite");
  }
  chol_ = llt.matrixL();
  if ((chol_.diagonal().array() <= 0.0).any()) {
    throw ValidationError("market spec: A is not positive definite");
  }
  b_ = A_ * theta0_ + c_;
  total_influence_ = lambda_.sum();
}

MarketSpec MarketSpec::with_lambda(Vector lambda) const {
  return MarketSpec(std::move(lambda), theta0_, A_, c_, sigma0_sq_);
}

MarketSpec MarketSpec::permuted(const std::vector<int>& perm) const {
  const int dim = d();
  if (static_cast<int>(perm.size()) != dim) throw ValidationError("permutation length != d");
  std::vector<int> sorted(perm);
  std::sort(sorted.begin(), sorted.end());
  for (int k = 0; k < dim; ++k) {
    if (sorted[k] != k) throw ValidationError("not a permutation of 0..d-1");
  }
  Vector t0(dim), cc(dim);
  Matrix AA(dim, dim);
  for (int k = 0; k < dim; ++k) {
    t0(k) = theta0_(perm[k]);
    cc(k) = c_(perm[k]);
    for (int l = 0; l < dim; ++l) AA(k, l) = A_(perm[k], perm[l]);
  }
  return MarketSpec(lambda_, std::move(t0), std::move(AA), std::move(cc), sigma0_sq_);
}

bool MarketSpec::operator==(const MarketSpec& other) const {
  return lambda_.size() == other.lambda_.size() && theta0_.size() == other.theta0_.size() &&
         lambda_ == other.lambda_ && theta0_ == other.theta0_ && A_ == other.A_ &&
         c_ == other.c_ && sigma0_sq_ == other.sigma0_sq_;
}

void require_compatible(const MarketSpec& spec, const ModelProfile& profile) {
  if (profile.agents() != spec.n() || profile.dim() != spec.d()) {
    throw ValidationError("profile is " + std::to_string(profile.agents()) + "x" +
                          std::to_string(profile.dim()) + " but spec expects " +
                          std::to_string(spec.n()) + "x" + std::to_string(spec.d()));
  }
}

namespace {

void require_predictive(const MarketSpec& spec, const SimplexPoint& predictive) {
  if (predictive.dim() != spec.d()) {
    throw ValidationError("predictive model has dimension " + std::to_string(predictive.dim()) +
                          ", spec expects " + std::to_string(spec.d()));
  }
}

// sum_i lambda_i theta^i
Vector aggregate(const MarketSpec& spec, const ModelProfile& profile) {
  return profile.matrix().transpose() * spec.lambda();
}

}  // namespace

Vector effective_outcome_weights(const MarketSpec& spec, const ModelProfile& profile) {
  require_compatible(spec, profile);
  return spec.theta0() - aggregate(spec, profile);
}

double decoupled_loss_at(const MarketSpec& spec, const ModelProfile& deployed,
                         const Eigen::Ref<const Vector>& predictive) {
  if (predictive.size() != spec.d()) throw ValidationError("predictive model has wrong dimension");
  const Vector w = effective_outcome_weights(spec, deployed) - predictive;
  return w.dot(spec.A() * w) + 2.0 * spec.c().dot(w) + spec.sigma0_sq();
}

double decoupled_loss(const MarketSpec& spec, const ModelProfile& deployed,
                      const SimplexPoint& predictive) {
  require_predictive(spec, predictive);
  return decoupled_loss_at(spec, deployed, predictive.coords());
}

Vector gradient(const MarketSpec& spec, const ModelProfile& deployed, const SimplexPoint& predictive) {
  require_compatible(spec, deployed);
  require_predictive(spec, predictive);
  return 2.0 * spec.A() * (predictive.coords() + aggregate(spec, deployed)) - 2.0 * spec.b();
}

GradProfile grad_profile(const MarketSpec& spec, const ModelProfile& profile) {
  require_compatible(spec, profile);
  const Matrix& theta = profile.matrix();
  // Row i: 2 A (theta^i + s) - 2 b with s the aggregate; A symmetric so
  // (A v)^T = v^T A.
  const Vector shared = 2.0 * spec.A() * aggregate(spec, profile) - 2.0 * spec.b();
  GradProfile out;
  out.grads = 2.0 * theta * spec.A();
  out.grads.rowwise() += shared.transpose();
  out.average = (theta.array() * out.grads.array()).rowwise().sum();
  return out;
}

Matrix xi(const ModelProfile& profile, const GradProfile& grads) {
  const Matrix& theta = profile.matrix();
  Matrix centered = (-grads.grads).colwise() + grads.average;
  return theta.cwiseProduct(centered);
}

Matrix xi(const MarketSpec& spec, const ModelProfile& profile) {
  return xi(profile, grad_profile(spec, profile));
}

}  // namespace perfdyn
