#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <cmath>
#include <random>

#include "perfdyn/model.hpp"

namespace perfdyn::testing {

/// Two features, x1 ~ N(0, 3), x2 ~ N(0, 7), x0 ~ N(0, 1), theta0 = 0.
inline MarketSpec figure_spec(double L = 14.0, int n = 1) {
  Matrix A(2, 2);
  A << 3.0, 0.0, 0.0, 7.0;
  return MarketSpec(Vector::Constant(n, L / n), Vector::Zero(2), A, Vector::Zero(2), 1.0);
}

/// Same market with the feature coordinates swapped (beta_inf = 0.3).
inline MarketSpec permuted_figure_spec(double L = 14.0) {
  Matrix A(2, 2);
  A << 7.0, 0.0, 0.0, 3.0;
  return MarketSpec(Vector::Constant(1, L), Vector::Zero(2), A, Vector::Zero(2), 1.0);
}

inline ModelProfile p_profile(double p, int n = 1) {
  Vector v(2);
  v << p, 1.0 - p;
  return ModelProfile::replicate(SimplexPoint(v), n);
}

struct SpecShape {
  int d_min = 2, d_max = 4;
  int n_min = 1, n_max = 3;
  bool zero_c = false;
};

/// A = B B^T + 0.5 I with B uniform in [-1, 1]; lambda in [0.2, 3];
/// theta0, c uniform in [-1, 1]; sigma0^2 in [0.5, 2].
inline MarketSpec random_spec(std::mt19937_64& rng, SpecShape shape = {}) {
  std::uniform_int_distribution<int> dd(shape.d_min, shape.d_max), nn(shape.n_min, shape.n_max);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), lam(0.2, 3.0), noise(0.5, 2.0);
  const int d = dd(rng);
  const int n = nn(rng);
  Matrix B(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) B(r, c) = unit(rng);
  Matrix A = B * B.transpose() + 0.5 * Matrix::Identity(d, d);
  A = 0.5 * (A + A.transpose());
  Vector lambda(n), theta0(d), c(d);
  for (int i = 0; i < n; ++i) lambda(i) = lam(rng);
  for (int k = 0; k < d; ++k) {
    theta0(k) = unit(rng);
    c(k) = shape.zero_c ? 0.0 : unit(rng);
  }
  return MarketSpec(lambda, theta0, A, c, noise(rng));
}

/// Uniform on the simplex (normalized exponentials), strictly interior.
inline Vector random_simplex(std::mt19937_64& rng, int d) {
  std::exponential_distribution<double> ex(1.0);
  Vector v(d);
  for (int k = 0; k < d; ++k) v(k) = ex(rng) + 1e-6;
  return v / v.sum();
}

inline ModelProfile random_profile(std::mt19937_64& rng, int n, int d) {
  Matrix m(n, d);
  for (int i = 0; i < n; ++i) m.row(i) = random_simplex(rng, d).transpose();
  return ModelProfile(m);
}

/// Central difference of f along every coordinate of x.
template <class F>
Vector central_difference(F&& f, Vector x, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double keep = x(k);
    x(k) = keep + h;
    const double up = f(x);
    x(k) = keep - h;
    const double down = f(x);
    x(k) = keep;
    g(k) = (up - down) / (2.0 * h);
  }
  return g;
}

/// max |a - b| / max(1, max |b|)
inline double relative_error(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace perfdyn::testing
