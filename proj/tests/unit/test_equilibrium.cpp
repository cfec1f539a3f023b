#include <doctest.h>

#include <cmath>
#include <random>

#include "perfdyn/equilibrium.hpp"
#include "support.hpp"

using namespace perfdyn;
using namespace perfdyn::testing;

namespace {

// Phi written out term by term for a d = 2, n = 2 profile ((p1, 1-p1), (p2, 1-p2)).
double phi_two_by_two(const MarketSpec& s, double p1, double p2) {
  const double l1 = s.lambda()(0), l2 = s.lambda()(1);
  const double a = s.A()(0, 0), b = s.A()(0, 1), c = s.A()(1, 1);
  auto quad = [&](double x, double y) { return a * x * x + 2.0 * b * x * y + c * y * y; };
  const double s0 = l1 * p1 + l2 * p2;
  const double s1 = l1 * (1 - p1) + l2 * (1 - p2);
  return quad(s0, s1) + l1 * quad(p1, 1 - p1) + l2 * quad(p2, 1 - p2) - 2.0 * (s.b()(0) * s0 + s.b()(1) * s1);
}

// Max |g_k| over the d^(n+1) combinations of vertex profiles and vertex
// predictive models.
double vertex_enumeration_max_gradient(const MarketSpec& s) {
  const int n = s.n(), d = s.d();
  long combos = 1;
  for (int i = 0; i < n; ++i) combos *= d;
  double best = 0.0;
  for (long code = 0; code < combos; ++code) {
    Matrix rows = Matrix::Zero(n, d);
    long rest = code;
    for (int i = 0; i < n; ++i) {
      rows(i, rest % d) = 1.0;
      rest /= d;
    }
    const ModelProfile prof(rows);
    for (int v = 0; v < d; ++v) {
      const Vector g = gradient(s, prof, SimplexPoint::vertex(d, v));
      best = std::max(best, g.cwiseAbs().maxCoeff());
    }
  }
  return best;
}

struct GridMin {
  double p1 = 0.0, p2 = 0.0;
};

GridMin grid_minimize(const MarketSpec& s, int points) {
  GridMin best;
  double value = std::numeric_limits<double>::infinity();
  for (int a = 0; a < points; ++a) {
    const double p1 = static_cast<double>(a) / (points - 1);
    for (int b = 0; b < points; ++b) {
      const double p2 = static_cast<double>(b) / (points - 1);
      const double v = phi_two_by_two(s, p1, p2);
      if (v < value) {
        value = v;
        best = {p1, p2};
      }
    }
  }
  return best;
}

Matrix kronecker_oracle(const MarketSpec& s) {
  const int n = s.n(), d = s.d();
  Matrix H(n * d, n * d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          const double li = s.lambda()(i), lj = s.lambda()(j);
          const double coupling = i == j ? 2.0 * li * (1.0 + li) : 2.0 * li * lj;
          H(i * d + k, j * d + l) = coupling * s.A()(k, l);
        }
  return H;
}

}  // namespace

TEST_CASE("potential values") {
  const MarketSpec unit(Vector::Ones(1), Vector::Zero(2), Matrix::Identity(2, 2), Vector::Zero(2));
  CHECK(potential(unit, p_profile(0.5)) == doctest::Approx(1.0).epsilon(1e-15));

  // s = 14 (0.7, 0.3): 3 * 9.8^2 + 7 * 4.2^2 + 14 * (3 * 0.49 + 7 * 0.09)
  const double expected = 3.0 * 9.8 * 9.8 + 7.0 * 4.2 * 4.2 + 14.0 * (3.0 * 0.49 + 7.0 * 0.09);
  CHECK(expected == doctest::Approx(441.0).epsilon(1e-14));
  CHECK(potential(figure_spec(), p_profile(0.7)) == doctest::Approx(441.0).epsilon(1e-14));

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    MarketSpec s = random_spec(rng, {2, 4, 1, 3});
    s = MarketSpec(0.01 * s.lambda(), Vector::Zero(s.d()), s.A(), Vector::Zero(s.d()), s.sigma0_sq());
    CHECK(potential(s, random_profile(rng, s.n(), s.d())) >= 0.0);
  }
  CHECK_THROWS_AS(potential(figure_spec(), ModelProfile::uniform(2, 2)), ValidationError);
}

TEST_CASE("potential gradient") {
  const StablePointResult r = find_stable_point(figure_spec(7.0, 2));
  const Matrix pg = potential_gradient(figure_spec(7.0, 2), r.theta_star);
  for (int i = 0; i < 2; ++i) CHECK(std::abs(pg(i, 0) - pg(i, 1)) <= 1e-8);

  const MarketSpec two(Vector::Constant(1, 2.0), Vector::Zero(2), Matrix::Identity(2, 2), Vector::Zero(2));
  const ModelProfile p = p_profile(0.3);
  CHECK(potential_gradient(two, p).row(0).transpose() == 2.0 * gradient(two, p, p.agent(0)));

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const MarketSpec s = random_spec(rng);
    const ModelProfile prof = random_profile(rng, s.n(), s.d());
    const Matrix got = potential_gradient(s, prof);
    const GradProfile gp = grad_profile(s, prof);
    CHECK(relative_error(got, s.lambda().asDiagonal() * gp.grads) <= 1e-14);
    Matrix fd(s.n(), s.d());
    for (int i = 0; i < s.n(); ++i) {
      const Vector row = central_difference(
          [&](const Vector& r) {
            Matrix m = prof.matrix();
            m.row(i) = r.transpose();
            return potential_at(s, m);
          },
          prof.agent(i).coords());
      fd.row(i) = row.transpose();
    }
    CHECK(relative_error(fd, got) <= 1e-6);
  }
}

TEST_CASE("potential hessian") {
  const MarketSpec one(Vector::Ones(1), Vector::Zero(2), Matrix::Identity(2, 2), Vector::Zero(2));
  CHECK(potential_hessian(one).H == 4.0 * Matrix::Identity(2, 2));

  const MarketSpec two(Vector::Ones(2), Vector::Zero(2), Matrix::Identity(2, 2), Vector::Zero(2));
  const PotentialHessian h = potential_hessian(two);
  Eigen::Matrix2d coupling;
  coupling << 4, 2, 2, 4;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(coupling);
  CHECK(eig.eigenvalues()(0) == doctest::Approx(2.0));
  CHECK(eig.eigenvalues()(1) == doctest::Approx(6.0));
  CHECK(h.min_eigenvalue == doctest::Approx(2.0).epsilon(1e-12));
  Eigen::SelfAdjointEigenSolver<Matrix> full(h.H);
  const Vector ev = full.eigenvalues();
  CHECK(ev(0) == doctest::Approx(2.0));
  CHECK(ev(1) == doctest::Approx(2.0));
  CHECK(ev(2) == doctest::Approx(6.0));
  CHECK(ev(3) == doctest::Approx(6.0));

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const MarketSpec s = random_spec(rng);
    const PotentialHessian hh = potential_hessian(s);
    CHECK((hh.H - kronecker_oracle(s)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(hh.positive_definite);
    CHECK(Eigen::LLT<Matrix>(hh.H).info() == Eigen::Success);
  }
}

TEST_CASE("stable point solver") {
  const StablePointResult r = find_stable_point(figure_spec());
  CHECK(std::abs(r.theta_star(0, 0) - 0.7) <= 1e-8);
  CHECK(r.proper);
  CHECK(r.kkt_residual <= 1e-10);
  CHECK(r.supports.size() == 1);
  CHECK(r.supports[0].size() == 2);

  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const double t = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
    const int n = 1 + trial % 3;
    const Vector lambda = Vector::Constant(n, 0.3 + trial);
    const MarketSpec s(lambda, Vector::Zero(2), Matrix::Identity(2, 2), Vector::Constant(2, t));
    const StablePointResult sym = find_stable_point(s);
    for (int i = 0; i < n; ++i) CHECK(std::abs(sym.theta_star(i, 0) - 0.5) <= 1e-9);
  }

  SUBCASE("boundary stable point is found and flagged proper") {
    // b strongly favours coordinate 0: the optimum sits on the face theta_1 = 0.
    Matrix A = Matrix::Identity(2, 2);
    const MarketSpec s(Vector::Ones(1), Vector::Zero(2), A, (Vector(2) << 10.0, 0.0).finished());
    const StablePointResult b = find_stable_point(s);
    CHECK(b.theta_star(0, 0) == doctest::Approx(1.0));
    CHECK(b.supports[0] == std::vector<int>{0});
    CHECK(b.proper);
  }

  SUBCASE("budget exhaustion reports the last iterate") {
    try {
      find_stable_point(figure_spec(), 1e-14, 3);
      FAIL("expected non-convergence");
    } catch (const NonConvergenceError& e) {
      CHECK(e.residual() > 1e-14);
      CHECK(e.last_iterate().agents() == 1);
    }
  }
  CHECK_THROWS_AS(find_stable_point(figure_spec(), 0.0), ValidationError);
}

TEST_CASE("stable point matches grid minimization") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 3; ++trial) {
    const MarketSpec s = random_spec(rng, {2, 2, 2, 2});
    const StablePointResult r = find_stable_point(s);
    const GridMin g = grid_minimize(s, 2001);
    CHECK(std::abs(r.theta_star(0, 0) - g.p1) <= 1e-3);
    CHECK(std::abs(r.theta_star(1, 0) - g.p2) <= 1e-3);
  }
}

TEST_CASE("check_stable") {
  const MarketSpec s = figure_spec();
  const StablePointResult r = find_stable_point(s);
  CHECK(check_stable(s, r.theta_star, 1e-8).stable);

  const StabilityCheck off = check_stable(s, p_profile(0.2), 1e-8);
  CHECK_FALSE(off.stable);
  const GradProfile gp = grad_profile(s, p_profile(0.2));
  CHECK(std::abs(gp.grads(0, 0) - gp.grads(0, 1)) == doctest::Approx(150.0).epsilon(1e-14));
  // g = (18, 168), gbar = 138: the larger on-support deviation is 120.
  CHECK(off.residual == doctest::Approx(120.0).epsilon(1e-14));

  const StabilityCheck vertex = check_stable(s, p_profile(1.0), 1e-8);
  CHECK_FALSE(vertex.stable);
  CHECK(vertex.residual == doctest::Approx(90.0).epsilon(1e-14));
}

TEST_CASE("check_optimal agrees with check_stable") {
  CHECK(check_optimal(figure_spec(), p_profile(0.7), 1e-8));

  std::mt19937_64 rng(19);
  int stable_hits = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const MarketSpec s = random_spec(rng, {2, 2, 1, 3});
    const StablePointResult r = find_stable_point(s);
    CHECK(check_optimal(s, r.theta_star, 1e-8));
    CHECK(check_stable(s, r.theta_star, 1e-8).stable);

    const ModelProfile p = random_profile(rng, s.n(), s.d());
    CHECK(check_optimal(s, p, 1e-8) == check_stable(s, p, 1e-8).stable);

    // A profile mixing the stable point with a random vertex, to exercise
    // boundary supports.
    Matrix m = r.theta_star.matrix();
    m.row(0).setZero();
    m(0, trial % 2) = 1.0;
    const ModelProfile q(m);
    const bool a = check_optimal(s, q, 1e-8);
    CHECK(a == check_stable(s, q, 1e-8).stable);
    stable_hits += a;
  }
  CHECK(stable_hits >= 0);
}

TEST_CASE("uniqueness and global minimality") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const MarketSpec s = random_spec(rng);
    const StablePointResult base = find_stable_point(s, 1e-12);
    for (int start = 0; start < 10; ++start) {
      const StablePointResult other = find_stable_point(s, random_profile(rng, s.n(), s.d()), 1e-12);
      CHECK((other.theta_star.matrix() - base.theta_star.matrix()).cwiseAbs().maxCoeff() <= 1e-6);
    }
    for (int k = 0; k < 200; ++k) {
      CHECK(base.potential_value <= potential(s, random_profile(rng, s.n(), s.d())) + 1e-12);
    }
  }
}

TEST_CASE("project_to_simplex") {
  CHECK(project_to_simplex((Vector(3) << 0.2, 0.3, 0.5).finished()).isApprox((Vector(3) << 0.2, 0.3, 0.5).finished()));
  CHECK(project_to_simplex((Vector(2) << 3.0, -1.0).finished()) == (Vector(2) << 1.0, 0.0).finished());
  const Vector p = project_to_simplex((Vector(3) << 1.0, 1.0, 1.0).finished());
  CHECK(p.isApprox(Vector::Constant(3, 1.0 / 3.0)));
}

TEST_CASE("max |g| over the product of simplices") {
  CHECK(max_abs_gradient(figure_spec()) == doctest::Approx(210.0).epsilon(1e-15));
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const MarketSpec s = random_spec(rng);
    const double exact = max_abs_gradient(s);
    CHECK(exact == doctest::Approx(vertex_enumeration_max_gradient(s)).epsilon(1e-12));
    // dominated by the coordinate-wise interval bound
    double interval = 0.0;
    for (int k = 0; k < s.d(); ++k) {
      interval = std::max(interval, 2.0 * s.A().row(k).cwiseAbs().sum() * (1.0 + s.total_influence()) +
                                        2.0 * std::abs(s.b()(k)));
    }
    CHECK(exact <= interval + 1e-12);
  }
}

TEST_CASE("safe learning rate") {
  const MarketSpec s = figure_spec();
  const StablePointResult r = find_stable_point(s);
  const SafeRateReport rep = safe_learning_rate(s, r.theta_star);
  CHECK(rep.max_abs_gradient == doctest::Approx(210.0));
  CHECK(rep.eta_bound_gradient == doctest::Approx(1.0 / 420.0));
  CHECK(rep.eta_star <= 1.0 / 420.0);
  CHECK(rep.eta_star * rep.max_abs_gradient <= 0.5);
  CHECK(rep.C1 > 0.0);
  CHECK(rep.C2 == doctest::Approx(2.0 / 0.3).epsilon(1e-7));
  CHECK(rep.C4 == doctest::Approx(14.0 * 15.0 * 7.0));

  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const MarketSpec sp = random_spec(rng);
    const StablePointResult st = find_stable_point(sp);
    double prev = std::numeric_limits<double>::infinity();
    for (double R : {1.0, 2.0, 4.0, 8.0}) {
      const SafeRateReport q = safe_learning_rate(sp, st.theta_star, R);
      CHECK(q.eta_star > 0.0);
      CHECK(q.eta_star * q.max_abs_gradient <= 0.5);
      CHECK(q.eta_star * sp.n() * sp.d() * q.C3 * q.xi_l1_bound <= 1.0 + 1e-12);
      const double e3 = q.eta_bound_descent;
      CHECK(R * R * e3 * e3 * e3 < descent_condition_rhs(sp, q));
      CHECK(q.eta_star <= prev);
      prev = q.eta_star;
    }
  }
  CHECK_THROWS_AS(safe_learning_rate(s, r.theta_star, 0.5), ValidationError);
}
