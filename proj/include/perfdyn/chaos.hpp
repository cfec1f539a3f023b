#pragma once

// One-dimensional reduction of the symmetric two-feature dynamics,
//
//     f_{u,v}(x) = x / (x + (1 - x) exp(u (x - v))),
//
// with a constructive period-three certificate and chaos diagnostics.
//
// When n agents share a model p = theta_1 and a common rate eta, one round
// of exponentiated gradient maps p to f_{alpha(L), beta(L)}(p) with
//
//     alpha(L) = 2 eta (1 + L) D,   D = A11 - A12 - A21 + A22,
//     beta(L)  = ((1 + L)(A22 - A21) + (b1 - b2)) / ((1 + L) D).

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "perfdyn/model.hpp"

namespace perfdyn {

inline constexpr double kExponentClamp = 700.0;

struct MapOrigin {
  double eta = 0.0;
  double L = 0.0;
  double beta_inf = 0.0;
  double delta = 0.0;  // beta(L) - beta_inf
};

struct ReducedMapParams {
  double u = 0.0;  // steepness
  double v = 0.5;  // interior fixed point
  std::optional<MapOrigin> origin;
};

/// Throws ValidationError unless d = 2 and A is (strictly) diagonally dominant.
ReducedMapParams alpha_beta(const MarketSpec& spec, double eta, double L);

/// beta_inf = (A22 - A21) / D for a d = 2 spec.
double beta_infinity(const MarketSpec& spec);

double reduced_map(const ReducedMapParams& params, double x);
double map_derivative(const ReducedMapParams& params, double x);

struct Period3Certificate {
  double x0 = 0.0;
  double x1 = 0.0;
  double x2 = 0.0;
  double x3 = 0.0;
  ReducedMapParams params;
  double margin_x0_x3 = 0.0;  // x0 - x3
  double margin_x1_x0 = 0.0;  // x1 - x0
  double residual = 0.0;      // |f(x0) - x1|
};

enum class Period3Violation {
  LeftBracket,   // f(v/2) <= x1
  RightBracket,  // v >= x1
  Ordering,      // x3 < x0 < x1 does not hold
};

struct Period3Failure {
  Period3Violation violation;
  std::string reason;
};

using Period3Outcome = std::variant<Period3Certificate, Period3Failure>;

/// x1 = 1 - 1/u, x2 = f(x1), x3 = f(x2), and x0 in (v/2, v) with f(x0) = x1
/// found by bisection.  Requires u > 1 (ValidationError otherwise).
Period3Outcome period3_certificate(const ReducedMapParams& params);

struct CarryingCapacity {
  double L_star = 0.0;  // smallest certified L found by bisection
  bool permuted = false;  // coordinates swapped so beta_inf < 1/2
  bool monotone_above = true;  // certificate held on the whole check grid above L_star
  Period3Certificate certificate;
};

/// Smallest L in [L_min, L_max] (to width tol) where the period-three
/// certificate succeeds for f_{alpha(L), beta(L)}.
CarryingCapacity carrying_capacity(const MarketSpec& spec, double eta, double L_min, double L_max,
                                   double tol);

/// Orbit average of ln |f'(x_t)| after burn_in iterations.
double lyapunov_exponent(const ReducedMapParams& params, double x0, long burn_in, long iters);

struct BifurcationRow {
  double L = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  long sample_index = 0;
  double x = 0.0;
  double lyapunov = 0.0;  // NaN when the orbit degenerates onto an endpoint
};

/// For each L: burn_in iterations from x0, then `samples` successive states.
/// Cells are independent and may be evaluated on `threads` workers; rows come
/// back in grid order.
std::vector<BifurcationRow> bifurcation_scan(const MarketSpec& spec, double eta,
                                             const std::vector<double>& L_grid, double x0,
                                             long burn_in, long samples, unsigned threads = 1);

struct PairGaps {
  double min_gap = 0.0;  // min over 1 <= t <= horizon
  double max_gap = 0.0;  // max over horizon/2 <= t <= horizon
};

/// Finite-horizon proxy for the liminf / limsup of |f^t(x) - f^t(x')|.
/// A diagnostic, not a proof of a Li-Yorke pair.
PairGaps li_yorke_pair_scan(const ReducedMapParams& params, double x, double x_prime, long horizon);

}  // namespace perfdyn
