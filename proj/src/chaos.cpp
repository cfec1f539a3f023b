#include "perfdyn/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace perfdyn {

namespace {

void require_two_features(const MarketSpec& spec) {
  if (spec.d() != 2) throw ValidationError("reduced map: requires d = 2, got d = " + std::to_string(spec.d()));
}

double curvature(const MarketSpec& spec) {
  const Matrix& A = spec.A();
  return A(0, 0) - A(0, 1) - A(1, 0) + A(1, 1);
}

// exp(-u (x - v)) with the exponent clamped to +-kExponentClamp.
double inverse_growth(const ReducedMapParams& p, double x) {
  return std::exp(std::clamp(-p.u * (x - p.v), -kExponentClamp, kExponentClamp));
}

void require_unit_interval(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) throw ValidationError(std::string(what) + ": x must lie in [0, 1]");
}

}  // namespace

double beta_infinity(const MarketSpec& spec) {
  require_two_features(spec);
  return (spec.A()(1, 1) - spec.A()(1, 0)) / curvature(spec);
}

ReducedMapParams alpha_beta(const MarketSpec& spec, double eta, double L) {
  require_two_features(spec);
  const Matrix& A = spec.A();
  if (!(A(0, 0) > std::abs(A(0, 1))) || !(A(1, 1) > std::abs(A(1, 0)))) {
    throw ValidationError("reduced map: A must be diagonally dominant");
  }
  if (!(eta > 0.0)) throw ValidationError("reduced map: eta must be positive");
  if (!(L >= 0.0)) throw ValidationError("reduced map: L must be nonnegative");
  const double D = curvature(spec);
  const Vector& b = spec.b();
  ReducedMapParams p;
  p.u = 2.0 * eta * (1.0 + L) * D;
  p.v = ((1.0 + L) * (A(1, 1) - A(1, 0)) + (b(0) - b(1))) / ((1.0 + L) * D);
  MapOrigin origin;
  origin.eta = eta;
  origin.L = L;
  origin.beta_inf = beta_infinity(spec);
  origin.delta = p.v - origin.beta_inf;
  p.origin = origin;
  return p;
}

double reduced_map(const ReducedMapParams& params, double x) {
  require_unit_interval(x, "reduced_map");
  const double F = inverse_growth(params, x);
  return x * F / (x * F + (1.0 - x));
}

double map_derivative(const ReducedMapParams& params, double x) {
  require_unit_interval(x, "map_derivative");
  // f' = F (1 - u x (1 - x)) / (x F + 1 - x)^2 with F = exp(-u (x - v)).
  const double F = inverse_growth(params, x);
  const double denom = x * F + (1.0 - x);
  return F * (1.0 - params.u * x * (1.0 - x)) / (denom * denom);
}

Period3Outcome period3_certificate(const ReducedMapParams& params) {
  if (!(params.u > 1.0)) throw ValidationError("period3_certificate: requires u > 1");
  if (!(params.v > 0.0 && params.v < 1.0)) throw ValidationError("period3_certificate: requires v in (0, 1)");
  const double v = params.v;
  const double x1 = 1.0 - 1.0 / params.u;
  const double y = v / 2.0;
  const double fy = reduced_map(params, y);
  if (!(fy > x1)) {
    return Period3Failure{Period3Violation::LeftBracket,
                          "left bracket f(v/2) > x1 fails: f(" + std::to_string(y) + ") = " +
                              std::to_string(fy) + " <= x1 = " + std::to_string(x1)};
  }
  if (!(v < x1)) {
    return Period3Failure{Period3Violation::RightBracket,
                          "right bracket f(v) = v < x1 fails: v = " + std::to_string(v) +
                              " >= x1 = " + std::to_string(x1)};
  }

  // f(lo) > x1 > f(hi) throughout.
  double lo = y;
  double hi = v;
  double x0 = 0.5 * (lo + hi);
  double best = std::numeric_limits<double>::infinity();
  double best_x = x0;
  for (int iter = 0; iter < 400; ++iter) {
    x0 = 0.5 * (lo + hi);
    const double gap = reduced_map(params, x0) - x1;
    if (std::abs(gap) < best) {
      best = std::abs(gap);
      best_x = x0;
    }
    if (std::abs(gap) <= 1e-12 || !(lo < x0 && x0 < hi)) break;
    (gap > 0.0 ? lo : hi) = x0;
  }
  x0 = best_x;

  Period3Certificate cert;
  cert.params = params;
  cert.x0 = x0;
  cert.x1 = x1;
  cert.x2 = reduced_map(params, x1);
  cert.x3 = reduced_map(params, cert.x2);
  cert.margin_x0_x3 = cert.x0 - cert.x3;
  cert.margin_x1_x0 = cert.x1 - cert.x0;
  cert.residual = std::abs(reduced_map(params, x0) - x1);
  if (!(cert.x3 < cert.x0 && cert.x0 < cert.x1)) {
    return Period3Failure{Period3Violation::Ordering,
                          "ordering x3 < x0 < x1 fails: x3 = " + std::to_string(cert.x3) +
                              ", x0 = " + std::to_string(cert.x0) + ", x1 = " + std::to_string(cert.x1)};
  }
  return cert;
}

namespace {

std::optional<Period3Certificate> certify_at(const MarketSpec& spec, double eta, double L) {
  const ReducedMapParams p = alpha_beta(spec, eta, L);
  if (!(p.u > 1.0) || !(p.v > 0.0 && p.v < 1.0)) return std::nullopt;
  Period3Outcome out = period3_certificate(p);
  if (auto* cert = std::get_if<Period3Certificate>(&out)) return *cert;
  return std::nullopt;
}

}  // namespace

CarryingCapacity carrying_capacity(const MarketSpec& spec, double eta, double L_min, double L_max,
                                   double tol) {
  require_two_features(spec);
  if (!(L_min < L_max)) throw ValidationError("carrying_capacity: need L_min < L_max");
  if (!(L_min >= 0.0)) throw ValidationError("carrying_capacity: L_min must be nonnegative");
  if (!(tol > 0.0)) throw ValidationError("carrying_capacity: tol must be positive");

  CarryingCapacity out;
  const double binf = beta_infinity(spec);
  if (binf == 0.5) throw ValidationError("carrying_capacity: beta_inf = 1/2 is excluded");
  const MarketSpec work = binf > 0.5 ? spec.permuted({1, 0}) : spec;
  out.permuted = binf > 0.5;
  const double b = beta_infinity(work);
  if (!(b > 0.0 && b < 0.5)) throw ValidationError("carrying_capacity: beta_inf outside (0, 1/2)");

  auto top = certify_at(work, eta, L_max);
  if (!top) {
    throw NumericalError("carrying_capacity: no certificate at L_max = " + std::to_string(L_max) +
                         "; try a larger L_max");
  }
  double hi = L_max;
  Period3Certificate best = *top;
  if (auto bottom = certify_at(work, eta, L_min)) {
    hi = L_min;
    best = *bottom;
  } else {
    double lo = L_min;
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      if (auto cert = certify_at(work, eta, mid)) {
        hi = mid;
        best = *cert;
      } else {
        lo = mid;
      }
    }
  }
  out.L_star = hi;
  out.certificate = best;

  constexpr int kGrid = 32;
  for (int j = 0; j < kGrid; ++j) {
    const double L = hi + (L_max - hi) * j / (kGrid - 1);
    if (!certify_at(work, eta, L)) {
      out.monotone_above = false;
      break;
    }
  }
  return out;
}

double lyapunov_exponent(const ReducedMapParams& params, double x0, long burn_in, long iters) {
  if (!(x0 > 0.0 && x0 < 1.0)) throw ValidationError("lyapunov_exponent: x0 must be interior");
  if (iters < 1000) throw ValidationError("lyapunov_exponent: iters must be >= 1000");
  if (burn_in < 0) throw ValidationError("lyapunov_exponent: burn_in must be >= 0");
  constexpr double kEndpoint = 1e-300;
  auto check = [](double x, long t) {
    if (x < kEndpoint || 1.0 - x < kEndpoint) {
      throw NumericalError("lyapunov_exponent: orbit reached an endpoint at iteration " + std::to_string(t));
    }
  };
  double x = x0;
  for (long t = 0; t < burn_in; ++t) {
    x = reduced_map(params, x);
    check(x, t);
  }
  double sum = 0.0;
  for (long t = 0; t < iters; ++t) {
    sum += std::log(std::abs(map_derivative(params, x)));
    x = reduced_map(params, x);
    check(x, burn_in + t);
  }
  return sum / static_cast<double>(iters);
}

std::vector<BifurcationRow> bifurcation_scan(const MarketSpec& spec, double eta,
                                             const std::vector<double>& L_grid, double x0,
                                             long burn_in, long samples, unsigned threads) {
  if (samples < 1) throw ValidationError("bifurcation_scan: samples must be >= 1");
  if (burn_in < 0) throw ValidationError("bifurcation_scan: burn_in must be >= 0");
  require_unit_interval(x0, "bifurcation_scan");

  std::vector<std::vector<BifurcationRow>> cells(L_grid.size());
  // Parameter validation happens up front so worker threads never throw.
  std::vector<ReducedMapParams> params;
  params.reserve(L_grid.size());
  for (double L : L_grid) params.push_back(alpha_beta(spec, eta, L));

  auto run_cell = [&](std::size_t c) {
    const ReducedMapParams& p = params[c];
    double lyap = std::numeric_limits<double>::quiet_NaN();
    if (x0 > 0.0 && x0 < 1.0) {
      try {
        lyap = lyapunov_exponent(p, x0, burn_in, std::max<long>(samples, 1000));
      } catch (const NumericalError&) {
      }
    }
    double x = x0;
    for (long t = 0; t < burn_in; ++t) x = reduced_map(p, x);
    auto& rows = cells[c];
    rows.reserve(samples);
    for (long s = 0; s < samples; ++s) {
      rows.push_back({L_grid[c], p.u, p.v, s, x, lyap});
      x = reduced_map(p, x);
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(L_grid.size())));
  if (workers == 1) {
    for (std::size_t c = 0; c < L_grid.size(); ++c) run_cell(c);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < L_grid.size(); c += workers) run_cell(c);
      });
    }
  }

  std::vector<BifurcationRow> rows;
  rows.reserve(L_grid.size() * static_cast<std::size_t>(samples));
  for (auto& cell : cells) rows.insert(rows.end(), cell.begin(), cell.end());
  return rows;
}

PairGaps li_yorke_pair_scan(const ReducedMapParams& params, double x, double x_prime, long horizon) {
  if (x == x_prime) throw ValidationError("li_yorke_pair_scan: x and x' must differ");
  if (!(x > 0.0 && x < 1.0) || !(x_prime > 0.0 && x_prime < 1.0)) {
    throw ValidationError("li_yorke_pair_scan: points must be interior");
  }
  if (horizon < 1000) throw ValidationError("li_yorke_pair_scan: horizon must be >= 1000");
  PairGaps out{std::numeric_limits<double>::infinity(), 0.0};
  const long tail_start = horizon / 2;
  for (long t = 1; t <= horizon; ++t) {
    x = reduced_map(params, x);
    x_prime = reduced_map(params, x_prime);
    const double gap = std::abs(x - x_prime);
    out.min_gap = std::min(out.min_gap, gap);
    if (t >= tail_start) out.max_gap = std::max(out.max_gap, gap);
  }
  return out;
}

}  // namespace perfdyn
