#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sphtv/gradient.hpp"
#include "sphtv/grid.hpp"
#include "sphtv/harmonic.hpp"
#include "sphtv/rng.hpp"

namespace sphtv {

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline void require_finite(const std::vector<double>& a, const char* who) {
  for (double x : a)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(who) + ": non-finite input");
}

}  // namespace detail

// A linear map together with its adjoint, acting on real-packed vectors.
// Construction spot-checks <apply(a), b> = <a, adjoint(b)> on 5 random
// pairs and refuses mismatched implementations.
struct LinearOpPair {
  using Fn = std::function<std::vector<double>(const std::vector<double>&)>;

  Fn apply;
  Fn adjoint;
  int in_dim = 0;
  int out_dim = 0;

  LinearOpPair() = default;

  LinearOpPair(Fn ap, Fn ad, int in_d, int out_d, std::uint64_t check_seed = 0x5eedULL)
      : apply(std::move(ap)), adjoint(std::move(ad)), in_dim(in_d), out_dim(out_d) {
    if (in_dim < 0 || out_dim < 0)
      throw std::invalid_argument("LinearOpPair: dimensions must be nonnegative");
    Rng rng(check_seed);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> a(in_dim), b(out_dim);
      for (double& x : a) x = rng.gaussian();
      for (double& x : b) x = rng.gaussian();
      const std::vector<double> fa = apply(a);
      const std::vector<double> ab = adjoint(b);
      if (static_cast<int>(fa.size()) != out_dim || static_cast<int>(ab.size()) != in_dim)
        throw std::runtime_error("LinearOpPair: operator output dimension mismatch");
      const double lhs = detail::dot(fa, b);
      const double rhs = detail::dot(a, ab);
      const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
      if (std::abs(lhs - rhs) > 1e-10 * scale)
        throw std::runtime_error("LinearOpPair: adjoint check failed");
    }
  }
};

struct SolverConfig {
  double gamma = 1.0;
  int max_iters = 500;
  double rel_obj_tol = 1e-5;
  int inner_prox_iters = 50;
  double epsilon = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(gamma > 0.0)) throw std::invalid_argument("SolverConfig: gamma must be positive");
    if (!(rel_obj_tol > 0.0))
      throw std::invalid_argument("SolverConfig: rel_obj_tol must be positive");
    if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
    if (inner_prox_iters < 1)
      throw std::invalid_argument("SolverConfig: inner_prox_iters must be >= 1");
    if (epsilon < 0.0) throw std::invalid_argument("SolverConfig: epsilon must be nonnegative");
  }
};

struct SolverReport {
  int iterations = 0;
  double objective = 0.0;
  double residual = 0.0;
  bool stationary = false;  // objective stopped moving before the iteration cap
  bool converged = false;   // stationary and feasible
  double wall_ms = 0.0;
};

namespace detail {

// Regularized lower incomplete gamma P(a, x): series expansion below
// a + 1, Lentz continued fraction for the upper tail otherwise.
inline double reg_lower_gamma(double a, double x) {
  if (a <= 0.0 || x < 0.0)
    throw std::invalid_argument("reg_lower_gamma: requires a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int n = 0; n < 1000; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delt = d * c;
    h *= delt;
    if (std::abs(delt - 1.0) < 1e-16) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

// Noise bound epsilon = sigma_n * sqrt of the alpha-quantile of a
// chi-squared distribution with m degrees of freedom. Newton iteration
// on the regularized incomplete gamma, safeguarded by bisection.
inline double chi2_epsilon(double sigma_n, int m, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("chi2_epsilon: alpha must lie in (0, 1)");
  if (m < 1) throw std::invalid_argument("chi2_epsilon: m must be >= 1");
  if (sigma_n < 0.0) throw std::invalid_argument("chi2_epsilon: sigma_n must be nonnegative");
  if (sigma_n == 0.0) return 0.0;

  const double a = 0.5 * m;
  double lo = 0.0;
  double hi = std::max(1.0, static_cast<double>(m));
  for (int guard = 0; guard < 200 && detail::reg_lower_gamma(a, 0.5 * hi) < alpha; ++guard)
    hi *= 2.0;
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = detail::reg_lower_gamma(a, 0.5 * x) - alpha;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    const double logpdf =
        (a - 1.0) * std::log(0.5 * x) - 0.5 * x - std::lgamma(a) + std::log(0.5);
    const double pdf = std::exp(logpdf);
    double xn = (pdf > 0.0 && std::isfinite(pdf)) ? x - f / pdf : 0.5 * (lo + hi);
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    if (std::abs(xn - x) <= 1e-14 * std::max(1.0, x)) {
      x = xn;
      break;
    }
    x = xn;
  }
  return sigma_n * std::sqrt(x);
}

// Largest singular value estimate by power iteration on op^dagger op.
// The Rayleigh estimate is nondecreasing in the iteration count.
inline double power_iteration_norm(const LinearOpPair& op, int iters, std::uint64_t seed) {
  if (op.in_dim <= 0 || op.out_dim <= 0) return 0.0;
  Rng rng(seed);
  std::vector<double> v(op.in_dim);
  for (double& x : v) x = rng.gaussian();
  double nv = detail::norm2(v);
  if (nv == 0.0) return 0.0;
  for (double& x : v) x /= nv;
  double sigma = 0.0;
  for (int k = 0; k < iters; ++k) {
    const std::vector<double> w = op.apply(v);
    sigma = detail::norm2(w);
    std::vector<double> bv = op.adjoint(w);
    const double nb = detail::norm2(bv);
    if (nb == 0.0) return 0.0;
    for (double& x : bv) x /= nb;
    v = std::move(bv);
  }
  return sigma;
}

// Norm of the inverse transform estimated by applying it to the unit
// band-limited Dirac spike at the South pole: coefficients
// kappa (-1)^l sqrt((2l+1)/4pi) on m = 0, kappa = sqrt(4pi)/L.
inline double dirac_opnorm(const MwTransform& tr) {
  const int L = tr.band_limit();
  std::vector<cplx> dhat(static_cast<std::size_t>(L) * L, cplx{});
  const double kappa = std::sqrt(4.0 * std::numbers::pi) / L;
  for (int el = 0; el < L; ++el) {
    const double sign = (el & 1) ? -1.0 : 1.0;
    dhat[HarmonicCoeffs::index(el, 0)] =
        kappa * sign * std::sqrt((2.0 * el + 1.0) / (4.0 * std::numbers::pi));
  }
  const std::vector<cplx> x = tr.inverse(dhat);
  double s = 0.0;
  for (const cplx& c : x) s += std::norm(c);
  return std::sqrt(s);
}

inline double dirac_opnorm(int band_limit) {
  if (band_limit < 1) throw std::invalid_argument("dirac_opnorm: band limit must be >= 1");
  return dirac_opnorm(MwTransform(band_limit, DeltaTable(band_limit)));
}

// Dual variable of the TV prox, kept across calls for warm starts.
struct TvDual {
  std::vector<double> u, v;
};

// prox of lambda * || synth(.) ||_TV at z: dual fast gradient projection
// over per-pixel unit-disc pairs. The coupling operator is
// L: (u, v) -> -synth^dagger grad~^dagger (u, v); op_norm_bound must
// upper-bound ||L||_2 (power-iteration estimate times a safety factor).
inline std::vector<double> prox_tv(const std::vector<double>& z, double lambda,
                                   const LinearOpPair& synth, const SphereGrid& grid,
                                   const QuadratureWeights& weights, double op_norm_bound,
                                   int iters, TvDual* warm = nullptr) {
  if (!(lambda > 0.0)) throw std::invalid_argument("prox_tv: lambda must be positive");
  if (!(op_norm_bound > 0.0))
    throw std::invalid_argument("prox_tv: operator norm bound must be positive");
  detail::require_finite(z, "prox_tv");
  if (static_cast<int>(z.size()) != synth.in_dim)
    throw std::invalid_argument("prox_tv: input size does not match the synthesis operator");

  const std::size_t n = static_cast<std::size_t>(grid.n_samples());
  std::vector<double> pu(n, 0.0), pv(n, 0.0);
  if (warm && warm->u.size() == n && warm->v.size() == n) {
    pu = warm->u;
    pv = warm->v;
  }
  std::vector<double> qu = pu, qv = pv;
  std::vector<double> pu_old = pu, pv_old = pv;
  double t = 1.0;
  const double step = 1.0 / (lambda * op_norm_bound * op_norm_bound);

  const auto primal = [&](const std::vector<double>& du, const std::vector<double>& dv) {
    GradientField g(grid);
    g.u_tilde = du;
    g.v_tilde = dv;
    const SphereImage back = weighted_gradient_adjoint(g, weights);
    std::vector<double> x = synth.adjoint(back.v);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = z[i] + lambda * x[i];
    return x;
  };

  for (int k = 0; k < iters; ++k) {
    const std::vector<double> x = primal(qu, qv);
    SphereImage img(grid);
    img.v = synth.apply(x);
    const GradientField gx = weighted_gradient(img, weights);
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double mom = (t - 1.0) / t_new;
    for (std::size_t i = 0; i < n; ++i) {
      double nu = qu[i] - step * gx.u_tilde[i];
      double nv = qv[i] - step * gx.v_tilde[i];
      const double r = std::sqrt(nu * nu + nv * nv);
      if (r > 1.0) {
        nu /= r;
        nv /= r;
      }
      qu[i] = nu + mom * (nu - pu_old[i]);
      qv[i] = nv + mom * (nv - pv_old[i]);
      pu_old[i] = nu;
      pv_old[i] = nv;
    }
    t = t_new;
  }
  if (warm) {
    warm->u = pu_old;
    warm->v = pv_old;
  }
  return primal(pu_old, pv_old);
}

// Projection of x0 onto { x : || y - meas(x) ||_2 <= epsilon } by dual
// forward-backward; meas_norm_bound must upper-bound ||meas||_2. Stops
// once the dual iterate stalls to dual_tol relative change and, for
// epsilon > 0, the primal point is feasible to a 5e-7 relative margin;
// max_inner caps the iteration count either way. With stop_when_feasible
// the loop instead returns the first iterate whose feasibility was
// certified in-loop, trading projection accuracy for a guarantee.
inline std::vector<double> project_data_ball(const std::vector<double>& x0,
                                             const std::vector<double>& y,
                                             const LinearOpPair& meas, double epsilon,
                                             double meas_norm_bound, int max_inner = 200,
                                             double dual_tol = 1e-8,
                                             std::vector<double>* warm = nullptr,
                                             bool stop_when_feasible = false) {
  if (epsilon < 0.0) throw std::invalid_argument("project_data_ball: epsilon must be >= 0");
  detail::require_finite(x0, "project_data_ball");
  if (static_cast<int>(x0.size()) != meas.in_dim || static_cast<int>(y.size()) != meas.out_dim)
    throw std::invalid_argument("project_data_ball: dimension mismatch");
  if (meas.out_dim == 0) return x0;

  {
    const std::vector<double> ax = meas.apply(x0);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - ax[i]) * (y[i] - ax[i]);
    if (std::sqrt(s) <= epsilon) return x0;
  }

  if (!(meas_norm_bound > 0.0))
    throw std::invalid_argument("project_data_ball: operator norm bound must be positive");
  const double tau = 1.0 / (meas_norm_bound * meas_norm_bound);
  const double feas_target = epsilon * (1.0 + 5e-7) + 1e-10;

  std::vector<double> u(y.size(), 0.0);
  if (warm && warm->size() == y.size()) u = *warm;

  for (int k = 0; k < max_inner; ++k) {
    // gradient of the smooth dual part: meas(meas^dagger u - x0) + y,
    // which is also y - meas(x) for the current primal point
    std::vector<double> d = meas.adjoint(u);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= x0[i];
    std::vector<double> g = meas.apply(d);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += y[i];
    const bool feasible = detail::norm2(g) <= feas_target;
    if (stop_when_feasible && feasible) break;  // u unchanged, so x0 - meas^dagger u is certified
    std::vector<double> zv(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) zv[i] = u[i] - tau * g[i];
    const double nz = detail::norm2(zv);
    double shrink = 1.0;
    if (epsilon > 0.0) shrink = (nz > 0.0) ? std::max(0.0, 1.0 - tau * epsilon / nz) : 0.0;
    double change2 = 0.0, size2 = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double un = shrink * zv[i];
      change2 += (un - u[i]) * (un - u[i]);
      size2 += un * un;
      u[i] = un;
    }
    const bool stalled = std::sqrt(change2) <= dual_tol * std::max(std::sqrt(size2), 1e-30);
    if (stalled && (feasible || epsilon == 0.0)) break;
  }
  std::vector<double> au = meas.adjoint(u);
  std::vector<double> x(x0.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = x0[i] - au[i];
  if (warm) *warm = u;
  return x;
}

using ProxFn = std::function<std::vector<double>(const std::vector<double>&)>;
using ScalarFn = std::function<double(const std::vector<double>&)>;

// Douglas-Rachford splitting; the returned point is the prox_g side,
// which for a constraint-set prox_g is always feasible. Stops when the
// objective's relative change drops below cfg.rel_obj_tol.
inline std::pair<std::vector<double>, SolverReport> douglas_rachford(
    const ProxFn& prox_f, const ProxFn& prox_g, const std::vector<double>& x0,
    const SolverConfig& cfg, const ScalarFn& objective, const ScalarFn& residual) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const auto check_finite = [](const std::vector<double>& a, int iter) {
    for (double x : a)
      if (!std::isfinite(x))
        throw std::runtime_error("douglas_rachford: non-finite iterate at iteration " +
                                 std::to_string(iter));
  };

  std::vector<double> s = x0;
  std::vector<double> x = prox_g(s);
  check_finite(x, 0);
  double obj = objective(x);
  bool stopped = false;
  int used = 0;
  int hits = 0;  // a single objective plateau mid-trajectory is not convergence
  for (int k = 1; k <= cfg.max_iters; ++k) {
    used = k;
    std::vector<double> refl(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) refl[i] = 2.0 * x[i] - s[i];
    check_finite(refl, k);  // before the prox guards can misreport it as bad input
    const std::vector<double> r = prox_f(refl);
    double s_move = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double delta = r[i] - x[i];
      s[i] += delta;
      s_move = std::max(s_move, std::abs(delta));
    }
    check_finite(s, k);
    std::vector<double> xn = prox_g(s);
    check_finite(xn, k);
    double x_move = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) x_move = std::max(x_move, std::abs(xn[i] - x[i]));
    const double objn = objective(xn);
    const double change = std::abs(objn - obj);
    const double scale = std::max(std::abs(obj), 1e-12);
    x = std::move(xn);
    obj = objn;
    if (s_move == 0.0 && x_move == 0.0) {
      stopped = true;
      break;
    }
    hits = (change <= cfg.rel_obj_tol * scale) ? hits + 1 : 0;
    if (hits >= 3) {
      stopped = true;
      break;
    }
  }

  SolverReport rep;
  rep.iterations = used;
  rep.objective = obj;
  rep.residual = residual(x);
  // the absolute floor only applies to equality constraints, where exact
  // zero is unattainable in floating point
  const double feas_slack = cfg.epsilon > 0.0 ? 0.0 : 1e-9;
  rep.stationary = stopped;
  rep.converged = stopped && rep.residual <= cfg.epsilon * (1.0 + 1e-6) + feas_slack;
  rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return {std::move(x), rep};
}

}  // namespace sphtv
