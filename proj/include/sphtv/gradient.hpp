#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sphtv/grid.hpp"

namespace sphtv {

// A ring whose colatitude sits on the South pole: sin(theta) = 0 there,
// so the phi difference is zeroed instead of divided by sin(theta).
inline bool south_pole_ring(double theta) {
  return std::abs(theta - std::numbers::pi) <= 1e-14;
}

// Weighted gradient samples (u~, v~) = grad~ x over the (t, p) lattice.
// u~ carries the q(theta_t)-scaled theta difference, v~ the
// q(theta_t)/sin(theta_t)-scaled phi difference, zero on pole rings.
struct GradientField {
  SphereGrid grid;
  std::vector<double> u_tilde;
  std::vector<double> v_tilde;

  GradientField() = default;
  explicit GradientField(SphereGrid g)
      : grid(std::move(g)),
        u_tilde(grid.n_samples(), 0.0),
        v_tilde(grid.n_samples(), 0.0) {}

  double& u(int t, int p) { return u_tilde[static_cast<std::size_t>(t) * grid.n_phi + p]; }
  double u(int t, int p) const { return u_tilde[static_cast<std::size_t>(t) * grid.n_phi + p]; }
  double& v(int t, int p) { return v_tilde[static_cast<std::size_t>(t) * grid.n_phi + p]; }
  double v(int t, int p) const { return v_tilde[static_cast<std::size_t>(t) * grid.n_phi + p]; }
};

namespace detail {
inline void require_samples(std::size_t have, const SphereGrid& g, const char* who) {
  if (have != static_cast<std::size_t>(g.n_samples()))
    throw std::invalid_argument(std::string(who) + ": sample count does not match the grid");
}
}  // namespace detail

// Forward theta difference: u_{t,p} = x_{t+1,p} - x_{t,p}, zero on the
// last ring.
inline std::vector<double> delta_theta(const SphereImage& x) {
  detail::require_samples(x.v.size(), x.grid, "delta_theta");
  const int nt = x.grid.n_theta, np = x.grid.n_phi;
  std::vector<double> u(x.v.size(), 0.0);
  for (int t = 0; t + 1 < nt; ++t)
    for (int p = 0; p < np; ++p)
      u[static_cast<std::size_t>(t) * np + p] = x.at(t + 1, p) - x.at(t, p);
  return u;
}

inline SphereImage delta_theta_adjoint(const std::vector<double>& u, const SphereGrid& grid) {
  detail::require_samples(u.size(), grid, "delta_theta_adjoint");
  const int nt = grid.n_theta, np = grid.n_phi;
  SphereImage x(grid);
  for (int t = 0; t < nt; ++t)
    for (int p = 0; p < np; ++p) {
      double a = 0.0;
      if (t > 0) a += u[static_cast<std::size_t>(t - 1) * np + p];
      if (t < nt - 1) a -= u[static_cast<std::size_t>(t) * np + p];
      x.at(t, p) = a;
    }
  return x;
}

// Periodic phi difference: v_{t,p} = x_{t,p+1} - x_{t,p} with p+1 taken
// modulo n_phi.
inline std::vector<double> delta_phi(const SphereImage& x) {
  detail::require_samples(x.v.size(), x.grid, "delta_phi");
  const int nt = x.grid.n_theta, np = x.grid.n_phi;
  std::vector<double> v(x.v.size(), 0.0);
  for (int t = 0; t < nt; ++t)
    for (int p = 0; p < np; ++p)
      v[static_cast<std::size_t>(t) * np + p] = x.at(t, (p + 1) % np) - x.at(t, p);
  return v;
}

inline SphereImage delta_phi_adjoint(const std::vector<double>& v, const SphereGrid& grid) {
  detail::require_samples(v.size(), grid, "delta_phi_adjoint");
  const int nt = grid.n_theta, np = grid.n_phi;
  SphereImage x(grid);
  for (int t = 0; t < nt; ++t)
    for (int p = 0; p < np; ++p) {
      const int prev = (p + np - 1) % np;
      x.at(t, p) = v[static_cast<std::size_t>(t) * np + prev] -
                   v[static_cast<std::size_t>(t) * np + p];
    }
  return x;
}

namespace detail {
inline void require_same_layout(const SphereGrid& g, const QuadratureWeights& w, const char* who) {
  if (g.scheme != w.scheme || g.band_limit != w.band_limit)
    throw std::invalid_argument(std::string(who) + ": weights disagree on scheme or band limit");
}

// Ring scale applied to the phi difference; zero on pole rings.
inline double phi_scale(double q, double theta) {
  return south_pole_ring(theta) ? 0.0 : q / std::sin(theta);
}
}  // namespace detail

inline GradientField weighted_gradient(const SphereImage& x, const QuadratureWeights& w) {
  detail::require_same_layout(x.grid, w, "weighted_gradient");
  detail::require_samples(x.v.size(), x.grid, "weighted_gradient");
  const int nt = x.grid.n_theta, np = x.grid.n_phi;
  GradientField g(x.grid);
  const auto du = delta_theta(x);
  const auto dv = delta_phi(x);
  for (int t = 0; t < nt; ++t) {
    const double qs = w.q[t];
    const double vs = detail::phi_scale(qs, x.grid.theta[t]);
    for (int p = 0; p < np; ++p) {
      const std::size_t i = static_cast<std::size_t>(t) * np + p;
      g.u_tilde[i] = qs * du[i];
      g.v_tilde[i] = vs * dv[i];
    }
  }
  return g;
}

inline SphereImage weighted_gradient_adjoint(const GradientField& g, const QuadratureWeights& w) {
  detail::require_same_layout(g.grid, w, "weighted_gradient_adjoint");
  detail::require_samples(g.u_tilde.size(), g.grid, "weighted_gradient_adjoint");
  detail::require_samples(g.v_tilde.size(), g.grid, "weighted_gradient_adjoint");
  const int nt = g.grid.n_theta, np = g.grid.n_phi;
  std::vector<double> su(g.u_tilde.size()), sv(g.v_tilde.size());
  for (int t = 0; t < nt; ++t) {
    const double qs = w.q[t];
    const double vs = detail::phi_scale(qs, g.grid.theta[t]);
    for (int p = 0; p < np; ++p) {
      const std::size_t i = static_cast<std::size_t>(t) * np + p;
      su[i] = qs * g.u_tilde[i];
      sv[i] = vs * g.v_tilde[i];
    }
  }
  SphereImage x = delta_theta_adjoint(su, g.grid);
  const SphereImage xv = delta_phi_adjoint(sv, g.grid);
  for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] += xv.v[i];
  return x;
}

// Discrete TV norm: sum over samples of |grad~ x| = sqrt(u~^2 + v~^2).
inline double tv_norm(const SphereImage& x, const QuadratureWeights& w) {
  const GradientField g = weighted_gradient(x, w);
  double total = 0.0;
  for (std::size_t i = 0; i < g.u_tilde.size(); ++i)
    total += std::sqrt(g.u_tilde[i] * g.u_tilde[i] + g.v_tilde[i] * g.v_tilde[i]);
  return total;
}

}  // namespace sphtv
