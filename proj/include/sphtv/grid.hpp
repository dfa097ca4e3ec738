#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace sphtv {

enum class Scheme { mw, dh };

inline const char* scheme_name(Scheme s) { return s == Scheme::mw ? "mw" : "dh"; }

// Equiangular sample layout. Both schemes use n_phi = 2L-1 longitudes
// phi_p = 2*pi*p/(2L-1). Colatitudes:
//   MW: theta_t = pi(2t+1)/(2L-1), t = 0..L-1   (last ring exactly at pi)
//   DH: theta_t = pi(2t+1)/(4L),   t = 0..2L-1  (poles excluded)
// The full n_theta x n_phi lattice is stored row-major by (t, p); the
// MW South-pole ring is redundant and counted once in n_distinct.
struct SphereGrid {
  Scheme scheme = Scheme::mw;
  int band_limit = 0;
  int n_theta = 0;
  int n_phi = 0;
  std::vector<double> theta;
  std::vector<double> phi;

  int n_samples() const { return n_theta * n_phi; }

  long n_distinct() const {
    const long L = band_limit;
    if (scheme == Scheme::mw) return (L - 1) * (2 * L - 1) + 1;
    return 2 * L * (2 * L - 1);
  }

  bool same_layout(const SphereGrid& o) const {
    return scheme == o.scheme && band_limit == o.band_limit;
  }
};

inline SphereGrid build_grid(Scheme scheme, int band_limit) {
  if (band_limit < 1) throw std::invalid_argument("build_grid: band limit must be >= 1");
  SphereGrid g;
  g.scheme = scheme;
  g.band_limit = band_limit;
  const int L = band_limit;
  g.n_theta = (scheme == Scheme::mw) ? L : 2 * L;
  g.n_phi = 2 * L - 1;
  g.theta.resize(g.n_theta);
  for (int t = 0; t < g.n_theta; ++t) {
    const double denom = (scheme == Scheme::mw) ? (2.0 * L - 1.0) : (4.0 * L);
    g.theta[t] = std::numbers::pi * (2.0 * t + 1.0) / denom;
  }
  g.phi.resize(g.n_phi);
  for (int p = 0; p < g.n_phi; ++p)
    g.phi[p] = 2.0 * std::numbers::pi * p / g.n_phi;
  return g;
}

// MW grid at band limit 2L-1, fine enough to represent squared signals.
inline SphereGrid upsampled_grid(int band_limit) {
  if (band_limit < 1) throw std::invalid_argument("upsampled_grid: band limit must be >= 1");
  return build_grid(Scheme::mw, 2 * band_limit - 1);
}

// w(m) = int_0^pi e^{i m theta} sin(theta) dtheta.
// Shared by the MW quadrature construction and the forward-transform
// convolution stage.
inline std::complex<double> theta_sin_fourier(int m) {
  if (m == 0) return {2.0, 0.0};
  if (m == 1) return {0.0, std::numbers::pi / 2.0};
  if (m == -1) return {0.0, -std::numbers::pi / 2.0};
  if (m % 2 == 0) return {2.0 / (1.0 - static_cast<double>(m) * m), 0.0};
  return {0.0, 0.0};
}

// Per-ring weights q(theta_t), folded with the 2*pi/n_phi longitude factor:
// sum_{t,p} q(theta_t) f(theta_t, phi_p) integrates band-limited f exactly.
struct QuadratureWeights {
  Scheme scheme = Scheme::mw;
  int band_limit = 0;
  std::vector<double> q;  // one entry per theta ring
};

inline QuadratureWeights quadrature_weights(const SphereGrid& g) {
  QuadratureWeights w;
  w.scheme = g.scheme;
  w.band_limit = g.band_limit;
  const int L = g.band_limit;
  if (g.scheme == Scheme::mw) {
    // Fourier method: fold Q(theta) = (2pi/n) sum_m w(m) e^{-im theta},
    // evaluated on the extended theta nodes theta_j = pi(2j+1)/n,
    // back onto the stored rings, then scale by 1/n.
    const int n = 2 * L - 1;
    std::vector<double> qext(n);
    for (int j = 0; j < n; ++j) {
      const double th = std::numbers::pi * (2.0 * j + 1.0) / n;
      std::complex<double> acc = theta_sin_fourier(0);
      for (int m = 1; m <= L - 1; ++m) {
        const std::complex<double> e{std::cos(m * th), -std::sin(m * th)};
        acc += theta_sin_fourier(m) * e + theta_sin_fourier(-m) * std::conj(e);
      }
      qext[j] = 2.0 * std::numbers::pi / n * acc.real();
    }
    w.q.resize(L);
    for (int t = 0; t < L; ++t) {
      double v = qext[t];
      if (t <= L - 2) v += qext[2 * L - 2 - t];
      w.q[t] = v / n;
    }
  } else {
    // Classical sine-sum weights, normalized so the unit function
    // integrates to exactly 4*pi.
    const int nt = 2 * L;
    w.q.resize(nt);
    double total = 0.0;
    for (int t = 0; t < nt; ++t) {
      const double th = g.theta[t];
      double s = 0.0;
      for (int k = 0; k < L; ++k) s += std::sin((2.0 * k + 1.0) * th) / (2.0 * k + 1.0);
      w.q[t] = std::sin(th) * s;
      total += w.q[t];
    }
    const double c = 4.0 * std::numbers::pi / (g.n_phi * total);
    for (double& v : w.q) v *= c;
  }
  return w;
}

// Real sample vector bound to a grid, row-major by (t, p).
struct SphereImage {
  SphereGrid grid;
  std::vector<double> v;

  SphereImage() = default;
  explicit SphereImage(SphereGrid g) : grid(std::move(g)), v(grid.n_samples(), 0.0) {}

  double& at(int t, int p) { return v[static_cast<std::size_t>(t) * grid.n_phi + p]; }
  double at(int t, int p) const { return v[static_cast<std::size_t>(t) * grid.n_phi + p]; }
};

inline double integrate(const SphereImage& x, const QuadratureWeights& w) {
  if (x.grid.scheme != w.scheme || x.grid.band_limit != w.band_limit)
    throw std::invalid_argument("integrate: image and weights disagree on scheme or band limit");
  double total = 0.0;
  for (int t = 0; t < x.grid.n_theta; ++t) {
    double row = 0.0;
    for (int p = 0; p < x.grid.n_phi; ++p) row += x.at(t, p);
    total += w.q[t] * row;
  }
  return total;
}

}  // namespace sphtv
