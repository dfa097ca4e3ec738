#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sphtv/gradient.hpp"
#include "sphtv/grid.hpp"
#include "sphtv/harmonic.hpp"
#include "sphtv/prox.hpp"
#include "sphtv/rng.hpp"

namespace sphtv {

// Random masking operator: M distinct flat sample indices; its dense
// form has one unit entry per row.
struct MeasurementOp {
  std::vector<int> indices;
  int n = 0;

  int m() const { return static_cast<int>(indices.size()); }
};

inline MeasurementOp random_mask(const SphereGrid& grid, int m, std::uint64_t seed) {
  const int n = grid.n_samples();
  if (m < 0 || m > n)
    throw std::invalid_argument("random_mask: measurement count must lie in [0, sample count]");
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  Rng rng(seed);
  for (int i = 0; i < m; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(all[i], all[j]);
  }
  all.resize(m);
  MeasurementOp op;
  op.indices = std::move(all);
  op.n = n;
  return op;
}

inline std::vector<double> apply_mask(const MeasurementOp& op, const SphereImage& x) {
  if (x.grid.n_samples() != op.n)
    throw std::invalid_argument("apply_mask: image does not match the mask's grid");
  std::vector<double> y(op.indices.size());
  for (std::size_t k = 0; k < op.indices.size(); ++k) y[k] = x.v[op.indices[k]];
  return y;
}

inline SphereImage mask_adjoint(const MeasurementOp& op, const SphereGrid& grid,
                                const std::vector<double>& y) {
  if (grid.n_samples() != op.n || static_cast<int>(y.size()) != op.m())
    throw std::invalid_argument("mask_adjoint: dimension mismatch");
  SphereImage x(grid);
  for (std::size_t k = 0; k < op.indices.size(); ++k) x.v[op.indices[k]] += y[k];
  return x;
}

inline LinearOpPair mask_op_pair(const MeasurementOp& op) {
  const std::vector<int> idx = op.indices;
  const int n = op.n;
  return LinearOpPair(
      [idx](const std::vector<double>& x) {
        std::vector<double> y(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) y[k] = x[idx[k]];
        return y;
      },
      [idx, n](const std::vector<double>& y) {
        std::vector<double> x(n, 0.0);
        for (std::size_t k = 0; k < idx.size(); ++k) x[idx[k]] += y[k];
        return x;
      },
      n, static_cast<int>(idx.size()));
}

inline std::vector<double> add_noise(const std::vector<double>& y, double sigma_n,
                                     std::uint64_t seed) {
  if (sigma_n < 0.0) throw std::invalid_argument("add_noise: sigma_n must be nonnegative");
  if (sigma_n == 0.0) return y;
  Rng rng(seed);
  std::vector<double> out = y;
  for (double& v : out) v += sigma_n * rng.gaussian();
  return out;
}

// Real packing of half-coefficient vectors: (re, im) per entry, so the
// real-packed inner product equals Re<a, b>.
inline std::vector<double> pack_half(const HalfCoeffs& h) {
  std::vector<double> out(2 * h.v.size());
  for (std::size_t i = 0; i < h.v.size(); ++i) {
    out[2 * i] = h.v[i].real();
    out[2 * i + 1] = h.v[i].imag();
  }
  return out;
}

inline HalfCoeffs unpack_half(const std::vector<double>& v, int band_limit) {
  HalfCoeffs h(band_limit);
  if (v.size() != 2 * h.v.size())
    throw std::invalid_argument("unpack_half: packed size does not match the band limit");
  for (std::size_t i = 0; i < h.v.size(); ++i) h.v[i] = {v[2 * i], v[2 * i + 1]};
  return h;
}

// Lambda' = Lambda Pi acting on real-packed half-coefficients; the
// imaginary parts of the m = 0 slots lie in the null space (the
// synthesized contribution is purely imaginary and reality discards it),
// so they are zeroed on entry. The transform must outlive the pair.
inline LinearOpPair harmonic_synth_pair(const SphereTransform& tr) {
  const SphereTransform* t = &tr;
  const int L = tr.band_limit();
  const int n = tr.grid().n_samples();
  return LinearOpPair(
      [t, L, n](const std::vector<double>& xr) {
        HalfCoeffs h = unpack_half(xr, L);
        for (int el = 0; el < L; ++el) h.at(el, 0).imag(0.0);
        const HarmonicCoeffs full = conj_sym_extend(h);
        const std::vector<cplx> s = t->inverse(full.v);
        std::vector<double> out(n);
        for (int i = 0; i < n; ++i) out[i] = s[i].real();
        return out;
      },
      [t, L](const std::vector<double>& img) {
        const std::vector<cplx> s(img.begin(), img.end());
        HarmonicCoeffs full(L);
        full.v = t->inverse_adjoint(s);
        HalfCoeffs h = conj_sym_restrict(full);
        for (int el = 0; el < L; ++el) h.at(el, 0).imag(0.0);
        return pack_half(h);
      },
      L * (L + 1), n);
}

// L: (u, v) -> -synth^dagger grad~^dagger (u, v), the coupling operator
// of the TV prox.
inline LinearOpPair tv_coupling_op(const LinearOpPair& synth, const SphereGrid& grid,
                                   const QuadratureWeights& weights) {
  const int n = grid.n_samples();
  return LinearOpPair(
      [synth, grid, weights, n](const std::vector<double>& p) {
        GradientField f(grid);
        std::copy(p.begin(), p.begin() + n, f.u_tilde.begin());
        std::copy(p.begin() + n, p.end(), f.v_tilde.begin());
        std::vector<double> out = synth.adjoint(weighted_gradient_adjoint(f, weights).v);
        for (double& x : out) x = -x;
        return out;
      },
      [synth, grid, weights, n](const std::vector<double>& x) {
        SphereImage img(grid);
        img.v = synth.apply(x);
        const GradientField f = weighted_gradient(img, weights);
        std::vector<double> p(2 * static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
          p[i] = -f.u_tilde[i];
          p[n + i] = -f.v_tilde[i];
        }
        return p;
      },
      2 * n, synth.in_dim);
}

inline LinearOpPair compose_mask(const MeasurementOp& op, const LinearOpPair& synth) {
  const LinearOpPair mask = mask_op_pair(op);
  return LinearOpPair(
      [mask, synth](const std::vector<double>& x) { return mask.apply(synth.apply(x)); },
      [mask, synth](const std::vector<double>& y) { return synth.adjoint(mask.adjoint(y)); },
      synth.in_dim, mask.out_dim);
}

inline double snr_harmonic(const HarmonicCoeffs& truth, const HarmonicCoeffs& rec) {
  if (truth.band_limit != rec.band_limit)
    throw std::invalid_argument("snr_harmonic: band limits differ");
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < truth.v.size(); ++i) {
    sig += std::norm(truth.v[i]);
    err += std::norm(rec.v[i] - truth.v[i]);
  }
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(sig / err);
}

inline double snr_image(const SphereImage& truth, const SphereImage& rec,
                        const QuadratureWeights& w) {
  if (!truth.grid.same_layout(rec.grid))
    throw std::invalid_argument("snr_image: images live on different grids");
  if (truth.grid.scheme != w.scheme || truth.grid.band_limit != w.band_limit)
    throw std::invalid_argument("snr_image: weights do not match the grid");
  double sig = 0.0, err = 0.0;
  for (int t = 0; t < truth.grid.n_theta; ++t)
    for (int p = 0; p < truth.grid.n_phi; ++p) {
      const double d = rec.at(t, p) - truth.at(t, p);
      sig += w.q[t] * truth.at(t, p) * truth.at(t, p);
      err += w.q[t] * d * d;
    }
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(sig / err);
}

// Sum of unit-height indicator caps at random centres and radii; serves
// as a self-contained base map for the test-image recipe. The radius
// range controls the feature scale of the thresholded map.
inline SphereImage random_caps_map(const SphereGrid& grid, int caps, std::uint64_t seed,
                                   double radius_lo = 0.3, double radius_hi = 1.2) {
  if (caps < 1) throw std::invalid_argument("random_caps_map: need at least one cap");
  if (grid.n_samples() < 1)
    throw std::invalid_argument("random_caps_map: grid has no samples, use build_grid");
  if (!(radius_lo > 0.0 && radius_lo <= radius_hi && radius_hi <= std::numbers::pi))
    throw std::invalid_argument("random_caps_map: need 0 < radius_lo <= radius_hi <= pi");
  Rng rng(seed);
  SphereImage img(grid);
  for (int c = 0; c < caps; ++c) {
    const double ct = rng.uniform(-1.0, 1.0);
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    const double pc = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double cr = std::cos(rng.uniform(radius_lo, radius_hi));
    for (int t = 0; t < grid.n_theta; ++t) {
      const double cth = std::cos(grid.theta[t]);
      const double sth = std::sin(grid.theta[t]);
      for (int p = 0; p < grid.n_phi; ++p) {
        const double dotp = ct * cth + st * sth * std::cos(grid.phi[p] - pc);
        if (dotp > cr) img.at(t, p) += 1.0;
      }
    }
  }
  return img;
}

// Shared band-limited ground truth: threshold the base map at the
// midpoint of its range, analyze on the base grid, keep degrees below
// the target band limit scaled by exp(-l^2 sigma_s), and synthesize the
// same coefficients on both schemes' grids.
struct TestImage {
  HarmonicCoeffs coeffs;
  SphereImage mw;
  SphereImage dh;
};

inline TestImage make_test_image(int band_limit, const SphereImage& base_map, double sigma_s) {
  if (band_limit < 1) throw std::invalid_argument("make_test_image: band limit must be >= 1");
  if (sigma_s < 0.0) throw std::invalid_argument("make_test_image: sigma_s must be nonnegative");
  if (base_map.grid.band_limit < band_limit)
    throw std::invalid_argument("make_test_image: base map band limit too low");
  if (base_map.v.empty())
    throw std::invalid_argument("make_test_image: base map has no samples, use build_grid");
  const auto [mn_it, mx_it] = std::minmax_element(base_map.v.begin(), base_map.v.end());
  if (!(*mx_it > *mn_it))
    throw std::invalid_argument("make_test_image: constant base map has no midpoint threshold");
  const double mid = 0.5 * (*mn_it + *mx_it);

  SphereImage bin(base_map.grid);
  for (std::size_t i = 0; i < bin.v.size(); ++i) bin.v[i] = base_map.v[i] > mid ? 1.0 : 0.0;

  const SphereTransform base_tr(base_map.grid.scheme, base_map.grid.band_limit);
  const HarmonicCoeffs full = base_tr.analyze(bin);

  TestImage out;
  out.coeffs = HarmonicCoeffs(band_limit);
  for (int el = 0; el < band_limit; ++el) {
    const double damp = std::exp(-static_cast<double>(el) * el * sigma_s);
    for (int m = -el; m <= el; ++m) out.coeffs.at(el, m) = damp * full.at(el, m);
  }
  out.mw = SphereTransform(Scheme::mw, band_limit).synth(out.coeffs);
  out.dh = SphereTransform(Scheme::dh, band_limit).synth(out.coeffs);
  return out;
}

struct SpatialResult {
  SphereImage image;
  SolverReport report;
};

struct HarmonicResult {
  HalfCoeffs half;
  SphereImage image;
  SolverReport report;
};

namespace detail {

struct DrProblem {
  LinearOpPair synth;
  LinearOpPair meas;
  double tv_bound = 0.0;
  double meas_bound = 0.0;
};

inline std::pair<std::vector<double>, SolverReport> run_dr(
    const DrProblem& pr, const std::vector<double>& y, const SphereGrid& grid,
    const QuadratureWeights& weights, const SolverConfig& cfg) {
  TvDual warm_tv;
  std::vector<double> warm_ball;
  const auto prox_f = [&](const std::vector<double>& v) {
    return prox_tv(v, cfg.gamma, pr.synth, grid, weights, pr.tv_bound, cfg.inner_prox_iters,
                   &warm_tv);
  };
  // with a feasibility margin available (epsilon > 0) a 1e-6 stall
  // tolerance suffices: the warm-started dual tightens across outer
  // iterations; equality constraints keep the tight stall
  const double stall_tol = cfg.epsilon > 0.0 ? 1e-6 : 1e-10;
  const auto prox_g = [&, stall_tol](const std::vector<double>& v) {
    return project_data_ball(v, y, pr.meas, cfg.epsilon, pr.meas_bound, 300, stall_tol,
                             &warm_ball);
  };
  const auto objective = [&](const std::vector<double>& v) {
    SphereImage img(grid);
    img.v = pr.synth.apply(v);
    return tv_norm(img, weights);
  };
  const auto residual = [&](const std::vector<double>& v) {
    const std::vector<double> av = pr.meas.apply(v);
    double s = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) s += (y[i] - av[i]) * (y[i] - av[i]);
    return std::sqrt(s);
  };
  const std::vector<double> x0 = pr.meas.adjoint(y);
  auto [x, rep] = douglas_rachford(prox_f, prox_g, x0, cfg, objective, residual);

  // The per-step inner cap can leave the returned point a hair outside
  // the ball. One uncapped projection of the final iterate onto a
  // fractionally smaller ball lands it strictly inside; skipped for
  // equality constraints, where the composed-operator projection only
  // converges linearly and no margin exists to absorb the residue.
  if (cfg.epsilon > 0.0 && rep.residual > cfg.epsilon) {
    const auto t0 = std::chrono::steady_clock::now();
    // cold dual start: the approach is then a smooth contraction from
    // outside, so the first certified iterate sits at the boundary
    // instead of deep inside it
    x = project_data_ball(x, y, pr.meas, cfg.epsilon * (1.0 - 2e-6), pr.meas_bound, 5000, 1e-12,
                          nullptr, true);
    rep.residual = residual(x);
    rep.objective = objective(x);
    rep.converged = rep.stationary && rep.residual <= cfg.epsilon * (1.0 + 1e-6);
    rep.wall_ms +=
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  return {std::move(x), rep};
}

}  // namespace detail

// TV inpainting over the sample values, band-limited afterwards.
inline SpatialResult solve_spatial(const std::vector<double>& y, const MeasurementOp& op,
                                   const SphereTransform& tr, const QuadratureWeights& weights,
                                   const SolverConfig& cfg) {
  cfg.validate();
  const SphereGrid& g = tr.grid();
  if (op.n != g.n_samples() || static_cast<int>(y.size()) != op.m())
    throw std::invalid_argument("solve_spatial: dimension mismatch");
  const int n = g.n_samples();

  detail::DrProblem pr;
  pr.synth = LinearOpPair([](const std::vector<double>& x) { return x; },
                          [](const std::vector<double>& x) { return x; }, n, n);
  pr.meas = mask_op_pair(op);
  pr.tv_bound =
      1.01 * power_iteration_norm(tv_coupling_op(pr.synth, g, weights), 100,
                                  seed_child(cfg.seed, 101));
  pr.meas_bound = 1.01;  // selection masks have unit norm

  auto [x, rep] = detail::run_dr(pr, y, g, weights, cfg);
  SphereImage img(g);
  img.v = std::move(x);
  return {tr.band_limit(img), rep};
}

// TV inpainting over real-packed half-coefficients; the recovered image
// is band-limited by construction.
inline HarmonicResult solve_harmonic(const std::vector<double>& y, const MeasurementOp& op,
                                     const SphereTransform& tr, const QuadratureWeights& weights,
                                     const SolverConfig& cfg) {
  cfg.validate();
  const SphereGrid& g = tr.grid();
  if (op.n != g.n_samples() || static_cast<int>(y.size()) != op.m())
    throw std::invalid_argument("solve_harmonic: dimension mismatch");

  detail::DrProblem pr;
  pr.synth = harmonic_synth_pair(tr);
  pr.meas = compose_mask(op, pr.synth);
  pr.tv_bound =
      1.01 * power_iteration_norm(tv_coupling_op(pr.synth, g, weights), 100,
                                  seed_child(cfg.seed, 101));
  pr.meas_bound =
      1.01 * power_iteration_norm(pr.meas, 100, seed_child(cfg.seed, 102));
  if (!(pr.meas_bound > 0.0)) pr.meas_bound = 1.0;  // empty masks measure nothing

  auto [x, rep] = detail::run_dr(pr, y, g, weights, cfg);
  HarmonicResult out;
  out.half = unpack_half(x, tr.band_limit());
  for (int el = 0; el < tr.band_limit(); ++el) out.half.at(el, 0).imag(0.0);
  SphereImage img(g);
  img.v = pr.synth.apply(x);
  out.image = std::move(img);
  out.report = rep;
  return out;
}

enum class Domain { spatial, harmonic };

inline const char* domain_name(Domain d) { return d == Domain::spatial ? "spatial" : "harmonic"; }

// The measurement ratios M / L^2 used by the low-resolution study; the
// last entry fills the full MW sample count.
inline std::vector<double> standard_ratios(int band_limit) {
  const double l2 = static_cast<double>(band_limit) * band_limit;
  const double nmw = static_cast<double>((band_limit - 1) * (2 * band_limit - 1) + 1);
  return {0.25, 0.5, 1.0, 1.5, nmw / l2};
}

struct ExperimentConfig {
  int band_limit = 32;
  std::vector<Scheme> schemes{Scheme::mw, Scheme::dh};
  std::vector<Domain> domains{Domain::spatial, Domain::harmonic};
  std::vector<double> ratios = standard_ratios(32);
  int trials = 10;
  double sigma_n = 0.01;
  double alpha = 0.99;
  std::uint64_t master_seed = 1;
  SolverConfig solver;
  // byte-identical reruns are part of the results contract, so wall
  // times stay out of the tables unless explicitly requested
  bool zero_timings = true;
  int caps = 5;
  double cap_radius_lo = 0.3;
  double cap_radius_hi = 1.2;
  double sigma_s = 0.002;

  void validate() const {
    solver.validate();
    if (band_limit < 1) throw std::invalid_argument("ExperimentConfig: band limit must be >= 1");
    if (trials < 1) throw std::invalid_argument("ExperimentConfig: trials must be >= 1");
    if (schemes.empty() || domains.empty() || ratios.empty())
      throw std::invalid_argument("ExperimentConfig: schemes, domains, ratios must be nonempty");
    if (!(sigma_n >= 0.0)) throw std::invalid_argument("ExperimentConfig: sigma_n must be >= 0");
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("ExperimentConfig: alpha must lie in (0, 1)");
    if (caps < 1) throw std::invalid_argument("ExperimentConfig: caps must be >= 1");
    if (!(cap_radius_lo > 0.0 && cap_radius_lo <= cap_radius_hi &&
          cap_radius_hi <= std::numbers::pi))
      throw std::invalid_argument("ExperimentConfig: need 0 < cap_radius_lo <= cap_radius_hi <= pi");
    const double l2 = static_cast<double>(band_limit) * band_limit;
    for (double r : ratios) {
      if (!(r > 0.0)) throw std::invalid_argument("ExperimentConfig: ratios must be positive");
      const long m = std::lround(r * l2);
      for (Scheme s : schemes) {
        const long n = build_grid(s, band_limit).n_samples();
        if (m > n)
          throw std::invalid_argument("ExperimentConfig: ratio exceeds the sample count for " +
                                      std::string(scheme_name(s)));
      }
    }
  }
};

struct TrialResult {
  Scheme scheme = Scheme::mw;
  Domain domain = Domain::spatial;
  int ratio_index = 0;
  double ratio = 0.0;
  int trial = 0;
  int m = 0;
  double snr_db = 0.0;
  double tv_solution = 0.0;
  double tv_truth = 0.0;
  double epsilon = 0.0;
  double truth_residual = 0.0;
  SolverReport report;
  bool failed = false;
  std::string error;
};

struct CellSummary {
  Scheme scheme = Scheme::mw;
  Domain domain = Domain::spatial;
  int ratio_index = 0;
  double ratio = 0.0;
  double mean_snr_db = 0.0;
  int completed = 0;
};

struct ExperimentResults {
  ExperimentConfig config;
  std::vector<TrialResult> trials;
  std::vector<CellSummary> cells;
};

// Per-trial seed: a chained hash over (master, scheme, domain, ratio
// index, trial index), so every cell draws independent masks and noise.
inline std::uint64_t trial_seed(std::uint64_t master, Scheme s, Domain d, int ratio_index,
                                int trial) {
  std::uint64_t h = seed_child(master, s == Scheme::mw ? 1 : 2);
  h = seed_child(h, d == Domain::spatial ? 11 : 12);
  h = seed_child(h, 100 + static_cast<std::uint64_t>(ratio_index));
  h = seed_child(h, 1000 + static_cast<std::uint64_t>(trial));
  return h;
}

inline ExperimentResults run_experiment(const ExperimentConfig& cfg,
                                        std::ostream* progress = nullptr) {
  cfg.validate();
  ExperimentResults res;
  res.config = cfg;

  const SphereGrid base_grid = upsampled_grid(cfg.band_limit);
  const SphereImage base = random_caps_map(base_grid, cfg.caps, seed_child(cfg.master_seed, 0xba5e),
                                           cfg.cap_radius_lo, cfg.cap_radius_hi);
  const TestImage truth = make_test_image(cfg.band_limit, base, cfg.sigma_s);

  for (Scheme scheme : cfg.schemes) {
    const SphereTransform tr(scheme, cfg.band_limit);
    const QuadratureWeights weights = quadrature_weights(tr.grid());
    const SphereImage& truth_img = scheme == Scheme::mw ? truth.mw : truth.dh;
    const double tv_truth = tv_norm(truth_img, weights);
    for (Domain domain : cfg.domains) {
      for (int ri = 0; ri < static_cast<int>(cfg.ratios.size()); ++ri) {
        const int m = static_cast<int>(
            std::lround(cfg.ratios[ri] * cfg.band_limit * cfg.band_limit));
        for (int trial = 0; trial < cfg.trials; ++trial) {
          const std::uint64_t seed = trial_seed(cfg.master_seed, scheme, domain, ri, trial);
          TrialResult t;
          t.scheme = scheme;
          t.domain = domain;
          t.ratio_index = ri;
          t.ratio = cfg.ratios[ri];
          t.trial = trial;
          t.m = m;
          t.tv_truth = tv_truth;
          try {
            const MeasurementOp mask = random_mask(tr.grid(), m, seed_child(seed, 1));
            const std::vector<double> clean = apply_mask(mask, truth_img);
            const std::vector<double> y = add_noise(clean, cfg.sigma_n, seed_child(seed, 2));
            SolverConfig sc = cfg.solver;
            sc.epsilon = chi2_epsilon(cfg.sigma_n, std::max(m, 1), cfg.alpha);
            sc.seed = seed;
            t.epsilon = sc.epsilon;
            double nr = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) nr += (y[i] - clean[i]) * (y[i] - clean[i]);
            t.truth_residual = std::sqrt(nr);
            HarmonicCoeffs rec(cfg.band_limit);
            if (domain == Domain::spatial) {
              SpatialResult r = solve_spatial(y, mask, tr, weights, sc);
              rec = tr.analyze(r.image);
              t.tv_solution = tv_norm(r.image, weights);
              t.report = r.report;
            } else {
              HarmonicResult r = solve_harmonic(y, mask, tr, weights, sc);
              rec = conj_sym_extend(r.half);
              t.tv_solution = tv_norm(r.image, weights);
              t.report = r.report;
            }
            t.snr_db = snr_harmonic(truth.coeffs, rec);
          } catch (const std::exception& e) {
            t.failed = true;
            t.error = e.what();
            t.snr_db = std::numeric_limits<double>::quiet_NaN();
          }
          if (cfg.zero_timings) t.report.wall_ms = 0.0;
          if (progress) {
            (*progress) << scheme_name(scheme) << ' ' << domain_name(domain) << " ratio "
                        << cfg.ratios[ri] << " trial " << trial;
            if (t.failed)
              (*progress) << " failed: " << t.error << '\n';
            else
              (*progress) << " snr " << t.snr_db << " dB in " << t.report.iterations
                          << " iterations\n";
            progress->flush();
          }
          res.trials.push_back(std::move(t));
        }
      }
    }
  }

  for (Scheme scheme : cfg.schemes)
    for (Domain domain : cfg.domains)
      for (int ri = 0; ri < static_cast<int>(cfg.ratios.size()); ++ri) {
        CellSummary c;
        c.scheme = scheme;
        c.domain = domain;
        c.ratio_index = ri;
        c.ratio = cfg.ratios[ri];
        double sum = 0.0;
        for (const TrialResult& t : res.trials)
          if (t.scheme == scheme && t.domain == domain && t.ratio_index == ri && !t.failed) {
            sum += t.snr_db;
            ++c.completed;
          }
        c.mean_snr_db = c.completed > 0 ? sum / c.completed
                                        : std::numeric_limits<double>::quiet_NaN();
        res.cells.push_back(c);
      }
  return res;
}

namespace detail {
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline std::string to_csv(const ExperimentResults& res) {
  std::string out = "scheme,domain,ratio,trial,M,snr_db,iterations,residual,wall_ms\n";
  for (const TrialResult& t : res.trials) {
    out += scheme_name(t.scheme);
    out += ',';
    out += domain_name(t.domain);
    out += ',';
    out += detail::fmt_double(t.ratio);
    out += ',';
    out += std::to_string(t.trial);
    out += ',';
    out += std::to_string(t.m);
    out += ',';
    out += detail::fmt_double(t.snr_db);
    out += ',';
    out += std::to_string(t.report.iterations);
    out += ',';
    out += detail::fmt_double(t.report.residual);
    out += ',';
    out += detail::fmt_double(t.report.wall_ms);
    out += '\n';
  }
  return out;
}

}  // namespace sphtv
