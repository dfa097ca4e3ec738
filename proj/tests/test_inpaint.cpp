#include <catch2/catch_amalgamated.hpp>

#include <sphtv/inpaint.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <set>
#include <vector>

#include "test_util.hpp"

using namespace sphtv;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

SphereImage binary_threshold(const SphereImage& src) {
  const auto [mn, mx] = std::minmax_element(src.v.begin(), src.v.end());
  const double mid = 0.5 * (*mn + *mx);
  SphereImage out(src.grid);
  for (std::size_t i = 0; i < src.v.size(); ++i) out.v[i] = src.v[i] > mid ? 1.0 : 0.0;
  return out;
}

}  // namespace

TEST_CASE("random mask draws distinct indices deterministically") {
  const SphereGrid g = build_grid(Scheme::mw, 32);
  const MeasurementOp op = random_mask(g, 512, 42);
  REQUIRE(op.m() == 512);
  REQUIRE(op.n == g.n_samples());
  std::set<int> seen(op.indices.begin(), op.indices.end());
  REQUIRE(seen.size() == 512);
  for (int i : op.indices) {
    REQUIRE(i >= 0);
    REQUIRE(i < g.n_samples());
  }
  const MeasurementOp again = random_mask(g, 512, 42);
  REQUIRE(again.indices == op.indices);
  const MeasurementOp other = random_mask(g, 512, 43);
  REQUIRE(other.indices != op.indices);
}

TEST_CASE("full mask covers every sample and empty mask is allowed") {
  const SphereGrid g = build_grid(Scheme::dh, 4);
  const MeasurementOp full = random_mask(g, g.n_samples(), 7);
  std::vector<int> sorted = full.indices;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < g.n_samples(); ++i) REQUIRE(sorted[i] == i);

  const MeasurementOp empty = random_mask(g, 0, 7);
  REQUIRE(empty.m() == 0);

  REQUIRE_THROWS_AS(random_mask(g, g.n_samples() + 1, 7), std::invalid_argument);
  REQUIRE_THROWS_AS(random_mask(g, -1, 7), std::invalid_argument);
}

TEST_CASE("mask apply and adjoint are gather and scatter") {
  const SphereGrid g = build_grid(Scheme::mw, 6);
  const int n = g.n_samples();
  const MeasurementOp op = random_mask(g, 25, 3);

  SphereImage x(g);
  Rng rng(11);
  for (double& v : x.v) v = rng.gaussian();

  const std::vector<double> y = apply_mask(op, x);
  for (int k = 0; k < op.m(); ++k) REQUIRE(y[k] == x.v[op.indices[k]]);

  // full mask reorders the samples
  const MeasurementOp full = random_mask(g, n, 5);
  std::vector<double> yf = apply_mask(full, x);
  std::sort(yf.begin(), yf.end());
  std::vector<double> xs = x.v;
  std::sort(xs.begin(), xs.end());
  REQUIRE(yf == xs);

  // scatter of ones marks the measured set
  const SphereImage ind = mask_adjoint(op, g, std::vector<double>(op.m(), 1.0));
  std::set<int> measured(op.indices.begin(), op.indices.end());
  for (int i = 0; i < n; ++i) REQUIRE(ind.v[i] == (measured.count(i) ? 1.0 : 0.0));

  SphereImage bad(build_grid(Scheme::mw, 7));
  REQUIRE_THROWS_AS(apply_mask(op, bad), std::invalid_argument);
  REQUIRE_THROWS_AS(mask_adjoint(op, g, std::vector<double>(op.m() + 1, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("mask adjoint identity holds over random pairs") {
  const SphereGrid g = build_grid(Scheme::dh, 5);
  const int n = g.n_samples();
  Rng rng(17);
  for (int rep = 0; rep < 100; ++rep) {
    const int m = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const MeasurementOp op = random_mask(g, m, rng.next_u64());
    SphereImage x(g);
    for (double& v : x.v) v = rng.gaussian();
    std::vector<double> y(m);
    for (double& v : y) v = rng.gaussian();
    const std::vector<double> ax = apply_mask(op, x);
    const SphereImage aty = mask_adjoint(op, g, y);
    double lhs = 0.0, rhs = 0.0;
    for (int k = 0; k < m; ++k) lhs += ax[k] * y[k];
    for (int i = 0; i < n; ++i) rhs += x.v[i] * aty.v[i];
    REQUIRE(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("mask operator pair passes the built-in adjoint check") {
  const SphereGrid g = build_grid(Scheme::mw, 8);
  const MeasurementOp op = random_mask(g, 60, 9);
  const LinearOpPair pair = mask_op_pair(op);
  REQUIRE(pair.in_dim == g.n_samples());
  REQUIRE(pair.out_dim == 60);
}

TEST_CASE("noise is deterministic, zero-sigma is exact, variance matches") {
  std::vector<double> y(1000, 2.5);
  REQUIRE(add_noise(y, 0.0, 123) == y);

  const std::vector<double> a = add_noise(y, 0.01, 123);
  const std::vector<double> b = add_noise(y, 0.01, 123);
  REQUIRE(a == b);
  REQUIRE(a != y);

  REQUIRE_THROWS_AS(add_noise(y, -0.1, 1), std::invalid_argument);

  const double sigma = 0.01;
  const std::vector<double> big(1000000, 0.0);
  const std::vector<double> noisy = add_noise(big, sigma, 777);
  double mean = 0.0;
  for (double v : noisy) mean += v;
  mean /= static_cast<double>(noisy.size());
  double var = 0.0;
  for (double v : noisy) var += (v - mean) * (v - mean);
  var /= static_cast<double>(noisy.size() - 1);
  REQUIRE(var == Catch::Approx(sigma * sigma).epsilon(0.01));
}

TEST_CASE("half-coefficient packing round trips and checks sizes") {
  const int L = 5;
  HalfCoeffs h(L);
  Rng rng(4);
  for (auto& c : h.v) c = {rng.gaussian(), rng.gaussian()};
  const std::vector<double> packed = pack_half(h);
  REQUIRE(static_cast<int>(packed.size()) == L * (L + 1));
  const HalfCoeffs back = unpack_half(packed, L);
  REQUIRE(back.v == h.v);
  REQUIRE_THROWS_AS(unpack_half(packed, L + 1), std::invalid_argument);
}

TEST_CASE("harmonic synthesis pair maps half-coefficients to real images") {
  const SphereTransform tr(Scheme::mw, 6);
  const LinearOpPair pair = harmonic_synth_pair(tr);  // ctor verifies adjointness
  REQUIRE(pair.in_dim == 6 * 7);
  REQUIRE(pair.out_dim == tr.grid().n_samples());

  // unit (0,0) coefficient synthesizes the constant Y_00 = 1/sqrt(4 pi)
  std::vector<double> x(pair.in_dim, 0.0);
  x[0] = 1.0;
  const std::vector<double> img = pair.apply(x);
  const double c = 1.0 / std::sqrt(4.0 * std::numbers::pi);
  for (double v : img) REQUIRE(v == Catch::Approx(c).margin(1e-12));

  // imaginary parts of m = 0 slots lie in the null space
  std::vector<double> x2 = x;
  for (int el = 0; el < 6; ++el) x2[2 * HalfCoeffs::index(el, 0) + 1] = 3.0;
  REQUIRE(max_abs_diff(pair.apply(x2), img) == 0.0);
}

TEST_CASE("harmonic synthesis adjoint matches direct inner products") {
  const SphereTransform tr(Scheme::dh, 5);
  const LinearOpPair pair = harmonic_synth_pair(tr);
  Rng rng(21);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(pair.in_dim), y(pair.out_dim);
    for (double& v : x) v = rng.gaussian();
    for (double& v : y) v = rng.gaussian();
    const std::vector<double> ax = pair.apply(x);
    const std::vector<double> aty = pair.adjoint(y);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) lhs += ax[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * aty[i];
    REQUIRE(std::abs(lhs - rhs) <= 1e-10 * std::max({1.0, std::abs(lhs), std::abs(rhs)}));
  }
}

TEST_CASE("tv coupling with identity synthesis equals the negated gradient pair") {
  const SphereGrid g = build_grid(Scheme::mw, 5);
  const QuadratureWeights w = quadrature_weights(g);
  const int n = g.n_samples();
  const LinearOpPair ident([](const std::vector<double>& x) { return x; },
                           [](const std::vector<double>& x) { return x; }, n, n);
  const LinearOpPair op = tv_coupling_op(ident, g, w);
  REQUIRE(op.in_dim == 2 * n);
  REQUIRE(op.out_dim == n);

  Rng rng(33);
  SphereImage x(g);
  for (double& v : x.v) v = rng.gaussian();
  const GradientField gf = weighted_gradient(x, w);
  const std::vector<double> back = op.adjoint(x.v);
  for (int i = 0; i < n; ++i) {
    REQUIRE(back[i] == -gf.u_tilde[i]);
    REQUIRE(back[n + i] == -gf.v_tilde[i]);
  }

  GradientField f(g);
  for (double& v : f.u_tilde) v = rng.gaussian();
  for (double& v : f.v_tilde) v = rng.gaussian();
  std::vector<double> p(2 * n);
  std::copy(f.u_tilde.begin(), f.u_tilde.end(), p.begin());
  std::copy(f.v_tilde.begin(), f.v_tilde.end(), p.begin() + n);
  const SphereImage div = weighted_gradient_adjoint(f, w);
  const std::vector<double> fwd = op.apply(p);
  for (int i = 0; i < n; ++i) REQUIRE(fwd[i] == -div.v[i]);
}

TEST_CASE("test image construction rejects degenerate inputs") {
  const SphereGrid g = build_grid(Scheme::mw, 8);
  SphereImage flat(g);
  for (double& v : flat.v) v = 3.0;
  REQUIRE_THROWS_AS(make_test_image(8, flat, 0.002), std::invalid_argument);

  const SphereImage caps = random_caps_map(g, 5, 1);
  REQUIRE_THROWS_AS(make_test_image(9, caps, 0.002), std::invalid_argument);
  REQUIRE_THROWS_AS(make_test_image(8, caps, -1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(make_test_image(0, caps, 0.002), std::invalid_argument);
}

TEST_CASE("huge smoothing collapses the test image to a constant") {
  const SphereGrid g = build_grid(Scheme::mw, 8);
  const SphereImage caps = random_caps_map(g, 5, 2);
  const TestImage t = make_test_image(8, caps, 1e6);
  for (int el = 1; el < 8; ++el)
    for (int m = -el; m <= el; ++m) REQUIRE(std::abs(t.coeffs.at(el, m)) <= 1e-300);
  const double c0 = t.mw.v[0];
  for (double v : t.mw.v) REQUIRE(v == Catch::Approx(c0).margin(1e-12));
}

TEST_CASE("test image is band-limited and smoother than its binary source") {
  const int L = 16;
  const SphereGrid g = build_grid(Scheme::mw, L);
  const SphereImage caps = random_caps_map(g, 5, 6);
  const TestImage t = make_test_image(L, caps, 0.002);

  REQUIRE(t.mw.grid.same_layout(build_grid(Scheme::mw, L)));
  REQUIRE(t.dh.grid.same_layout(build_grid(Scheme::dh, L)));

  // synthesized from explicit coefficients, so re-band-limiting is a no-op
  const SphereTransform tr(Scheme::mw, L);
  const SphereImage again = tr.band_limit(t.mw);
  REQUIRE(max_abs_diff(again.v, t.mw.v) <= 1e-10);

  // both grids realize the same coefficients
  const HarmonicCoeffs from_dh = SphereTransform(Scheme::dh, L).analyze(t.dh);
  double cd = 0.0;
  for (std::size_t i = 0; i < from_dh.v.size(); ++i)
    cd = std::max(cd, std::abs(from_dh.v[i] - t.coeffs.v[i]));
  REQUIRE(cd <= 1e-10);
}

TEST_CASE("smoothing lowers the tv norm of the binary source at protocol scale") {
  // at L = 32 the Gaussian damps the top of the band to exp(-1.92); at
  // much smaller band limits the same sigma_s leaves ringing that can
  // raise the tv norm instead
  const int L = 32;
  const SphereGrid base_g = upsampled_grid(L);
  const QuadratureWeights w = quadrature_weights(base_g);
  const SphereImage caps = random_caps_map(base_g, 5, 6);
  const SphereImage bin = binary_threshold(caps);
  const TestImage t = make_test_image(L, caps, 0.002);

  HarmonicCoeffs pad(base_g.band_limit);
  for (int el = 0; el < L; ++el)
    for (int m = -el; m <= el; ++m) pad.at(el, m) = t.coeffs.at(el, m);
  const SphereImage fine = SphereTransform(base_g.scheme, base_g.band_limit).synth(pad);
  REQUIRE(tv_norm(fine, w) < tv_norm(bin, w));
}

TEST_CASE("harmonic snr follows the log-ratio formula") {
  HarmonicCoeffs truth(4);
  Rng rng(8);
  for (auto& c : truth.v) c = {rng.gaussian(), rng.gaussian()};

  REQUIRE(std::isinf(snr_harmonic(truth, truth)));
  REQUIRE(snr_harmonic(truth, truth) > 0.0);

  HarmonicCoeffs scaled = truth;
  for (auto& c : scaled.v) c *= 1.1;  // error norm = 0.1 signal norm
  REQUIRE(snr_harmonic(truth, scaled) == Catch::Approx(20.0).margin(1e-10));

  const HarmonicCoeffs zero(4);
  REQUIRE(snr_harmonic(truth, zero) == Catch::Approx(0.0).margin(1e-10));

  REQUIRE_THROWS_AS(snr_harmonic(truth, HarmonicCoeffs(5)), std::invalid_argument);
}

TEST_CASE("image snr uses quadrature-weighted energies") {
  const SphereGrid g = build_grid(Scheme::mw, 6);
  const QuadratureWeights w = quadrature_weights(g);
  SphereImage truth(g);
  Rng rng(12);
  for (double& v : truth.v) v = rng.gaussian();

  REQUIRE(std::isinf(snr_image(truth, truth, w)));

  SphereImage rec = truth;
  for (double& v : rec.v) v *= 1.1;  // weighted energy ratio 0.01
  REQUIRE(snr_image(truth, rec, w) == Catch::Approx(20.0).margin(1e-10));

  SphereImage other(build_grid(Scheme::mw, 7));
  REQUIRE_THROWS_AS(snr_image(truth, other, w), std::invalid_argument);
  const QuadratureWeights wrong = quadrature_weights(build_grid(Scheme::dh, 6));
  REQUIRE_THROWS_AS(snr_image(truth, truth, wrong), std::invalid_argument);
}

TEST_CASE("noiseless full sampling recovers the truth in both domains") {
  const int L = 8;
  const SphereTransform tr(Scheme::mw, L);
  const QuadratureWeights w = quadrature_weights(tr.grid());
  const SphereImage base = random_caps_map(upsampled_grid(L), 5, 31);
  const TestImage truth = make_test_image(L, base, 0.002);

  const MeasurementOp mask = random_mask(tr.grid(), tr.grid().n_samples(), 5);
  const std::vector<double> y = apply_mask(mask, truth.mw);

  SolverConfig cfg;
  cfg.epsilon = 0.0;
  cfg.seed = 2;

  const SpatialResult sp = solve_spatial(y, mask, tr, w, cfg);
  REQUIRE(sp.report.residual <= 1e-9);
  REQUIRE(snr_harmonic(truth.coeffs, tr.analyze(sp.image)) >= 80.0);
  const SphereImage sp_again = tr.band_limit(sp.image);
  REQUIRE(max_abs_diff(sp_again.v, sp.image.v) <= 1e-9);

  // the equality projection through the composed harmonic operator
  // converges linearly, so its residual plateaus above the spatial one
  const HarmonicResult hr = solve_harmonic(y, mask, tr, w, cfg);
  REQUIRE(hr.report.residual <= 1e-5);
  REQUIRE(snr_harmonic(truth.coeffs, conj_sym_extend(hr.half)) >= 80.0);

  // the recovered coefficients synthesize to a real image
  const std::vector<cplx> cimg = tr.inverse(conj_sym_extend(hr.half).v);
  double max_imag = 0.0;
  for (const cplx& v : cimg) max_imag = std::max(max_imag, std::abs(v.imag()));
  REQUIRE(max_imag <= 1e-10);
}

TEST_CASE("undersampled noiseless recovery stays feasible with truth-level tv") {
  const int L = 8;
  const SphereTransform tr(Scheme::mw, L);
  const QuadratureWeights w = quadrature_weights(tr.grid());
  const SphereImage base = random_caps_map(upsampled_grid(L), 5, 31);
  const TestImage truth = make_test_image(L, base, 0.002);

  const MeasurementOp mask = random_mask(tr.grid(), 60, 77);
  const std::vector<double> y = apply_mask(mask, truth.mw);

  SolverConfig cfg;
  cfg.epsilon = 0.0;
  cfg.seed = 3;

  const SpatialResult sp = solve_spatial(y, mask, tr, w, cfg);
  REQUIRE(sp.report.residual <= 1e-8);
  REQUIRE(tv_norm(sp.image, w) <= 1.05 * tv_norm(truth.mw, w));

  const HarmonicResult hr = solve_harmonic(y, mask, tr, w, cfg);
  REQUIRE(hr.report.residual <= 1e-2);
  REQUIRE(tv_norm(hr.image, w) <= 1.05 * tv_norm(truth.mw, w));
}

TEST_CASE("solver entry points validate their inputs") {
  const SphereTransform tr(Scheme::mw, 4);
  const QuadratureWeights w = quadrature_weights(tr.grid());
  const MeasurementOp op = random_mask(tr.grid(), 10, 1);
  const std::vector<double> y(10, 0.0);
  SolverConfig cfg;

  const MeasurementOp wrong = random_mask(build_grid(Scheme::mw, 5), 10, 1);
  REQUIRE_THROWS_AS(solve_spatial(y, wrong, tr, w, cfg), std::invalid_argument);
  REQUIRE_THROWS_AS(solve_harmonic(y, wrong, tr, w, cfg), std::invalid_argument);
  REQUIRE_THROWS_AS(solve_spatial(std::vector<double>(9, 0.0), op, tr, w, cfg),
                    std::invalid_argument);

  SolverConfig bad;
  bad.gamma = 0.0;
  REQUIRE_THROWS_AS(solve_spatial(y, op, tr, w, bad), std::invalid_argument);
}

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg;
  cfg.band_limit = 8;
  cfg.ratios = {0.5};
  cfg.trials = 1;
  cfg.validate();

  ExperimentConfig big = cfg;
  big.ratios = {100.0};  // 6400 > both sample counts at L = 8
  REQUIRE_THROWS_AS(big.validate(), std::invalid_argument);

  ExperimentConfig zero = cfg;
  zero.trials = 0;
  REQUIRE_THROWS_AS(zero.validate(), std::invalid_argument);

  ExperimentConfig alpha = cfg;
  alpha.alpha = 1.0;
  REQUIRE_THROWS_AS(alpha.validate(), std::invalid_argument);

  ExperimentConfig noise = cfg;
  noise.sigma_n = -0.5;
  REQUIRE_THROWS_AS(noise.validate(), std::invalid_argument);

  ExperimentConfig ratio = cfg;
  ratio.ratios = {0.0};
  REQUIRE_THROWS_AS(ratio.validate(), std::invalid_argument);
}

TEST_CASE("standard ratios end at the full mw sample count") {
  const std::vector<double> r = standard_ratios(32);
  REQUIRE(r.size() == 5);
  REQUIRE(r[0] == 0.25);
  REQUIRE(r[3] == 1.5);
  REQUIRE(std::lround(r[4] * 32 * 32) == build_grid(Scheme::mw, 32).n_distinct());
}

TEST_CASE("single noiseless full-sampling experiment entry reaches 80 dB") {
  ExperimentConfig cfg;
  cfg.band_limit = 8;
  cfg.schemes = {Scheme::mw};
  cfg.domains = {Domain::spatial};
  const double full = static_cast<double>(build_grid(Scheme::mw, 8).n_samples()) / 64.0;
  cfg.ratios = {full};
  cfg.trials = 1;
  cfg.sigma_n = 0.0;
  cfg.master_seed = 9;
  cfg.zero_timings = true;

  const ExperimentResults res = run_experiment(cfg);
  REQUIRE(res.trials.size() == 1);
  REQUIRE_FALSE(res.trials[0].failed);
  REQUIRE(res.trials[0].m == build_grid(Scheme::mw, 8).n_samples());
  REQUIRE(res.trials[0].snr_db >= 80.0);
  REQUIRE(res.cells.size() == 1);
  REQUIRE(res.cells[0].completed == 1);
  REQUIRE(res.cells[0].mean_snr_db >= 80.0);
}

TEST_CASE("experiments are deterministic down to csv bytes") {
  ExperimentConfig cfg;
  cfg.band_limit = 6;
  cfg.ratios = {0.5, 1.0};
  cfg.trials = 1;
  cfg.master_seed = 4;
  cfg.zero_timings = true;
  cfg.solver.max_iters = 60;
  cfg.solver.inner_prox_iters = 20;

  const ExperimentResults a = run_experiment(cfg);
  const ExperimentResults b = run_experiment(cfg);
  const std::string csv_a = to_csv(a);
  REQUIRE(csv_a == to_csv(b));
  REQUIRE(a.trials.size() == 2 * 2 * 2);  // schemes x domains x ratios, 1 trial
  REQUIRE(csv_a.rfind("scheme,domain,ratio,trial,M,snr_db,iterations,residual,wall_ms\n", 0) ==
          0);
  REQUIRE(std::count(csv_a.begin(), csv_a.end(), '\n') == 9);

  ExperimentConfig other = cfg;
  other.master_seed = 5;
  REQUIRE(to_csv(run_experiment(other)) != csv_a);
}

TEST_CASE("feasible truth keeps the solution tv within five percent") {
  ExperimentConfig cfg;
  cfg.band_limit = 6;
  cfg.schemes = {Scheme::mw};
  cfg.domains = {Domain::spatial, Domain::harmonic};
  cfg.ratios = {1.0};
  cfg.trials = 2;
  cfg.master_seed = 14;

  const ExperimentResults res = run_experiment(cfg);
  for (const TrialResult& t : res.trials) {
    REQUIRE_FALSE(t.failed);
    if (t.truth_residual <= t.epsilon) REQUIRE(t.tv_solution <= 1.05 * t.tv_truth);
  }
}
