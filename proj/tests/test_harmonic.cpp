#include <catch2/catch_amalgamated.hpp>

#include <sphtv/grid.hpp>
#include <sphtv/harmonic.hpp>
#include <sphtv/rng.hpp>
#include <sphtv/wigner.hpp>

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace sphtv;
using testutil::max_abs_diff;
constexpr double kPi = std::numbers::pi;

namespace {

// densify a complex-linear operator column by column
template <class Fn>
Eigen::MatrixXcd densify(std::size_t in_dim, std::size_t out_dim, Fn&& apply) {
  Eigen::MatrixXcd A(out_dim, in_dim);
  std::vector<cplx> e(in_dim, cplx{});
  for (std::size_t j = 0; j < in_dim; ++j) {
    e[j] = 1.0;
    const std::vector<cplx> col = apply(e);
    for (std::size_t i = 0; i < out_dim; ++i) A(i, j) = col[i];
    e[j] = 0.0;
  }
  return A;
}

}  // namespace

TEST_CASE("coefficient indexing") {
  CHECK(HarmonicCoeffs::index(0, 0) == 0);
  CHECK(HarmonicCoeffs::index(1, -1) == 1);
  CHECK(HarmonicCoeffs::index(1, 0) == 2);
  CHECK(HarmonicCoeffs::index(1, 1) == 3);
  CHECK(HarmonicCoeffs::index(2, -2) == 4);
  CHECK(HalfCoeffs::index(1, 0) == 1);
  CHECK(HalfCoeffs::index(2, 2) == 5);
}

TEST_CASE("mw inverse of the constant coefficient") {
  MwTransform tr(4);
  HarmonicCoeffs xh(4);
  xh.at(0, 0) = 1.0;
  const auto f = tr.inverse(xh.v);
  for (const cplx& s : f) {
    CHECK(s.real() == Catch::Approx(1.0 / (2.0 * std::sqrt(kPi))).epsilon(1e-12));
    CHECK(std::abs(s.imag()) < 1e-14);
  }
}

TEST_CASE("mw synthesis matches the naive oracle at L = 8") {
  const int L = 8;
  MwTransform tr(L);
  Rng rng(31);
  const auto flm = testutil::random_cvec(static_cast<std::size_t>(L) * L, rng);
  const auto fast = tr.inverse(flm);
  const auto slow = oracle::naive_synthesis(flm, tr.grid());
  CHECK(max_abs_diff(fast, slow) <= 1e-11);
}

TEST_CASE("mw analysis matches quadrature analysis on the upsampled grid") {
  // Diagonal quadrature on the native L-ring grid cannot be exact for
  // analysis (the integrand f * conj(Y) has theta bandwidth 2L-2); the
  // independent oracle therefore samples the same band-limited signal on
  // the upsampled grid, where plain quadrature is exact.
  const int L = 8;
  MwTransform tr(L);
  Rng rng(32);
  const auto flm = testutil::random_cvec(static_cast<std::size_t>(L) * L, rng);
  const auto fast = tr.forward(tr.inverse(flm));

  const SphereGrid up = upsampled_grid(L);
  const QuadratureWeights upw = quadrature_weights(up);
  std::vector<cplx> padded(static_cast<std::size_t>(up.band_limit) * up.band_limit, cplx{});
  for (int el = 0; el < L; ++el)
    for (int m = -el; m <= el; ++m)
      padded[HarmonicCoeffs::index(el, m)] = flm[HarmonicCoeffs::index(el, m)];
  const auto f_up = oracle::naive_synthesis(padded, up);
  const auto slow_up = oracle::naive_analysis(f_up, up, upw);
  double worst = 0.0;
  for (int el = 0; el < L; ++el)
    for (int m = -el; m <= el; ++m)
      worst = std::max(worst, std::abs(fast[HarmonicCoeffs::index(el, m)] -
                                       slow_up[HarmonicCoeffs::index(el, m)]));
  CHECK(worst <= 1e-11);
}

TEST_CASE("mw round trip at L = 32") {
  const int L = 32;
  MwTransform tr(L);
  Rng rng(33);
  const auto flm = testutil::random_cvec(static_cast<std::size_t>(L) * L, rng);
  CHECK(max_abs_diff(tr.forward(tr.inverse(flm)), flm) <= 1e-10);
}

TEST_CASE("dh round trip at L = 32") {
  const int L = 32;
  DhTransform tr(L);
  Rng rng(34);
  const auto flm = testutil::random_cvec(static_cast<std::size_t>(L) * L, rng);
  CHECK(max_abs_diff(tr.forward(tr.inverse(flm)), flm) <= 1e-9);
}

TEST_CASE("dh synthesis and analysis match the naive oracle at L = 6") {
  const int L = 6;
  DhTransform tr(L);
  Rng rng(35);
  const auto flm = testutil::random_cvec(static_cast<std::size_t>(L) * L, rng);
  const auto fast = tr.inverse(flm);
  const auto slow = oracle::naive_synthesis(flm, tr.grid());
  CHECK(max_abs_diff(fast, slow) <= 1e-11);
  const auto back = tr.forward(fast);
  const auto slow_back = oracle::naive_analysis(slow, tr.grid(), tr.weights());
  CHECK(max_abs_diff(back, slow_back) <= 1e-11);
}

TEST_CASE("constant image analyzes to a pure monopole") {
  for (Scheme s : {Scheme::mw, Scheme::dh}) {
    SphereTransform tr(s, 8);
    SphereImage x(tr.grid());
    std::fill(x.v.begin(), x.v.end(), 0.75);
    const HarmonicCoeffs xh = tr.analyze(x);
    CHECK(xh.at(0, 0).real() == Catch::Approx(2.0 * 0.75 * std::sqrt(kPi)).epsilon(1e-10));
    for (std::size_t i = 1; i < xh.v.size(); ++i) CHECK(std::abs(xh.v[i]) < 1e-10);
  }
}

TEST_CASE("dirac coefficients peak on the south pole ring") {
  const int L = 8;
  MwTransform tr(L);
  HarmonicCoeffs xh(L);
  const double kappa = std::sqrt(4.0 * kPi) / L;
  for (int el = 0; el < L; ++el) {
    const double sg = (el & 1) ? -1.0 : 1.0;
    xh.at(el, 0) = kappa * sg * std::sqrt((2.0 * el + 1.0) / (4.0 * kPi));
  }
  const auto f = tr.inverse(xh.v);
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (std::abs(f[i]) > std::abs(f[argmax])) argmax = i;
  const int t = static_cast<int>(argmax) / tr.grid().n_phi;
  CHECK(t == L - 1);
}

TEST_CASE("cross-scheme consistency at L = 16") {
  const int L = 16;
  const DeltaTable dt(L);
  MwTransform mw(L, dt);
  DhTransform dh(L, dt);
  Rng rng(36);
  const HarmonicCoeffs xh = testutil::random_real_coeffs(L, rng);
  const auto mw_back = mw.forward(mw.inverse(xh.v));
  const auto dh_back = dh.forward(dh.inverse(xh.v));
  CHECK(max_abs_diff(mw_back, dh_back) <= 1e-9);
}

TEST_CASE("all four mw operators match their densified counterparts") {
  for (int L : {2, 4, 8}) {
    MwTransform tr(L);
    const std::size_t nc = static_cast<std::size_t>(L) * L;
    const std::size_t ns = static_cast<std::size_t>(L) * (2 * L - 1);
    const auto Lam = densify(nc, ns, [&](const std::vector<cplx>& v) { return tr.inverse(v); });
    const auto LamAdj =
        densify(ns, nc, [&](const std::vector<cplx>& v) { return tr.inverse_adjoint(v); });
    const auto Gam = densify(ns, nc, [&](const std::vector<cplx>& v) { return tr.forward(v); });
    const auto GamAdj =
        densify(nc, ns, [&](const std::vector<cplx>& v) { return tr.forward_adjoint(v); });
    INFO("L = " << L);
    CHECK((LamAdj - Lam.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((GamAdj - Gam.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
    // and the round-trip identity as matrices
    CHECK((Gam * Lam - Eigen::MatrixXcd::Identity(nc, nc)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("dh adjoint operators match their densified counterparts") {
  for (int L : {2, 4}) {
    DhTransform tr(L);
    const std::size_t nc = static_cast<std::size_t>(L) * L;
    const std::size_t ns = static_cast<std::size_t>(2 * L) * (2 * L - 1);
    const auto Lam = densify(nc, ns, [&](const std::vector<cplx>& v) { return tr.inverse(v); });
    const auto LamAdj =
        densify(ns, nc, [&](const std::vector<cplx>& v) { return tr.inverse_adjoint(v); });
    const auto Gam = densify(ns, nc, [&](const std::vector<cplx>& v) { return tr.forward(v); });
    const auto GamAdj =
        densify(nc, ns, [&](const std::vector<cplx>& v) { return tr.forward_adjoint(v); });
    INFO("L = " << L);
    CHECK((LamAdj - Lam.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((GamAdj - Gam.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((Gam * Lam - Eigen::MatrixXcd::Identity(nc, nc)).cwiseAbs().maxCoeff() <= 1e-11);
  }
}

TEST_CASE("randomized adjoint identities at L = 32") {
  const int L = 32;
  const DeltaTable dt(L);
  MwTransform tr(L, dt);
  Rng rng(37);
  const std::size_t nc = static_cast<std::size_t>(L) * L;
  const std::size_t ns = static_cast<std::size_t>(L) * (2 * L - 1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = testutil::random_cvec(nc, rng);
    const auto b = testutil::random_cvec(ns, rng);
    cplx lhs{}, rhs{};
    const auto La = tr.inverse(a);
    const auto Ltb = tr.inverse_adjoint(b);
    for (std::size_t i = 0; i < ns; ++i) lhs += La[i] * std::conj(b[i]);
    for (std::size_t i = 0; i < nc; ++i) rhs += a[i] * std::conj(Ltb[i]);
    double scale = 0.0;
    for (const auto& c : a) scale += std::norm(c);
    double sb = 0.0;
    for (const auto& c : b) sb += std::norm(c);
    scale = std::sqrt(scale * sb);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * scale);

    const auto Gb = tr.forward(b);
    const auto Gta = tr.forward_adjoint(a);
    cplx lhs2{}, rhs2{};
    for (std::size_t i = 0; i < nc; ++i) lhs2 += Gb[i] * std::conj(a[i]);
    for (std::size_t i = 0; i < ns; ++i) rhs2 += b[i] * std::conj(Gta[i]);
    CHECK(std::abs(lhs2 - rhs2) <= 1e-10 * scale);
  }
}

TEST_CASE("conjugate symmetry extension and its adjoint") {
  const int L = 8;
  Rng rng(38);

  HalfCoeffs bad(L);
  bad.at(2, 0) = {0.0, 1e-6};
  REQUIRE_THROWS_AS(conj_sym_extend(bad), std::invalid_argument);

  HalfCoeffs zero(L);
  const HarmonicCoeffs z = conj_sym_extend(zero);
  for (const auto& c : z.v) CHECK(c == cplx{});

  // extend then synthesize: real image
  MwTransform tr(L);
  HalfCoeffs h(L);
  for (int el = 0; el < L; ++el) {
    h.at(el, 0) = {rng.gaussian(), 0.0};
    for (int m = 1; m <= el; ++m) h.at(el, m) = {rng.gaussian(), rng.gaussian()};
  }
  const auto img = tr.inverse(conj_sym_extend(h).v);
  CHECK(testutil::max_abs_imag(img) <= 1e-10);

  // adjoint identity in the real inner product
  for (int trial = 0; trial < 50; ++trial) {
    HalfCoeffs a(L);
    for (int el = 0; el < L; ++el) {
      a.at(el, 0) = {rng.gaussian(), 0.0};
      for (int m = 1; m <= el; ++m) a.at(el, m) = {rng.gaussian(), rng.gaussian()};
    }
    HarmonicCoeffs b(L);
    for (auto& c : b.v) c = {rng.gaussian(), rng.gaussian()};
    const HarmonicCoeffs Pa = conj_sym_extend(a);
    const HalfCoeffs Ptb = conj_sym_restrict(b);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < Pa.v.size(); ++i)
      lhs += Pa.v[i].real() * b.v[i].real() + Pa.v[i].imag() * b.v[i].imag();
    for (std::size_t i = 0; i < a.v.size(); ++i)
      rhs += a.v[i].real() * Ptb.v[i].real() + a.v[i].imag() * Ptb.v[i].imag();
    CHECK(lhs == Catch::Approx(rhs).margin(1e-12 * std::max(1.0, std::abs(lhs))));
  }
}

TEST_CASE("band limiting is idempotent and detects out-of-band content") {
  Rng rng(39);
  for (Scheme s : {Scheme::mw, Scheme::dh}) {
    SphereTransform tr(s, 16);
    SphereImage x(tr.grid());
    for (auto& v : x.v) v = rng.gaussian();
    const SphereImage y = tr.band_limit(x);
    const SphereImage yy = tr.band_limit(y);
    double d = 0.0, moved = 0.0;
    for (std::size_t i = 0; i < y.v.size(); ++i) {
      d = std::max(d, std::abs(yy.v[i] - y.v[i]));
      moved = std::max(moved, std::abs(y.v[i] - x.v[i]));
    }
    CHECK(d <= 1e-10);
    CHECK(moved > 1e-3);  // random samples are not band-limited

    const HarmonicCoeffs xh = testutil::random_real_coeffs(16, rng);
    const SphereImage bl = tr.synth(xh);
    const SphereImage bl2 = tr.band_limit(bl);
    double d2 = 0.0;
    for (std::size_t i = 0; i < bl.v.size(); ++i)
      d2 = std::max(d2, std::abs(bl2.v[i] - bl.v[i]));
    CHECK(d2 <= 1e-10);
  }
}

TEST_CASE("mw transform cost scales no worse than cubically") {
  using clock = std::chrono::steady_clock;
  const DeltaTable dt(128);
  MwTransform t64(64, dt);
  MwTransform t128(128, dt);
  Rng rng(40);
  const auto f64 = testutil::random_cvec(64 * 64, rng);
  const auto f128 = testutil::random_cvec(128 * 128, rng);
  // warm both plan caches
  (void)t64.forward(t64.inverse(f64));
  (void)t128.forward(t128.inverse(f128));
  auto best = [](auto&& fn) {
    double b = 1e30;
    for (int r = 0; r < 7; ++r) {
      const auto t0 = clock::now();
      fn();
      const auto t1 = clock::now();
      b = std::min(b, std::chrono::duration<double>(t1 - t0).count());
    }
    return b;
  };
  const double small = best([&] { (void)t64.forward(t64.inverse(f64)); });
  const double big = best([&] { (void)t128.forward(t128.inverse(f128)); });
  // cubic doubling costs 8x, quartic 16x; split the difference
  CHECK(big / small <= 12.0);
}
