#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "fft.hpp"
#include "grid.hpp"
#include "wigner.hpp"

namespace sphtv {

using cplx = std::complex<double>;

// Complex coefficient vector, flat index i = l^2 + l + m, 0 <= l < L, |m| <= l.
struct HarmonicCoeffs {
  int band_limit = 0;
  std::vector<cplx> v;

  HarmonicCoeffs() = default;
  explicit HarmonicCoeffs(int L)
      : band_limit(L), v(static_cast<std::size_t>(L) * L, cplx{}) {}

  static std::size_t index(int el, int m) {
    return static_cast<std::size_t>(el) * el + el + m;
  }
  cplx& at(int el, int m) { return v[index(el, m)]; }
  cplx at(int el, int m) const { return v[index(el, m)]; }
};

// m >= 0 coefficients only, index l(l+1)/2 + m. Entries at m = 0 must be
// real for the extension to represent a real signal.
struct HalfCoeffs {
  int band_limit = 0;
  std::vector<cplx> v;

  HalfCoeffs() = default;
  explicit HalfCoeffs(int L)
      : band_limit(L), v(static_cast<std::size_t>(L) * (L + 1) / 2, cplx{}) {}

  static std::size_t index(int el, int m) {
    return static_cast<std::size_t>(el) * (el + 1) / 2 + m;
  }
  cplx& at(int el, int m) { return v[index(el, m)]; }
  cplx at(int el, int m) const { return v[index(el, m)]; }
};

// i^k
inline cplx ipow(int k) {
  switch (((k % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

// Conjugate-symmetry extension Pi: fills m < 0 by
// x_{l,-m} = (-1)^m conj(x_{l,m}). Rejects m = 0 entries that are not real.
inline HarmonicCoeffs conj_sym_extend(const HalfCoeffs& h) {
  HarmonicCoeffs out(h.band_limit);
  for (int el = 0; el < h.band_limit; ++el) {
    const cplx c0 = h.at(el, 0);
    if (std::abs(c0.imag()) > 1e-12)
      throw std::invalid_argument("conj_sym_extend: m = 0 entry has non-real part");
    out.at(el, 0) = c0;
    for (int m = 1; m <= el; ++m) {
      const cplx c = h.at(el, m);
      out.at(el, m) = c;
      out.at(el, -m) = (m & 1) ? -std::conj(c) : std::conj(c);
    }
  }
  return out;
}

// Adjoint of the extension in the real inner product Re<.,.>: the m = 0
// row maps with unit weight, negative-m content folds back with the same
// conjugation phase (adjoint, not selection).
inline HalfCoeffs conj_sym_restrict(const HarmonicCoeffs& f) {
  HalfCoeffs out(f.band_limit);
  for (int el = 0; el < f.band_limit; ++el) {
    out.at(el, 0) = f.at(el, 0);
    for (int m = 1; m <= el; ++m) {
      const cplx neg = std::conj(f.at(el, -m));
      out.at(el, m) = f.at(el, m) + ((m & 1) ? -neg : neg);
    }
  }
  return out;
}

// Fast MW transforms. The adjoint inverse and adjoint forward are staged
// as printed (theta zero-padding / periodic extension, FFTs, a reflected
// convolution against the Fourier coefficients of sin(theta), and a
// Delta.Delta contraction); the forward and inverse are their exact
// stage-by-stage transposes in reverse order. Spin factors are kept
// symbolically with s fixed to 0.
class MwTransform {
 public:
  static constexpr int spin = 0;

  MwTransform(int band_limit, const DeltaTable& dt)
      : L_(band_limit), n_(2 * band_limit - 1), grid_(build_grid(Scheme::mw, band_limit)) {
    if (dt.band_limit() < L_)
      throw std::invalid_argument("MwTransform: DeltaTable too small for band limit");
    pk_off_.resize(L_);
    std::size_t total = 0;
    for (int el = 0; el < L_; ++el) {
      pk_off_[el] = total;
      total += static_cast<std::size_t>(el + 1) * (2 * el + 1);
    }
    pk_.resize(total);
    for (int el = 0; el < L_; ++el) {
      for (int mp = 0; mp <= el; ++mp) {
        const double* row = dt.row(el, mp);
        const double d0 = row[0 + el];  // Delta^l_{m'0}
        double* dst = pk_.data() + pk_off_[el] + static_cast<std::size_t>(mp) * (2 * el + 1);
        for (int m = -el; m <= el; ++m) dst[m + el] = row[m + el] * d0;
      }
    }
    scale_.resize(L_);
    for (int el = 0; el < L_; ++el)
      scale_[el] = std::sqrt((2.0 * el + 1.0) / (4.0 * std::numbers::pi));
    wk_.resize(4 * L_ - 3);
    for (int k = -(2 * L_ - 2); k <= 2 * L_ - 2; ++k)
      wk_[k + 2 * L_ - 2] = theta_sin_fourier(k);
  }

  explicit MwTransform(int band_limit) : MwTransform(band_limit, DeltaTable(band_limit)) {}

  int band_limit() const { return L_; }
  const SphereGrid& grid() const { return grid_; }

  // synthesis Lambda: L^2 coefficients -> L x (2L-1) complex samples
  std::vector<cplx> inverse(const std::vector<cplx>& flm) const {
    std::vector<cplx> A(static_cast<std::size_t>(n_) * n_);
    coeffs_to_fm(flm.data(), A.data());
    std::vector<cplx> B = transposed(A);
    // e^{i m' theta_t} = e^{i m' pi/n} w^{m' t}
    for (int k = 0; k < n_; ++k) {
      const cplx ph = theta_phase(val(k), +1);
      cplx* row = B.data() + static_cast<std::size_t>(k) * n_;
      for (int j = 0; j < n_; ++j) row[j] *= ph;
    }
    fft::dft2(n_, n_, B.data(), FFTW_BACKWARD);
    B.resize(static_cast<std::size_t>(L_) * n_);
    return B;
  }

  // analysis Gamma: samples -> coefficients; exact left inverse of inverse()
  std::vector<cplx> forward(const std::vector<cplx>& f) const {
    std::vector<cplx> A(f.begin(), f.end());
    fft::dft_rows(L_, n_, A.data(), FFTW_FORWARD);
    const double inv_n = 1.0 / n_;
    for (cplx& c : A) c *= inv_n;
    // periodic theta-extension with the (-1)^{m+s} convention, stored rows-by-m
    std::vector<cplx> B(static_cast<std::size_t>(n_) * n_);
    for (int k = 0; k < n_; ++k) {
      const double sg = (val(k) + spin) & 1 ? -1.0 : 1.0;
      cplx* row = B.data() + static_cast<std::size_t>(k) * n_;
      for (int t = 0; t < L_; ++t) row[t] = A[static_cast<std::size_t>(t) * n_ + k];
      for (int t = L_; t < n_; ++t)
        row[t] = sg * A[static_cast<std::size_t>(2 * L_ - 2 - t) * n_ + k];
    }
    fft::dft_rows(n_, n_, B.data(), FFTW_FORWARD);
    for (int k = 0; k < n_; ++k) {
      cplx* row = B.data() + static_cast<std::size_t>(k) * n_;
      for (int kp = 0; kp < n_; ++kp) row[kp] *= inv_n * theta_phase(val(kp), -1);
    }
    std::vector<cplx> C(static_cast<std::size_t>(n_) * n_);
    for (int k = 0; k < n_; ++k)
      conv_row(B.data() + static_cast<std::size_t>(k) * n_,
               C.data() + static_cast<std::size_t>(k) * n_);
    std::vector<cplx> flm(static_cast<std::size_t>(L_) * L_);
    fm_to_coeffs(C.data(), flm.data());
    return flm;
  }

  // exact matrix adjoint of inverse(): samples -> coefficients
  std::vector<cplx> inverse_adjoint(const std::vector<cplx>& f) const {
    std::vector<cplx> B(static_cast<std::size_t>(n_) * n_, cplx{});
    std::copy(f.begin(), f.begin() + static_cast<std::size_t>(L_) * n_, B.begin());
    fft::dft2(n_, n_, B.data(), FFTW_FORWARD);
    for (int k = 0; k < n_; ++k) {
      const cplx ph = theta_phase(val(k), -1);
      cplx* row = B.data() + static_cast<std::size_t>(k) * n_;
      for (int j = 0; j < n_; ++j) row[j] *= ph;
    }
    std::vector<cplx> A = transposed(B);
    std::vector<cplx> flm(static_cast<std::size_t>(L_) * L_);
    fm_to_coeffs(A.data(), flm.data());
    return flm;
  }

  // exact matrix adjoint of forward(): coefficients -> samples
  std::vector<cplx> forward_adjoint(const std::vector<cplx>& flm) const {
    std::vector<cplx> A(static_cast<std::size_t>(n_) * n_);
    coeffs_to_fm(flm.data(), A.data());
    std::vector<cplx> B(static_cast<std::size_t>(n_) * n_);
    for (int k = 0; k < n_; ++k)
      conv_row(A.data() + static_cast<std::size_t>(k) * n_,
               B.data() + static_cast<std::size_t>(k) * n_);
    const double inv_n = 1.0 / n_;
    for (int k = 0; k < n_; ++k) {
      cplx* row = B.data() + static_cast<std::size_t>(k) * n_;
      for (int kp = 0; kp < n_; ++kp) row[kp] *= theta_phase(val(kp), +1);
    }
    fft::dft_rows(n_, n_, B.data(), FFTW_BACKWARD);
    // adjoint of the periodic extension: fold reflected rings back
    std::vector<cplx> D(static_cast<std::size_t>(L_) * n_);
    for (int t = 0; t < L_; ++t) {
      cplx* drow = D.data() + static_cast<std::size_t>(t) * n_;
      for (int k = 0; k < n_; ++k) {
        cplx vv = B[static_cast<std::size_t>(k) * n_ + t];
        if (t <= L_ - 2) {
          const double sg = (val(k) + spin) & 1 ? -1.0 : 1.0;
          vv += sg * B[static_cast<std::size_t>(k) * n_ + (2 * L_ - 2 - t)];
        }
        drow[k] = inv_n * vv;
      }
    }
    fft::dft_rows(L_, n_, D.data(), FFTW_BACKWARD);
    for (cplx& c : D) c *= inv_n;
    return D;
  }

 private:
  int bin(int m) const { return m >= 0 ? m : m + n_; }
  int val(int k) const { return k <= L_ - 1 ? k : k - n_; }

  // e^{sign * i m pi / n}
  cplx theta_phase(int m, int sign) const {
    const double a = sign * m * std::numbers::pi / n_;
    return {std::cos(a), std::sin(a)};
  }

  const double* pk(int el, int mp) const {
    return pk_.data() + pk_off_[el] + static_cast<std::size_t>(mp) * (2 * el + 1);
  }

  std::vector<cplx> transposed(const std::vector<cplx>& A) const {
    std::vector<cplx> B(static_cast<std::size_t>(n_) * n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        B[static_cast<std::size_t>(j) * n_ + i] = A[static_cast<std::size_t>(i) * n_ + j];
    return B;
  }

  // F[m][m'] = i^{-(m+s)} (-1)^s sum_l c_l Delta^l_{m'm} Delta^l_{m'0} flm_{lm};
  // negative m' recovered from Delta^l_{m',-m} = (-1)^{l+m'} Delta^l_{m'm}.
  void coeffs_to_fm(const cplx* flm, cplx* F) const {
    std::fill(F, F + static_cast<std::size_t>(n_) * n_, cplx{});
    for (int m = -(L_ - 1); m <= L_ - 1; ++m) {
      cplx* row = F + static_cast<std::size_t>(bin(m)) * n_;
      const cplx ph = ipow(-(m + spin));
      const int am = std::abs(m);
      for (int mp = 0; mp <= L_ - 1; ++mp) {
        cplx s0{}, s1{};
        for (int el = std::max(am, mp); el < L_; ++el) {
          const cplx term = scale_[el] * pk(el, mp)[m + el] * flm[HarmonicCoeffs::index(el, m)];
          s0 += term;
          s1 += (el & 1) ? -term : term;
        }
        row[bin(mp)] = ph * s0;
        if (mp > 0) {
          const double sg = ((m + mp) & 1) ? -1.0 : 1.0;
          row[bin(-mp)] = ph * (sg * s1);
        }
      }
    }
  }

  // flm_{lm} = i^{m+s} c_l sum_{m'} Delta^l_{m'm} Delta^l_{m'0} F[m][m']
  void fm_to_coeffs(const cplx* F, cplx* flm) const {
    for (int m = -(L_ - 1); m <= L_ - 1; ++m) {
      const cplx* row = F + static_cast<std::size_t>(bin(m)) * n_;
      const cplx ph = ipow(m + spin);
      for (int el = std::abs(m); el < L_; ++el) {
        const double* P = pk(el, 0);
        cplx acc = P[m + el] * row[0];
        for (int mp = 1; mp <= std::min(el, L_ - 1); ++mp) {
          const double sg = ((el + m + mp) & 1) ? -1.0 : 1.0;
          acc += pk(el, mp)[m + el] * (row[bin(mp)] + sg * row[bin(-mp)]);
        }
        flm[HarmonicCoeffs::index(el, m)] = ph * scale_[el] * acc;
      }
    }
  }

  // out[m'] = 2 pi sum_{m''} in[m''] w(m'' - m'); the kernel is Hermitian
  // as a matrix in (m', m''), so the same routine serves both adjoints.
  void conv_row(const cplx* in, cplx* out) const {
    for (int kp = 0; kp < n_; ++kp) {
      const int mp = val(kp);
      cplx acc{};
      for (int ks = 0; ks < n_; ++ks) {
        const cplx w = wk_[val(ks) - mp + 2 * L_ - 2];
        if (w.real() != 0.0 || w.imag() != 0.0) acc += in[ks] * w;
      }
      out[kp] = 2.0 * std::numbers::pi * acc;
    }
  }

  int L_;
  int n_;
  SphereGrid grid_;
  std::vector<double> pk_;
  std::vector<std::size_t> pk_off_;
  std::vector<double> scale_;
  std::vector<cplx> wk_;
};

// Direct-quadrature DH transforms. The associated Legendre values
// sqrt((2l+1)/4pi) d^l_{m0}(theta_t) are cached per grid via the Delta
// identity d^l_{m0}(theta) = i^{-m} sum_{m'} Delta^l_{m'm} Delta^l_{m'0}
// e^{i m' theta}; longitude sums run through FFTs.
class DhTransform {
 public:
  DhTransform(int band_limit, const DeltaTable& dt)
      : L_(band_limit),
        n_(2 * band_limit - 1),
        grid_(build_grid(Scheme::dh, band_limit)),
        qw_(quadrature_weights(grid_)) {
    if (dt.band_limit() < L_)
      throw std::invalid_argument("DhTransform: DeltaTable too small for band limit");
    const int nt = grid_.n_theta;
    const std::size_t half = static_cast<std::size_t>(L_) * (L_ + 1) / 2;
    plm_.resize(nt * half);
    for (int t = 0; t < nt; ++t) {
      const double th = grid_.theta[t];
      for (int m = 0; m < L_; ++m) {
        const cplx ph = ipow(-m);
        for (int el = m; el < L_; ++el) {
          const double* row0 = dt.row(el, 0);
          cplx acc = row0[m + el] * row0[0 + el];
          for (int mp = 1; mp <= el; ++mp) {
            const double* r = dt.row(el, mp);
            const double p = r[m + el] * r[0 + el];
            const double sg = ((el + m + mp) & 1) ? -1.0 : 1.0;
            const cplx e{std::cos(mp * th), std::sin(mp * th)};
            acc += p * (e + sg * std::conj(e));
          }
          const double c = std::sqrt((2.0 * el + 1.0) / (4.0 * std::numbers::pi));
          plm_[t * half + HalfCoeffs::index(el, m)] = c * (ph * acc).real();
        }
      }
    }
  }

  explicit DhTransform(int band_limit) : DhTransform(band_limit, DeltaTable(band_limit)) {}

  int band_limit() const { return L_; }
  const SphereGrid& grid() const { return grid_; }
  const QuadratureWeights& weights() const { return qw_; }

  std::vector<cplx> inverse(const std::vector<cplx>& flm) const {
    const int nt = grid_.n_theta;
    std::vector<cplx> F(static_cast<std::size_t>(nt) * n_, cplx{});
    const std::size_t half = static_cast<std::size_t>(L_) * (L_ + 1) / 2;
    for (int t = 0; t < nt; ++t) {
      const double* P = plm_.data() + t * half;
      cplx* row = F.data() + static_cast<std::size_t>(t) * n_;
      for (int m = 0; m < L_; ++m) {
        cplx pos{}, neg{};
        for (int el = m; el < L_; ++el) {
          const double p = P[HalfCoeffs::index(el, m)];
          pos += p * flm[HarmonicCoeffs::index(el, m)];
          if (m > 0) neg += p * flm[HarmonicCoeffs::index(el, -m)];
        }
        row[m] = pos;
        if (m > 0) row[n_ - m] = (m & 1) ? -neg : neg;  // d^l_{-m,0} = (-1)^m d^l_{m0}
      }
    }
    fft::dft_rows(nt, n_, F.data(), FFTW_BACKWARD);
    return F;
  }

  std::vector<cplx> forward(const std::vector<cplx>& f) const {
    return analysis(f, true);
  }

  // adjoint pairs: Lambda^dagger drops the quadrature weights from the
  // analysis sum, Gamma^dagger folds them into the synthesis.
  std::vector<cplx> inverse_adjoint(const std::vector<cplx>& f) const {
    return analysis(f, false);
  }

  std::vector<cplx> forward_adjoint(const std::vector<cplx>& flm) const {
    std::vector<cplx> f = inverse(flm);
    for (int t = 0; t < grid_.n_theta; ++t) {
      cplx* row = f.data() + static_cast<std::size_t>(t) * n_;
      for (int p = 0; p < n_; ++p) row[p] *= qw_.q[t];
    }
    return f;
  }

 private:
  std::vector<cplx> analysis(const std::vector<cplx>& f, bool weighted) const {
    const int nt = grid_.n_theta;
    std::vector<cplx> F(f.begin(), f.end());
    fft::dft_rows(nt, n_, F.data(), FFTW_FORWARD);
    std::vector<cplx> flm(static_cast<std::size_t>(L_) * L_, cplx{});
    const std::size_t half = static_cast<std::size_t>(L_) * (L_ + 1) / 2;
    for (int t = 0; t < nt; ++t) {
      const double q = weighted ? qw_.q[t] : 1.0;
      const double* P = plm_.data() + t * half;
      const cplx* row = F.data() + static_cast<std::size_t>(t) * n_;
      for (int m = 0; m < L_; ++m) {
        const cplx vp = q * row[m];
        const cplx vn = (m > 0) ? q * ((m & 1) ? -row[n_ - m] : row[n_ - m]) : cplx{};
        for (int el = m; el < L_; ++el) {
          const double p = P[HalfCoeffs::index(el, m)];
          flm[HarmonicCoeffs::index(el, m)] += p * vp;
          if (m > 0) flm[HarmonicCoeffs::index(el, -m)] += p * vn;
        }
      }
    }
    return flm;
  }

  int L_;
  int n_;
  SphereGrid grid_;
  QuadratureWeights qw_;
  std::vector<double> plm_;
};

// Scheme-dispatching facade plus the real-image layer used by the
// solvers: synthesis of conjugate-symmetric coefficients yields a real
// image (imaginary parts at rounding level are dropped), and the real
// layer's adjoints are exact in the real inner product.
class SphereTransform {
 public:
  SphereTransform(Scheme scheme, int band_limit, const DeltaTable& dt) : scheme_(scheme) {
    if (scheme == Scheme::mw)
      mw_ = std::make_unique<MwTransform>(band_limit, dt);
    else
      dh_ = std::make_unique<DhTransform>(band_limit, dt);
  }
  SphereTransform(Scheme scheme, int band_limit)
      : SphereTransform(scheme, band_limit, DeltaTable(band_limit)) {}

  Scheme scheme() const { return scheme_; }
  int band_limit() const { return mw_ ? mw_->band_limit() : dh_->band_limit(); }
  const SphereGrid& grid() const { return mw_ ? mw_->grid() : dh_->grid(); }

  std::vector<cplx> inverse(const std::vector<cplx>& flm) const {
    return mw_ ? mw_->inverse(flm) : dh_->inverse(flm);
  }
  std::vector<cplx> forward(const std::vector<cplx>& f) const {
    return mw_ ? mw_->forward(f) : dh_->forward(f);
  }
  std::vector<cplx> inverse_adjoint(const std::vector<cplx>& f) const {
    return mw_ ? mw_->inverse_adjoint(f) : dh_->inverse_adjoint(f);
  }
  std::vector<cplx> forward_adjoint(const std::vector<cplx>& flm) const {
    return mw_ ? mw_->forward_adjoint(flm) : dh_->forward_adjoint(flm);
  }

  SphereImage synth(const HarmonicCoeffs& xh) const {
    const std::vector<cplx> s = inverse(xh.v);
    SphereImage img(grid());
    for (std::size_t i = 0; i < s.size(); ++i) img.v[i] = s[i].real();
    return img;
  }

  HarmonicCoeffs analyze(const SphereImage& x) const {
    std::vector<cplx> s(x.v.begin(), x.v.end());
    HarmonicCoeffs out(band_limit());
    out.v = forward(s);
    return out;
  }

  // Upsilon = Lambda Gamma; projects sample vectors onto band-limited signals.
  SphereImage band_limit(const SphereImage& x) const { return synth(analyze(x)); }

 private:
  Scheme scheme_;
  std::unique_ptr<MwTransform> mw_;
  std::unique_ptr<DhTransform> dh_;
};

}  // namespace sphtv
