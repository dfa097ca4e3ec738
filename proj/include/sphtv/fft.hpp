#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <tuple>

namespace sphtv::fft {

// Thin cache over FFTW complex plans. All transforms are unnormalized;
// callers apply the 1/n factors dictated by the stage formulas.
// Plans are created once per shape with FFTW_ESTIMATE | FFTW_UNALIGNED
// (deterministic planning, no alignment constraint on the buffers) and
// executed through the new-array interface, which is thread-safe.
namespace detail {

using Key = std::tuple<int, int, int, int>;  // n0, n1 (0 for 1-D batch), howmany, sign

inline fftw_plan plan_for(int n0, int n1, int howmany, int sign) {
  static std::map<Key, fftw_plan> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  const Key key{n0, n1, howmany, sign};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  static std::vector<std::complex<double>> scratch;
  fftw_plan p;
  if (n1 > 0) {
    scratch.resize(static_cast<std::size_t>(n0) * n1);
    p = fftw_plan_dft_2d(n0, n1, reinterpret_cast<fftw_complex*>(scratch.data()),
                         reinterpret_cast<fftw_complex*>(scratch.data()), sign,
                         FFTW_ESTIMATE | FFTW_UNALIGNED);
  } else {
    scratch.resize(static_cast<std::size_t>(n0) * howmany);
    auto* d = reinterpret_cast<fftw_complex*>(scratch.data());
    p = fftw_plan_many_dft(1, &n0, howmany, d, nullptr, 1, n0, d, nullptr, 1, n0,
                           sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  cache.emplace(key, p);
  return p;
}

}  // namespace detail

// In-place 2-D DFT of an n0 x n1 row-major array. sign: FFTW_FORWARD (-1)
// for e^{-i..}, FFTW_BACKWARD (+1) for e^{+i..}.
inline void dft2(int n0, int n1, std::complex<double>* d, int sign) {
  fftw_plan p = detail::plan_for(n0, n1, 1, sign);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(d), reinterpret_cast<fftw_complex*>(d));
}

// In-place 1-D DFTs of length n over `rows` contiguous rows.
inline void dft_rows(int rows, int n, std::complex<double>* d, int sign) {
  fftw_plan p = detail::plan_for(n, 0, rows, sign);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(d), reinterpret_cast<fftw_complex*>(d));
}

}  // namespace sphtv::fft
