#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sphtv {

// Wigner small-d matrices at fixed argument pi/2:
//   Delta^l_{m'm} = d^l_{m'm}(pi/2).
//
// Only the m' >= 0 half is stored; negative m' follows from
//   Delta^l_{-m',m} = (-1)^{l+m} Delta^l_{m'm}.
// Rows are built by a three-term l-recursion seeded at the top row
// m' = l, which is stable well beyond l = 128.
class DeltaTable {
 public:
  explicit DeltaTable(int band_limit) : band_limit_(band_limit) {
    if (band_limit < 1) throw std::invalid_argument("DeltaTable: band limit must be >= 1");
    offset_.resize(band_limit_);
    std::size_t total = 0;
    for (int el = 0; el < band_limit_; ++el) {
      offset_[el] = total;
      total += static_cast<std::size_t>(el + 1) * (2 * el + 1);
    }
    v_.resize(total);
    v_[0] = 1.0;  // Delta^0_00
    for (int el = 1; el < band_limit_; ++el) fill_el(el);
  }

  int band_limit() const { return band_limit_; }

  // row m' >= 0 of Delta^l, contiguous over m = -l..l (entry [m + l])
  const double* row(int el, int mp) const {
    return v_.data() + offset_[el] + static_cast<std::size_t>(mp) * (2 * el + 1);
  }

  // Delta^l_{m'm} for any m' in [-l, l]
  double get(int el, int mp, int m) const {
    if (mp >= 0) return row(el, mp)[m + el];
    const double s = ((el + m) & 1) ? -1.0 : 1.0;
    return s * row(el, -mp)[m + el];
  }

 private:
  double* mrow(int el, int mp) {
    return v_.data() + offset_[el] + static_cast<std::size_t>(mp) * (2 * el + 1);
  }

  void fill_el(int el) {
    const double* prev_top = row(el - 1, el - 1);  // Delta^{l-1}_{l-1,m}
    double* top = mrow(el, el);
    // seed row m' = l from the previous top row
    top[0 + el] = -std::sqrt((2.0 * el - 1.0) / (2.0 * el)) * prev_top[0 + (el - 1)];
    for (int m = 1; m <= el; ++m) {
      const double c = std::sqrt((el / 2.0) * (2.0 * el - 1.0) /
                                 (static_cast<double>(el + m) * (el + m - 1.0)));
      top[m + el] = c * prev_top[(m - 1) + (el - 1)];
      top[-m + el] = top[m + el];  // Delta^l_{l,-m} = Delta^l_{l,m}
    }
    // descend in m': Delta^l_{m'} from Delta^l_{m'+1} and Delta^l_{m'+2}
    for (int mp = el - 1; mp >= 0; --mp) {
      const double norm = std::sqrt(static_cast<double>(el - mp) * (el + mp + 1.0));
      const double c2 = (mp + 2 <= el)
                            ? std::sqrt((el - mp - 1.0) * (el + mp + 2.0)) / norm
                            : 0.0;
      const double* r1 = row(el, mp + 1);
      const double* r2 = (mp + 2 <= el) ? row(el, mp + 2) : nullptr;
      double* dst = mrow(el, mp);
      for (int m = -el; m <= el; ++m) {
        double val = (2.0 * m / norm) * r1[m + el];
        if (r2) val -= c2 * r2[m + el];
        dst[m + el] = val;
      }
    }
  }

  int band_limit_;
  std::vector<double> v_;
  std::vector<std::size_t> offset_;
};

inline DeltaTable build_delta_table(int band_limit) { return DeltaTable(band_limit); }

}  // namespace sphtv
