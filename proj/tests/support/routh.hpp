// Routh-Hurwitz stability test for real polynomials, used as an independent
// oracle for closed-loop pole locations.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "platoon/stability.hpp"

namespace platoon::testing {

/// True iff every root of the polynomial (descending coefficients) lies in
/// the open left half plane. Leading coefficient must be positive; a zero in
/// the first column counts as not stable.
inline bool routh_stable(const std::vector<double>& coeffs) {
  if (coeffs.empty() || !(coeffs.front() > 0.0)) {
    throw std::invalid_argument("routh_stable: need a positive leading coefficient");
  }
  const std::size_t n = coeffs.size();
  const std::size_t width = (n + 1) / 2;
  std::vector<double> r0(width, 0.0), r1(width, 0.0);
  for (std::size_t k = 0; k < n; ++k) (k % 2 == 0 ? r0 : r1)[k / 2] = coeffs[k];
  if (n == 1) return true;
  for (std::size_t row = 1; row < n; ++row) {
    if (!(r1[0] > 0.0)) return false;
    std::vector<double> next(width, 0.0);
    for (std::size_t k = 0; k + 1 < width; ++k) {
      next[k] = (r1[0] * r0[k + 1] - r0[0] * r1[k + 1]) / r1[0];
    }
    r0 = r1;
    r1 = next;
  }
  return true;
}

/// Characteristic polynomial den + k num of the loop 1 + k G(s) = 0.
inline std::vector<double> closed_loop_polynomial(const TransferFunction& g, double k) {
  std::vector<double> out = g.den;
  const std::size_t shift = g.den.size() - g.num.size();
  for (std::size_t i = 0; i < g.num.size(); ++i) out[shift + i] += k * g.num[i];
  return out;
}

}  // namespace platoon::testing
