#pragma once

#include <cmath>
#include <limits>

namespace dgd {

/// Kruzkov values above this are reported as evasion (infinite payoff).
inline constexpr double kEvasionThreshold = 1.0 - 1e-6;

/// v = 1 - exp(-u); kruzkov(+inf) = 1.
inline double kruzkov(double u) {
  if (std::isinf(u) && u > 0) return 1.0;
  return -std::expm1(-u);
}

/// Exact inverse on [0,1); returns +inf for v >= 1.
inline double kruzkov_inverse(double v) {
  if (v >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::log1p(-v);
}

/// kruzkov_inverse with the evasion threshold applied.
inline double kruzkov_to_payoff(double v) {
  return v > kEvasionThreshold ? std::numeric_limits<double>::infinity() : kruzkov_inverse(v);
}

}  // namespace dgd
