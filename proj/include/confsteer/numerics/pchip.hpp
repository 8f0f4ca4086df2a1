#pragma once

#include "confsteer/types.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace confsteer {

/// Monotone piecewise cubic Hermite interpolant with Fritsch-Carlson
/// derivative limiting. Knot values are strictly or weakly monotone; inversion
/// requires strict monotonicity.
template <typename Scalar = double> struct MonotoneInterpolant {
  std::vector<Scalar> knot_x;
  std::vector<Scalar> knot_y;
  std::vector<Scalar> slope; // Hermite derivative at each knot

  bool increasing() const { return knot_y.back() >= knot_y.front(); }

  /// Evaluation clamps x to [knot_x.front(), knot_x.back()].
  Scalar operator()(Scalar x) const {
    if (x <= knot_x.front())
      return knot_y.front();
    if (x >= knot_x.back())
      return knot_y.back();
    const auto it = std::upper_bound(knot_x.begin(), knot_x.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - knot_x.begin()) - 1;
    const Scalar h = knot_x[i + 1] - knot_x[i];
    const Scalar t = (x - knot_x[i]) / h;
    const Scalar t2 = t * t, t3 = t2 * t;
    const Scalar h00 = 2 * t3 - 3 * t2 + 1;
    const Scalar h10 = t3 - 2 * t2 + t;
    const Scalar h01 = -2 * t3 + 3 * t2;
    const Scalar h11 = t3 - t2;
    const Scalar v = h00 * knot_y[i] + h10 * h * slope[i] +
                     h01 * knot_y[i + 1] + h11 * h * slope[i + 1];
    // Guard the last ulp so evaluation never leaves the bracketing knots.
    const auto [lo, hi] = std::minmax(knot_y[i], knot_y[i + 1]);
    return std::clamp(v, lo, hi);
  }
};

template <typename Scalar>
MonotoneInterpolant<Scalar> monotone_interp_fit(std::vector<Scalar> x,
                                                std::vector<Scalar> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n)
    throw ValidationError("monotone_interp_fit: need >= 2 knots of equal length");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw ValidationError("monotone_interp_fit: non-finite knot");
  for (std::size_t i = 1; i < n; ++i)
    if (!(x[i] > x[i - 1]))
      throw ValidationError("monotone_interp_fit: x must be strictly ascending");

  std::vector<Scalar> secant(n - 1);
  bool up = false, down = false;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    secant[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
    up |= secant[i] > 0;
    down |= secant[i] < 0;
  }
  if (up && down)
    throw ValidationError(
        "monotone_interp_fit: knot values are not monotone (smooth first)");

  std::vector<Scalar> m(n);
  m.front() = secant.front();
  m.back() = secant.back();
  for (std::size_t i = 1; i + 1 < n; ++i)
    m[i] = (secant[i - 1] + secant[i]) / 2;

  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (secant[i] == 0) {
      m[i] = 0;
      m[i + 1] = 0;
      continue;
    }
    const Scalar a = m[i] / secant[i];
    const Scalar b = m[i + 1] / secant[i];
    const Scalar s = a * a + b * b;
    if (s > 9) {
      const Scalar tau = 3 / std::sqrt(s);
      m[i] = tau * a * secant[i];
      m[i + 1] = tau * b * secant[i];
    }
  }
  // A zero secant on the right of an interior knot must also zero it.
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (secant[i - 1] == 0 || secant[i] == 0)
      m[i] = 0;

  return {std::move(x), std::move(y), std::move(m)};
}

template <typename Scalar = double> struct Inversion {
  Scalar x = 0;
  bool clamped = false;
};

/// Solves f(x) = target by bisection. Targets outside the knot range clamp to
/// the endpoint whose value is nearer and set `clamped`.
template <typename Scalar>
Inversion<Scalar> monotone_interp_invert(const MonotoneInterpolant<Scalar> &f,
                                         Scalar target) {
  const std::size_t n = f.knot_y.size();
  if (n < 2)
    throw ValidationError("monotone_interp_invert: interpolant has < 2 knots");
  const bool inc = f.increasing();
  for (std::size_t i = 1; i < n; ++i) {
    const bool strict = inc ? f.knot_y[i] > f.knot_y[i - 1]
                            : f.knot_y[i] < f.knot_y[i - 1];
    if (!strict)
      throw NumericalError(
          "monotone_interp_invert: interpolant is not strictly monotone");
  }
  if (!std::isfinite(target))
    throw ValidationError("monotone_interp_invert: non-finite target");

  const Scalar y_lo = inc ? f.knot_y.front() : f.knot_y.back();
  const Scalar y_hi = inc ? f.knot_y.back() : f.knot_y.front();
  if (target < y_lo)
    return {inc ? f.knot_x.front() : f.knot_x.back(), true};
  if (target > y_hi)
    return {inc ? f.knot_x.back() : f.knot_x.front(), true};

  // Knot hit or bracketing interval.
  std::size_t i = 0;
  for (; i + 1 < n; ++i) {
    if (f.knot_y[i] == target)
      return {f.knot_x[i], false};
    const auto [lo, hi] = std::minmax(f.knot_y[i], f.knot_y[i + 1]);
    if (target >= lo && target <= hi)
      break;
  }
  if (f.knot_y[i + 1] == target)
    return {f.knot_x[i + 1], false};

  Scalar a = f.knot_x[i], b = f.knot_x[i + 1];
  for (int iter = 0; iter < 200; ++iter) {
    const Scalar mid = a + (b - a) / 2;
    if (mid <= a || mid >= b)
      break;
    const Scalar v = f(mid);
    if (v == target)
      return {mid, false};
    if ((v < target) == inc)
      a = mid;
    else
      b = mid;
  }
  const Scalar ea = std::abs(f(a) - target), eb = std::abs(f(b) - target);
  return {ea <= eb ? a : b, false};
}

} // namespace confsteer
