#pragma once

#include "confsteer/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace confsteer {

/// Weighted pool-adjacent-violators. Returns the nondecreasing sequence
/// minimizing sum w_i (y_i - f_i)^2. Each pooled block's value is the
/// left-to-right weighted sum of its members divided by the block weight.
template <typename Scalar>
std::vector<Scalar> pava(const std::vector<Scalar> &y,
                         const std::vector<Scalar> &weights = {}) {
  const std::size_t n = y.size();
  if (!weights.empty() && weights.size() != n)
    throw ValidationError("pava: weight count does not match values");

  struct Block {
    std::size_t begin, end; // [begin, end)
    Scalar wsum, wysum;
    Scalar value() const { return wysum / wsum; }
  };
  auto weight = [&](std::size_t i) {
    return weights.empty() ? Scalar(1) : weights[i];
  };

  std::vector<Block> stack;
  stack.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weight(i) > 0))
      throw ValidationError("pava: weights must be positive");
    stack.push_back({i, i + 1, weight(i), weight(i) * y[i]});
    while (stack.size() > 1 &&
           stack[stack.size() - 2].value() > stack.back().value()) {
      Block top = stack.back();
      stack.pop_back();
      Block &prev = stack.back();
      prev.end = top.end;
      prev.wsum += top.wsum;
      prev.wysum += top.wysum;
    }
  }

  std::vector<Scalar> fitted(n);
  for (const Block &b : stack) {
    Scalar ws = 0, wys = 0;
    for (std::size_t i = b.begin; i < b.end; ++i) {
      ws += weight(i);
      wys += weight(i) * y[i];
    }
    std::fill(fitted.begin() + static_cast<std::ptrdiff_t>(b.begin),
              fitted.begin() + static_cast<std::ptrdiff_t>(b.end), wys / ws);
  }
  return fitted;
}

/// Nondecreasing step-linear map from fitted isotonic knots. Between knots the
/// prediction interpolates linearly; outside it clamps to the end values.
template <typename Scalar = double> struct IsotonicModel {
  std::vector<Scalar> knot_x; // strictly ascending
  std::vector<Scalar> knot_y; // nondecreasing

  Scalar operator()(Scalar x) const {
    if (knot_x.empty())
      throw ValidationError("isotonic model has no knots");
    if (x <= knot_x.front())
      return knot_y.front();
    if (x >= knot_x.back())
      return knot_y.back();
    const auto it = std::upper_bound(knot_x.begin(), knot_x.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - knot_x.begin());
    const std::size_t lo = hi - 1;
    const Scalar t = (x - knot_x[lo]) / (knot_x[hi] - knot_x[lo]);
    return knot_y[lo] + t * (knot_y[hi] - knot_y[lo]);
  }
};

/// Isotonic least-squares fit of y on x. Rows sharing an x value are pooled
/// first (weighted by multiplicity), so the fit is a function of x.
template <typename DerivedX, typename DerivedY>
IsotonicModel<typename DerivedX::Scalar>
isotonic_fit(const Eigen::MatrixBase<DerivedX> &x,
             const Eigen::MatrixBase<DerivedY> &y) {
  using Scalar = typename DerivedX::Scalar;
  const Eigen::Index n = x.size();
  if (n < 1 || y.size() != n)
    throw ValidationError("isotonic_fit: need equal, nonzero lengths");
  if (!x.allFinite() || !y.allFinite())
    throw ValidationError("isotonic_fit: non-finite input");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return x(a) < x(b); });

  IsotonicModel<Scalar> model;
  std::vector<Scalar> means, weights;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    Scalar sum = 0;
    while (j < order.size() && x(order[j]) == x(order[i]))
      sum += static_cast<Scalar>(y(order[j++]));
    model.knot_x.push_back(x(order[i]));
    means.push_back(sum / static_cast<Scalar>(j - i));
    weights.push_back(static_cast<Scalar>(j - i));
    i = j;
  }
  model.knot_y = pava(means, weights);
  return model;
}

} // namespace confsteer
