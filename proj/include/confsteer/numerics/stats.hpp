#pragma once

#include "confsteer/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace confsteer {

struct EffectSize {
  double d = 0;
  //! Set when the pooled standard deviation is zero; `d` is then a signed
  //! infinity (or 0 if the means coincide).
  bool degenerate = false;
};

/// Cohen's d with the Bessel-corrected pooled standard deviation.
template <typename DerivedA, typename DerivedB>
EffectSize cohens_d(const Eigen::MatrixBase<DerivedA> &a,
                    const Eigen::MatrixBase<DerivedB> &b) {
  if (a.size() < 2 || b.size() < 2)
    throw ValidationError("cohens_d: each group needs at least 2 samples");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = a.template cast<double>().mean();
  const double mb = b.template cast<double>().mean();
  const double ssa = (a.template cast<double>().array() - ma).square().sum();
  const double ssb = (b.template cast<double>().array() - mb).square().sum();
  const double pooled = std::sqrt((ssa + ssb) / (na + nb - 2.0));
  const double diff = ma - mb;
  if (pooled == 0.0) {
    const double d =
        diff == 0.0 ? 0.0
                    : std::copysign(std::numeric_limits<double>::infinity(), diff);
    return {d, true};
  }
  return {diff / pooled, false};
}

template <typename DerivedX, typename DerivedY>
double pearson_r(const Eigen::MatrixBase<DerivedX> &x,
                 const Eigen::MatrixBase<DerivedY> &y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ValidationError("pearson_r: need equal lengths >= 2");
  const Eigen::ArrayXd xc =
      x.template cast<double>().array() - x.template cast<double>().mean();
  const Eigen::ArrayXd yc =
      y.template cast<double>().array() - y.template cast<double>().mean();
  const double sxx = xc.square().sum();
  const double syy = yc.square().sum();
  if (sxx == 0.0 || syy == 0.0)
    throw NumericalError("pearson_r: zero variance");
  const double r = (xc * yc).sum() / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

} // namespace confsteer
