#pragma once

#include "tamrf/error.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace tamrf {

namespace detail {
template <typename A, typename B>
void check_pair(const Eigen::DenseBase<A>& y, const Eigen::DenseBase<B>& yhat) {
  if (y.size() != yhat.size()) throw DataError("metric: actual and predicted lengths differ");
  if (y.size() == 0) throw DataError("metric: empty input");
}
}  // namespace detail

/// Root mean squared error.
template <typename A, typename B>
typename A::Scalar rmse(const Eigen::DenseBase<A>& y, const Eigen::DenseBase<B>& yhat) {
  detail::check_pair(y, yhat);
  using S = typename A::Scalar;
  return std::sqrt((y.derived().template cast<S>() - yhat.derived().template cast<S>()).squaredNorm() /
                   static_cast<S>(y.size()));
}

/// RMSE divided by the range of the actual values.
template <typename A, typename B>
typename A::Scalar nrmse(const Eigen::DenseBase<A>& y, const Eigen::DenseBase<B>& yhat) {
  detail::check_pair(y, yhat);
  const auto range = y.maxCoeff() - y.minCoeff();
  if (!(range > 0)) throw DataError("nrmse: actual values have zero range");
  return rmse(y, yhat) / range;
}

/// Fraction of predictions within +-t of the actual value.
template <typename A, typename B>
double threshold_accuracy(const Eigen::DenseBase<A>& y, const Eigen::DenseBase<B>& yhat, double t) {
  detail::check_pair(y, yhat);
  if (!(t >= 0)) throw ConfigError("threshold must be nonnegative");
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (std::abs(static_cast<double>(yhat(i)) - static_cast<double>(y(i))) <= t) ++hits;
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

}  // namespace tamrf
