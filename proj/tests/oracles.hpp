#pragma once

// Slow, direct reference implementations used to check the library.

#include "tamrf/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <vector>

namespace tamrf::oracle {

inline double rmse(const std::vector<double>& y, const std::vector<double>& yhat) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

inline double nrmse(const std::vector<double>& y, const std::vector<double>& yhat) {
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  return rmse(y, yhat) / (*hi - *lo);
}

inline double accuracy(const std::vector<double>& y, const std::vector<double>& yhat, double t) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (std::abs(yhat[i] - y[i]) <= t) ++hit;
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

struct Split {
  Eigen::Index feature;
  double threshold;
  double decrease;
};

inline double sse(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double m = 0.0;
  for (double a : v) m += a;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double a : v) s += (a - m) * (a - m);
  return s;
}

/// Every feature, every midpoint, SSE recomputed from scratch on both sides.
inline std::optional<Split> best_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                       const std::vector<Eigen::Index>& rows, std::size_t min_child = 1) {
  std::vector<double> all;
  for (auto r : rows) all.push_back(y(r));
  const double parent = sse(all);
  const double tol = 1e-9 * std::max(1.0, parent);
  std::optional<Split> best;
  double best_dec = tol;
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    std::set<double> values;
    for (auto r : rows) values.insert(x(r, f));
    std::vector<double> sorted(values.begin(), values.end());
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
      const double thr = 0.5 * (sorted[k] + sorted[k + 1]);
      std::vector<double> left, right;
      for (auto r : rows) (x(r, f) <= thr ? left : right).push_back(y(r));
      if (left.size() < min_child || right.size() < min_child) continue;
      const double dec = parent - sse(left) - sse(right);
      if (dec > best_dec + (best ? tol : 0.0)) {
        best_dec = dec;
        best = Split{f, thr, dec};
      }
    }
  }
  return best;
}

/// U_a by pair counting (ties count one half).
inline double u_pairs(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0.0;
  for (double p : a)
    for (double q : b) u += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
  return u;
}

/// Two-sided permutation p-value by enumerating every assignment of the
/// pooled sample to group a: P(|U - n1 n2 / 2| >= |U_obs - n1 n2 / 2|).
inline double u_exact_enumeration(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size(), n1 = a.size();
  const double centre = static_cast<double>(a.size() * b.size()) / 2.0;
  const double obs = std::abs(u_pairs(a, b) - centre);
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(n1), true);
  std::size_t total = 0, extreme = 0;
  do {
    std::vector<double> ga, gb;
    for (std::size_t i = 0; i < n; ++i) (pick[i] ? ga : gb).push_back(pooled[i]);
    ++total;
    if (std::abs(u_pairs(ga, gb) - centre) >= obs - 1e-9) ++extreme;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return static_cast<double>(extreme) / static_cast<double>(total);
}

/// Same p-value estimated from random relabelings.
inline double u_monte_carlo(const std::vector<double>& a, const std::vector<double>& b, std::size_t resamples,
                            std::uint64_t seed) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n1 = a.size();
  const double centre = static_cast<double>(a.size() * b.size()) / 2.0;
  const double obs = std::abs(u_pairs(a, b) - centre);
  // Rank-sum form of U keeps each resample O(n) after one sort of ranks.
  std::vector<std::size_t> order(pooled.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return pooled[i] < pooled[j]; });
  std::vector<double> rank(pooled.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && pooled[order[j]] == pooled[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = mid;
    i = j;
  }
  auto rng = make_rng(seed, {});
  std::size_t extreme = 0;
  std::vector<double> r = rank;
  for (std::size_t s = 0; s < resamples; ++s) {
    shuffle(r.begin(), r.end(), rng);
    double rs = 0.0;
    for (std::size_t i = 0; i < n1; ++i) rs += r[i];
    const double u = rs - static_cast<double>(n1 * (n1 + 1)) / 2.0;
    if (std::abs(u - centre) >= obs - 1e-9) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(resamples);
}

}  // namespace tamrf::oracle
