#include "tamrf/stats.hpp"

#include "tamrf/error.hpp"
#include "tamrf/io.hpp"

#include "json.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace tamrf {

std::vector<double> u_null_counts(std::size_t n1, std::size_t n2) {
  // counts[i][j][u]: orderings of i a's and j b's with U_a = u. The largest
  // element is either an a (beating all j b's) or a b.
  const std::size_t umax = n1 * n2;
  std::vector<std::vector<std::vector<double>>> counts(
      n1 + 1, std::vector<std::vector<double>>(n2 + 1, std::vector<double>(umax + 1, 0.0)));
  for (std::size_t i = 0; i <= n1; ++i)
    for (std::size_t j = 0; j <= n2; ++j) {
      auto& c = counts[i][j];
      if (i == 0 || j == 0) {
        c[0] = 1.0;
        continue;
      }
      for (std::size_t u = 0; u <= i * j; ++u) {
        double v = counts[i][j - 1][u];
        if (u >= j) v += counts[i - 1][j][u - j];
        c[u] = v;
      }
    }
  return counts[n1][n2];
}

UTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b, const UTestOptions& opts) {
  if (a.empty() || b.empty()) throw DataError("mann_whitney_u: both groups need at least one value");
  const std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;

  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n);
  for (double v : a) pooled.emplace_back(v, 0);
  for (double v : b) pooled.emplace_back(v, 1);
  for (const auto& p : pooled)
    if (std::isnan(p.first)) throw DataError("mann_whitney_u: NaN in input");
  std::sort(pooled.begin(), pooled.end());

  double rank_sum_a = 0.0, tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    const auto t = static_cast<double>(j - i);
    if (t > 1) ties = true;
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k)
      if (pooled[k].second == 0) rank_sum_a += midrank;
    i = j;
  }

  UTestResult r;
  r.n1 = n1;
  r.n2 = n2;
  r.u_a = rank_sum_a - static_cast<double>(n1 * (n1 + 1)) / 2.0;
  const double prod = static_cast<double>(n1 * n2);
  r.u_statistic = std::min(r.u_a, prod - r.u_a);

  if (!ties && n <= opts.exact_cutoff) {
    r.method = UTestMethod::Exact;
    const auto counts = u_null_counts(n1, n2);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto umin = static_cast<std::size_t>(std::llround(r.u_statistic));
    const double lower = std::accumulate(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(umin) + 1, 0.0);
    r.p_value = std::min(1.0, 2.0 * lower / total);
    return r;
  }

  r.method = UTestMethod::NormalApprox;
  const double mu = prod / 2.0;
  const double nn = static_cast<double>(n);
  const double var = prod / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (!(var > 0.0)) {
    r.p_value = 1.0;
    return r;
  }
  const double cc = opts.continuity_correction ? 0.5 : 0.0;
  const double z = std::max(0.0, std::abs(r.u_a - mu) - cc) / std::sqrt(var);
  r.p_value = std::clamp(std::erfc(z / std::sqrt(2.0)), DBL_MIN, 1.0);
  return r;
}

std::vector<UTestRow> utest_by_cohort(const Dataset& ds, const std::vector<std::string>& items, double alpha,
                                      const UTestOptions& opts) {
  std::vector<UTestRow> out;
  for (const auto& item : items) {
    const auto c = ds.column_index(item);
    std::vector<double> control, owned;
    for (Eigen::Index r = 0; r < ds.rows(); ++r) {
      const auto cohort = ds.cohort(r);
      if (!cohort || ds.is_missing(r, c)) continue;
      (*cohort == Cohort::Control ? control : owned).push_back(ds.values()(r, c));
    }
    UTestRow row{item, mann_whitney_u(control, owned, opts), false};
    row.passed = row.result.p_value < alpha;
    out.push_back(std::move(row));
  }
  return out;
}

std::string utest_csv(const std::vector<UTestRow>& rows) {
  std::string out = "item,p_value,result,u_statistic,n1,n2,method\n";
  for (const auto& r : rows)
    out += io::csv_line({r.item, fmt::format("{:.4f}", r.result.p_value), r.passed ? "Passed" : "Failed",
                         io::format_number(r.result.u_statistic), std::to_string(r.result.n1),
                         std::to_string(r.result.n2),
                         r.result.method == UTestMethod::Exact ? "exact" : "normal"});
  return out;
}

CorrelationMatrix pearson_matrix(const Dataset& ds, const std::vector<std::string>& columns) {
  const auto k = static_cast<Eigen::Index>(columns.size());
  const Eigen::MatrixXd x = ds.matrix(columns);
  CorrelationMatrix m{columns, Eigen::MatrixXd::Constant(k, k, std::numeric_limits<double>::quiet_NaN()),
                      Eigen::MatrixXi::Zero(k, k)};
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i; j < k; ++j) {
      double sx = 0, sy = 0;
      int cnt = 0;
      for (Eigen::Index r = 0; r < x.rows(); ++r)
        if (!std::isnan(x(r, i)) && !std::isnan(x(r, j))) {
          sx += x(r, i);
          sy += x(r, j);
          ++cnt;
        }
      m.n_pairs(i, j) = m.n_pairs(j, i) = cnt;
      if (cnt < 2) continue;
      const double mx = sx / cnt, my = sy / cnt;
      double sxx = 0, syy = 0, sxy = 0;
      for (Eigen::Index r = 0; r < x.rows(); ++r)
        if (!std::isnan(x(r, i)) && !std::isnan(x(r, j))) {
          const double dx = x(r, i) - mx, dy = x(r, j) - my;
          sxx += dx * dx;
          syy += dy * dy;
          sxy += dx * dy;
        }
      if (!(sxx > 0.0) || !(syy > 0.0)) continue;
      const double v = i == j ? 1.0 : std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
      m.r(i, j) = m.r(j, i) = v;
    }
  return m;
}

std::string correlation_csv(const CorrelationMatrix& m) {
  std::vector<std::string> header{"column"};
  header.insert(header.end(), m.columns.begin(), m.columns.end());
  std::string out = io::csv_line(header);
  for (Eigen::Index i = 0; i < m.r.rows(); ++i) {
    std::vector<std::string> row{m.columns[static_cast<std::size_t>(i)]};
    for (Eigen::Index j = 0; j < m.r.cols(); ++j)
      row.push_back(m.defined(i, j) ? fmt::format("{:.6f}", m.r(i, j)) : "NA");
    out += io::csv_line(row);
  }
  return out;
}

ColumnSummary describe(const Dataset& ds, const std::string& column) {
  const auto c = ds.column_index(column);
  ColumnSummary s;
  s.column = column;
  for (int i = 0; i < 9; ++i) s.histogram.push_back({-100.0 + 25.0 * i, 0});
  double sum = 0.0;
  std::vector<double> vals;
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    if (ds.is_missing(r, c)) {
      ++s.n_missing;
      continue;
    }
    const double v = ds.values()(r, c);
    vals.push_back(v);
    sum += v;
    // Bin i covers [center - 12.5, center + 12.5); the outer bins absorb the ends.
    const auto bin = std::clamp(static_cast<int>(std::floor((v + 112.5) / 25.0)), 0, 8);
    ++s.histogram[static_cast<std::size_t>(bin)].count;
  }
  s.n = vals.size();
  if (s.n == 0) return s;
  const double mean = sum / static_cast<double>(s.n);
  s.mean = mean;
  s.min = *std::min_element(vals.begin(), vals.end());
  s.max = *std::max_element(vals.begin(), vals.end());
  if (s.n >= 2) {
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

std::string describe_json(const std::vector<ColumnSummary>& summaries) {
  using nlohmann::ordered_json;
  auto arr = ordered_json::array();
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  for (const auto& s : summaries) {
    ordered_json j;
    j["column"] = s.column;
    j["n"] = s.n;
    j["n_missing"] = s.n_missing;
    j["mean"] = opt(s.mean);
    j["sd"] = opt(s.sd);
    j["min"] = opt(s.min);
    j["max"] = opt(s.max);
    auto& h = j["histogram"] = ordered_json::array();
    for (const auto& b : s.histogram) h.push_back({{"center", b.center}, {"count", b.count}});
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace tamrf
