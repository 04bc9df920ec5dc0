#pragma once

#include "tamrf/schema.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tamrf {

enum class UTestMethod { Exact, NormalApprox };

struct UTestOptions {
  /// Exact null distribution when n1 + n2 <= exact_cutoff and there are no ties.
  std::size_t exact_cutoff = 30;
  bool continuity_correction = true;
};

struct UTestResult {
  /// min(U_a, U_b).
  double u_statistic = 0.0;
  /// U for the first sample: pairs (a_i, b_j) with a_i > b_j, ties count 1/2.
  double u_a = 0.0;
  /// Two-sided.
  double p_value = 1.0;
  UTestMethod method = UTestMethod::Exact;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

UTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b, const UTestOptions& opts = {});

/// Count of group assignments giving each U_a value (index = U_a), for two
/// tie-free samples of sizes n1 and n2. Sums to C(n1 + n2, n1).
std::vector<double> u_null_counts(std::size_t n1, std::size_t n2);

/// Per-item Control vs PsychOwnership comparison over non-missing values.
struct UTestRow {
  std::string item;
  UTestResult result;
  bool passed = false;
};

std::vector<UTestRow> utest_by_cohort(const Dataset& ds, const std::vector<std::string>& items, double alpha = 0.05,
                                      const UTestOptions& opts = {});
/// item,p_value,result,u_statistic,n1,n2,method
std::string utest_csv(const std::vector<UTestRow>& rows);

/// Pairwise-complete Pearson correlations. Undefined entries (fewer than two
/// shared rows, or zero variance) are NaN and `defined` is false.
struct CorrelationMatrix {
  std::vector<std::string> columns;
  Eigen::MatrixXd r;
  Eigen::MatrixXi n_pairs;
  bool defined(Eigen::Index i, Eigen::Index j) const { return !std::isnan(r(i, j)); }
};

CorrelationMatrix pearson_matrix(const Dataset& ds, const std::vector<std::string>& columns);
std::string correlation_csv(const CorrelationMatrix& m);

struct HistogramBin {
  double center = 0.0;
  std::size_t count = 0;
};

struct ColumnSummary {
  std::string column;
  std::size_t n = 0;
  std::size_t n_missing = 0;
  std::optional<double> mean;
  /// Sample standard deviation; needs n >= 2.
  std::optional<double> sd;
  std::optional<double> min;
  std::optional<double> max;
  std::vector<HistogramBin> histogram;
};

/// Moments over non-missing values and counts in 9 bins of width 25 centered
/// on -100, -75, ..., 100.
ColumnSummary describe(const Dataset& ds, const std::string& column);
std::string describe_json(const std::vector<ColumnSummary>& summaries);

}  // namespace tamrf
