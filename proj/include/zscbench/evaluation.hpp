#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "zscbench/errors.hpp"

namespace zsc {

struct EvalRecord {
  int partition_index = 0;
  std::string model_name;
  double accuracy = 0.0;
  double per_class_accuracy = 0.0;
};

enum class TestMethod { exact, normal_approx };

struct TestResult {
  double statistic_w = 0.0;  // min(W+, W-)
  double p_two_sided = 1.0;
  int n_effective = 0;  // pairs after zero-difference removal
  TestMethod method = TestMethod::exact;
};

// Fraction of samples whose prediction matches the truth (sensitive to class
// imbalance).
inline double top1_accuracy(const std::vector<int>& predictions, const std::vector<int>& truth) {
  if (predictions.size() != truth.size()) throw ConfigError("accuracy: length mismatch");
  if (truth.empty()) throw ConfigError("accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predictions[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

// Per-class recall averaged uniformly over the classes present in truth
// (insensitive to class imbalance).
inline double per_class_accuracy(const std::vector<int>& predictions,
                                 const std::vector<int>& truth) {
  if (predictions.size() != truth.size()) throw ConfigError("accuracy: length mismatch");
  if (truth.empty()) throw ConfigError("accuracy: empty input");
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // class -> (correct, total)
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& [correct, total] = per_class[truth[i]];
    total++;
    correct += predictions[i] == truth[i];
  }
  double sum = 0.0;
  for (const auto& [cls, counts] : per_class)
    sum += static_cast<double>(counts.first) / static_cast<double>(counts.second);
  return sum / static_cast<double>(per_class.size());
}

// Arithmetic mean and sample standard deviation (n-1 divisor).
inline std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.size() < 2) throw ConfigError("mean_std: need at least 2 values");
  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

namespace detail {

// Average ranks of |d| (ties get the mean of the ranks they span), returned
// doubled so they stay integral. A tie group spanning ranks lo..hi has average
// (lo + hi) / 2, i.e. doubled rank lo + hi.
inline std::vector<std::int64_t> doubled_ranks(const std::vector<double>& abs_d) {
  const std::size_t n = abs_d.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return abs_d[a] < abs_d[b]; });
  std::vector<std::int64_t> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
    const auto doubled = static_cast<std::int64_t>(i + 1 + j + 1);  // lo + hi, 1-based
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = doubled;
    i = j + 1;
  }
  return ranks;
}

// Exact two-sided p by counting, over all 2^n sign assignments of the realized
// rank vector, those whose min(W+, W-) is <= the observed statistic. Dynamic
// programming over the distribution of the doubled positive-rank sum; counts
// are exact in double up to n = 25 (max 2^25).
inline double exact_p(const std::vector<std::int64_t>& doubled, std::int64_t doubled_w) {
  std::int64_t total = 0;
  for (const auto r : doubled) total += r;
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  std::int64_t reached = 0;
  for (const auto r : doubled) {
    for (std::int64_t k = reached; k >= 0; --k) {
      if (counts[static_cast<std::size_t>(k)] > 0.0)
        counts[static_cast<std::size_t>(k + r)] += counts[static_cast<std::size_t>(k)];
    }
    reached += r;
  }
  double hits = 0.0;
  for (std::int64_t k = 0; k <= total; ++k) {
    if (std::min(k, total - k) <= doubled_w) hits += counts[static_cast<std::size_t>(k)];
  }
  return std::min(1.0, hits / std::pow(2.0, static_cast<double>(doubled.size())));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace detail

// Wilcoxon signed-rank paired test. Zero differences are discarded; tied
// absolute differences get average ranks. Exact enumeration up to 25 effective
// pairs, tie-corrected normal approximation with continuity correction above.
inline TestResult wilcoxon_signed_rank(const std::vector<double>& a,
                                       const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConfigError("wilcoxon: length mismatch");
  std::vector<double> abs_d;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d == 0.0) continue;
    abs_d.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  if (abs_d.empty()) throw ConfigError("wilcoxon: all differences zero");

  const auto n = abs_d.size();
  const auto doubled = detail::doubled_ranks(abs_d);
  std::int64_t doubled_total = 0;
  std::int64_t doubled_w_plus = 0;
  for (std::size_t i = 0; i < n; ++i) {
    doubled_total += doubled[i];
    if (positive[i]) doubled_w_plus += doubled[i];
  }
  const std::int64_t doubled_w = std::min(doubled_w_plus, doubled_total - doubled_w_plus);

  TestResult result;
  result.statistic_w = static_cast<double>(doubled_w) / 2.0;
  result.n_effective = static_cast<int>(n);

  if (n <= 25) {
    result.method = TestMethod::exact;
    result.p_two_sided = detail::exact_p(doubled, doubled_w);
  } else {
    result.method = TestMethod::normal_approx;
    const auto nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    double variance = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0;
    // tie correction: subtract sum(t^3 - t)/48 per tie group of size t
    std::map<std::int64_t, double> groups;
    for (const auto r : doubled) groups[r] += 1.0;
    for (const auto& [rank, t] : groups) variance -= (t * t * t - t) / 48.0;
    const double z = (result.statistic_w - mean + 0.5) / std::sqrt(variance);
    result.p_two_sided = std::min(1.0, 2.0 * detail::normal_cdf(z));
  }
  return result;
}

}  // namespace zsc
