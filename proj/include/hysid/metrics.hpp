#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <tuple>
#include <vector>

#include "hysid/error.hpp"

namespace hysid {

inline double rmse(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && !a.empty(), "rmse: sizes differ or empty");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

inline double stddev(std::span<const double> v) {
  require(!v.empty(), "stddev: empty input");
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

// Indices k >= 1 where a binary sequence changes value.
template <typename T>
std::vector<std::size_t> change_indices(std::span<const T> v) {
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k < v.size(); ++k)
    if ((v[k] != 0) != (v[k - 1] != 0)) out.push_back(k);
  return out;
}

struct SwitchMatch {
  std::size_t truth;
  std::size_t predicted;
  std::ptrdiff_t error;  // predicted - truth
};

struct SwitchReport {
  std::vector<std::size_t> truth;
  std::vector<std::size_t> predicted;
  std::vector<SwitchMatch> matches;  // ordered by truth index
  std::size_t missed = 0;
  std::size_t spurious = 0;

  std::size_t max_abs_error() const {
    std::size_t m = 0;
    for (const auto& x : matches) m = std::max(m, static_cast<std::size_t>(std::abs(x.error)));
    return m;
  }
};

// Greedy nearest-neighbour pairing: closest pairs first (ties by earlier
// truth, then earlier prediction), each index used once, pairs farther apart
// than window stay unmatched.
inline SwitchReport match_switches(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                                   std::size_t window = 5) {
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (std::size_t j = 0; j < predicted.size(); ++j) {
      const std::size_t d = truth[i] > predicted[j] ? truth[i] - predicted[j] : predicted[j] - truth[i];
      if (d <= window) pairs.emplace_back(d, i, j);
    }
  std::sort(pairs.begin(), pairs.end());
  std::vector<bool> ut(truth.size(), false), up(predicted.size(), false);
  SwitchReport r{truth, predicted, {}, 0, 0};
  for (const auto& [d, i, j] : pairs) {
    if (ut[i] || up[j]) continue;
    ut[i] = up[j] = true;
    r.matches.push_back({truth[i], predicted[j],
                         static_cast<std::ptrdiff_t>(predicted[j]) - static_cast<std::ptrdiff_t>(truth[i])});
  }
  std::sort(r.matches.begin(), r.matches.end(), [](const auto& a, const auto& b) { return a.truth < b.truth; });
  r.missed = truth.size() - r.matches.size();
  r.spurious = predicted.size() - r.matches.size();
  return r;
}

struct SwitchSummary {
  std::size_t truth = 0;
  std::size_t matched = 0;
  std::size_t missed = 0;
  std::size_t spurious = 0;
  std::size_t max_abs_error = 0;

  void add(const SwitchReport& r) {
    truth += r.truth.size();
    matched += r.matches.size();
    missed += r.missed;
    spurious += r.spurious;
    max_abs_error = std::max(max_abs_error, r.max_abs_error());
  }
};

}  // namespace hysid
