#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hysid/dataset.hpp"
#include "hysid/hysteron.hpp"

namespace hysid {

inline std::string lagged_name(const std::string& name, std::size_t lag) {
  return lag == 0 ? name : name + "[k-" + std::to_string(lag) + "]";
}

inline std::string hysteron_name(std::size_t index, bool complement) {
  return (complement ? "Hbar" : "H") + std::to_string(index + 1);
}

// Names of the non-hysteron state columns: every channel at lag 0, then lag 1, ...
inline std::vector<std::string> signal_column_names(const std::vector<std::string>& channels, std::size_t q) {
  std::vector<std::string> out;
  for (std::size_t l = 0; l <= q; ++l)
    for (const auto& c : channels) out.push_back(lagged_name(c, l));
  return out;
}

struct RegressionPair {
  Eigen::MatrixXd state;    // X(k): signals and delayed hysterons, all lags
  Eigen::MatrixXd target;   // X(k+1) for the predicted channels
  Eigen::MatrixXd signals;  // the non-hysteron columns of X(k)
  Eigen::MatrixXd updated;  // H_j(k), Hbar_j(k) interleaved
  std::vector<std::string> state_names;
  std::vector<std::string> signal_names;
  std::vector<std::string> target_names;
  std::vector<std::size_t> steps;  // k of each row
};

// Rows k = q .. N-2. Hysteron entries of X(k) are delayed by one step; the
// trace's initial_state stands in for H(-1).
inline RegressionPair build_regression_pair(const TimeSeriesDataset& ds, const std::vector<std::string>& state_channels,
                                            const std::vector<std::string>& target_channels, const LagSpec& lags,
                                            const std::vector<HysteronTrace>& traces) {
  const std::size_t n = ds.length();
  const std::size_t q = lags.horizon_q;
  require(q + 1 < n, "lag horizon must be below dataset length - 1");
  for (const auto& tr : traces)
    if (tr.states.size() != n) throw Error(ErrorKind::LengthMismatch, "hysteron trace length differs from dataset");
  std::vector<const std::vector<double>*> sig, tgt;
  for (const auto& c : state_channels) sig.push_back(&ds.values(c));
  for (const auto& c : target_channels) tgt.push_back(&ds.values(c));

  const std::size_t rows = n - 1 - q;
  const std::size_t ns = sig.size(), m = traces.size();
  RegressionPair rp;
  rp.state.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>((ns + 2 * m) * (q + 1)));
  rp.signals.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(ns * (q + 1)));
  rp.updated.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(2 * m));
  rp.target.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(tgt.size()));
  rp.signal_names = signal_column_names(state_channels, q);
  rp.target_names = target_channels;
  for (std::size_t l = 0; l <= q; ++l) {
    for (const auto& c : state_channels) rp.state_names.push_back(lagged_name(c, l));
    for (std::size_t j = 0; j < m; ++j) {
      rp.state_names.push_back(lagged_name(hysteron_name(j, false), l + 1));
      rp.state_names.push_back(lagged_name(hysteron_name(j, true), l + 1));
    }
  }

  auto h_at = [&](std::size_t j, std::ptrdiff_t k) -> double {
    return k < 0 ? traces[j].initial_state : traces[j].states[static_cast<std::size_t>(k)];
  };
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t k = r + q;
    rp.steps.push_back(k);
    const auto R = static_cast<Eigen::Index>(r);
    Eigen::Index col = 0, scol = 0;
    for (std::size_t l = 0; l <= q; ++l) {
      for (std::size_t i = 0; i < ns; ++i) {
        const double v = (*sig[i])[k - l];
        rp.state(R, col++) = v;
        rp.signals(R, scol++) = v;
      }
      for (std::size_t j = 0; j < m; ++j) {
        const double h = h_at(j, static_cast<std::ptrdiff_t>(k) - 1 - static_cast<std::ptrdiff_t>(l));
        rp.state(R, col++) = h;
        rp.state(R, col++) = 1.0 - h;
      }
    }
    for (std::size_t j = 0; j < m; ++j) {
      rp.updated(R, static_cast<Eigen::Index>(2 * j)) = traces[j].states[k];
      rp.updated(R, static_cast<Eigen::Index>(2 * j + 1)) = 1.0 - traces[j].states[k];
    }
    for (std::size_t i = 0; i < tgt.size(); ++i) rp.target(R, static_cast<Eigen::Index>(i)) = (*tgt[i])[k + 1];
  }
  return rp;
}

}  // namespace hysid
