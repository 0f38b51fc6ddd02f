#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hysid/error.hpp"

namespace hysid {

// y = offset + gain * x
struct AffineMap {
  double offset = 0.0;
  double gain = 1.0;

  double apply(double x) const { return offset + gain * x; }
  double invert(double y) const { return (y - offset) / gain; }

  // (this after inner), i.e. x -> this(inner(x))
  AffineMap after(const AffineMap& inner) const { return {offset + gain * inner.offset, gain * inner.gain}; }

  bool identity() const { return offset == 0.0 && gain == 1.0; }
};

using ScalingMap = std::map<std::string, AffineMap>;

struct Channel {
  std::string name;
  std::vector<double> values;
};

class TimeSeriesDataset {
 public:
  TimeSeriesDataset() = default;

  TimeSeriesDataset(double sample_period, std::vector<Channel> channels, ScalingMap scaling = {}, double start_time = 0.0)
      : period_(sample_period), start_(start_time), channels_(std::move(channels)), scaling_(std::move(scaling)) {
    require(period_ > 0.0 && std::isfinite(period_), "sample_period must be positive");
    require(!channels_.empty(), "dataset needs at least one channel");
    const std::size_t n = channels_.front().values.size();
    require(n >= 2, "dataset channels need at least 2 samples");
    for (std::size_t i = 0; i < channels_.size(); ++i) {
      if (channels_[i].values.size() != n)
        throw make_channel_error(ErrorKind::LengthMismatch, channels_[i].name, "channel length differs");
      for (std::size_t j = 0; j < i; ++j)
        require(channels_[j].name != channels_[i].name, "duplicate channel name '" + channels_[i].name + "'");
    }
    for (const auto& [name, map] : scaling_) {
      require(has(name), "scaling entry for missing channel '" + name + "'");
      require(map.gain != 0.0 && std::isfinite(map.gain) && std::isfinite(map.offset), "invalid scaling map");
    }
  }

  double sample_period() const { return period_; }
  double start_time() const { return start_; }
  std::size_t length() const { return channels_.empty() ? 0 : channels_.front().values.size(); }
  std::size_t channel_count() const { return channels_.size(); }
  const std::vector<Channel>& channels() const { return channels_; }
  const ScalingMap& scaling() const { return scaling_; }

  double time(std::size_t k) const { return start_ + static_cast<double>(k) * period_; }

  bool has(std::string_view name) const {
    return std::any_of(channels_.begin(), channels_.end(), [&](const Channel& c) { return c.name == name; });
  }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < channels_.size(); ++i)
      if (channels_[i].name == name) return i;
    throw make_channel_error(ErrorKind::UnknownChannel, std::string(name), "no such channel");
  }

  const std::vector<double>& values(std::string_view name) const { return channels_[index_of(name)].values; }
  const std::vector<double>& operator[](std::string_view name) const { return values(name); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& c : channels_) out.push_back(c.name);
    return out;
  }

  bool operator==(const TimeSeriesDataset& o) const {
    if (period_ != o.period_ || start_ != o.start_ || channels_.size() != o.channels_.size()) return false;
    for (std::size_t i = 0; i < channels_.size(); ++i)
      if (channels_[i].name != o.channels_[i].name || channels_[i].values != o.channels_[i].values) return false;
    if (scaling_.size() != o.scaling_.size()) return false;
    for (const auto& [k, m] : scaling_) {
      auto it = o.scaling_.find(k);
      if (it == o.scaling_.end() || it->second.offset != m.offset || it->second.gain != m.gain) return false;
    }
    return true;
  }

 private:
  double period_ = 1.0;
  double start_ = 0.0;
  std::vector<Channel> channels_;
  ScalingMap scaling_;
};

enum class ConstantPolicy { Error, KeepUnscaled };

// Per-channel affine map of each channel onto [lo, hi]. Existing scaling is
// composed so that the recorded map always leads back to the raw values.
inline TimeSeriesDataset scale_affine(const TimeSeriesDataset& ds, double lo, double hi,
                                      ConstantPolicy policy = ConstantPolicy::Error) {
  require(lo < hi, "scale_affine: lo must be below hi");
  std::vector<Channel> out;
  ScalingMap scaling = ds.scaling();
  for (const auto& c : ds.channels()) {
    auto [mn, mx] = std::minmax_element(c.values.begin(), c.values.end());
    if (!(*mx > *mn)) {
      if (policy == ConstantPolicy::Error)
        throw make_channel_error(ErrorKind::ConstantChannel, c.name, "cannot scale a constant channel");
      out.push_back(c);
      continue;
    }
    AffineMap m;
    m.gain = (hi - lo) / (*mx - *mn);
    m.offset = lo - *mn * m.gain;
    Channel sc{c.name, c.values};
    for (auto& v : sc.values) v = m.apply(v);
    auto prev = scaling.find(c.name);
    scaling[c.name] = prev == scaling.end() ? m : m.after(prev->second);
    out.push_back(std::move(sc));
  }
  return TimeSeriesDataset(ds.sample_period(), std::move(out), std::move(scaling), ds.start_time());
}

// Applies given maps to the named channels (others untouched).
inline TimeSeriesDataset apply_scaling(const TimeSeriesDataset& ds, const ScalingMap& maps) {
  std::vector<Channel> out = ds.channels();
  ScalingMap scaling = ds.scaling();
  for (const auto& [name, m] : maps) {
    auto& c = out[ds.index_of(name)];
    for (auto& v : c.values) v = m.apply(v);
    auto prev = scaling.find(name);
    scaling[name] = prev == scaling.end() ? m : m.after(prev->second);
  }
  return TimeSeriesDataset(ds.sample_period(), std::move(out), std::move(scaling), ds.start_time());
}

inline TimeSeriesDataset unscale(const TimeSeriesDataset& ds) {
  std::vector<Channel> out = ds.channels();
  for (const auto& [name, m] : ds.scaling()) {
    auto& c = out[ds.index_of(name)];
    for (auto& v : c.values) v = m.invert(v);
  }
  return TimeSeriesDataset(ds.sample_period(), std::move(out), {}, ds.start_time());
}

enum class GroupMode {
  Affine,  // shared min/max of the group mapped onto [lo, hi]
  Gain,    // shared symmetric gain, offset 0 (keeps sign and ratios)
};

struct ScalingGroup {
  std::vector<std::string> channels;
  GroupMode mode = GroupMode::Affine;
};

// Fits one shared map per group over all given runs. Differences between
// channels of a group stay meaningful after scaling.
inline ScalingMap fit_group_scaling(const std::vector<TimeSeriesDataset>& runs, const std::vector<ScalingGroup>& groups,
                                    double lo, double hi) {
  require(lo < hi, "fit_group_scaling: lo must be below hi");
  require(!runs.empty(), "fit_group_scaling: no runs");
  ScalingMap out;
  for (const auto& g : groups) {
    require(!g.channels.empty(), "empty scaling group");
    double mn = INFINITY, mx = -INFINITY, amax = 0.0;
    for (const auto& r : runs)
      for (const auto& name : g.channels)
        for (double v : r.values(name)) {
          mn = std::min(mn, v);
          mx = std::max(mx, v);
          amax = std::max(amax, std::abs(v));
        }
    AffineMap m;
    if (g.mode == GroupMode::Affine) {
      if (!(mx > mn)) throw make_channel_error(ErrorKind::ConstantChannel, g.channels.front(), "constant scaling group");
      m.gain = (hi - lo) / (mx - mn);
      m.offset = lo - mn * m.gain;
    } else {
      if (!(amax > 0.0)) throw make_channel_error(ErrorKind::ConstantChannel, g.channels.front(), "all-zero scaling group");
      m.gain = std::max(std::abs(lo), std::abs(hi)) / amax;
    }
    for (const auto& name : g.channels) {
      require(!out.contains(name), "channel '" + name + "' appears in two scaling groups");
      out[name] = m;
    }
  }
  return out;
}

inline double mean_square(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s / static_cast<double>(v.size());
}

// White Gaussian noise with variance mean(x^2)/snr on each selected channel.
// An empty selection means every channel.
inline TimeSeriesDataset add_noise(const TimeSeriesDataset& ds, double snr, std::uint64_t seed,
                                   const std::vector<std::string>& channels = {}) {
  require(snr > 0.0 && std::isfinite(snr), "add_noise: snr must be positive and finite");
  std::vector<Channel> out = ds.channels();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!channels.empty() && std::find(channels.begin(), channels.end(), out[i].name) == channels.end()) continue;
    auto& v = out[i].values;
    const double sigma = std::sqrt(mean_square(v) / snr);
    std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(sq);
    std::normal_distribution<double> nd(0.0, sigma);
    for (auto& x : v) x += nd(rng);
  }
  for (const auto& name : channels) ds.index_of(name);
  return TimeSeriesDataset(ds.sample_period(), std::move(out), ds.scaling(), ds.start_time());
}

inline TimeSeriesDataset downsample(const TimeSeriesDataset& ds, std::size_t factor) {
  require(factor >= 1, "downsample: factor must be >= 1");
  require(ds.length() > factor, "downsample: dataset shorter than factor");
  std::vector<Channel> out;
  for (const auto& c : ds.channels()) {
    Channel d{c.name, {}};
    for (std::size_t k = 0; k < c.values.size(); k += factor) d.values.push_back(c.values[k]);
    out.push_back(std::move(d));
  }
  return TimeSeriesDataset(ds.sample_period() * static_cast<double>(factor), std::move(out), ds.scaling(),
                           ds.start_time());
}

inline TimeSeriesDataset select_channels(const TimeSeriesDataset& ds, const std::vector<std::string>& names) {
  std::vector<Channel> out;
  ScalingMap scaling;
  for (const auto& n : names) {
    out.push_back(ds.channels()[ds.index_of(n)]);
    if (auto it = ds.scaling().find(n); it != ds.scaling().end()) scaling[n] = it->second;
  }
  return TimeSeriesDataset(ds.sample_period(), std::move(out), std::move(scaling), ds.start_time());
}

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_scenarios(const std::vector<T>& runs, std::size_t train_count) {
  require(train_count > 0 && train_count < runs.size(), "split_scenarios: need 0 < train_count < runs");
  return {std::vector<T>(runs.begin(), runs.begin() + static_cast<std::ptrdiff_t>(train_count)),
          std::vector<T>(runs.begin() + static_cast<std::ptrdiff_t>(train_count), runs.end())};
}

struct LagSpec {
  std::size_t horizon_q = 0;
};

}  // namespace hysid
