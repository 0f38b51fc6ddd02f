#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hysid/dataset.hpp"

namespace hysid {

// A threshold is either a constant or a reference to a channel that holds the
// threshold value per sample (setpoints that differ between runs).
struct Threshold {
  double value = 0.0;
  std::string channel;

  static Threshold constant(double v) { return {v, {}}; }
  static Threshold of_channel(std::string name) { return {0.0, std::move(name)}; }

  bool is_channel() const { return !channel.empty(); }
  std::string label() const;
  bool operator==(const Threshold&) const = default;
};

enum class InitialState { Off = 0, On = 1, Auto = 2 };

struct HysteronSpec {
  std::string signal_name;
  Threshold alpha;  // lower
  Threshold beta;   // upper
  double eps_alpha = 0.0;
  double eps_beta = 0.0;
  InitialState initial_state = InitialState::Auto;

  void validate() const {
    require(eps_alpha >= 0.0 && eps_beta >= 0.0, "hysteron eps must be nonnegative");
    if (!alpha.is_channel() && !beta.is_channel()) {
      require(alpha.value < beta.value, "hysteron needs alpha < beta");
      require(eps_alpha + eps_beta < beta.value - alpha.value, "hysteron eps bands overlap");
    }
  }
  bool operator==(const HysteronSpec&) const = default;
};

struct SwitchEvent {
  std::size_t index;
  bool up;
  bool operator==(const SwitchEvent&) const = default;
};

struct HysteronTrace {
  HysteronSpec spec;
  std::uint8_t initial_state = 0;  // state before the first sample
  std::vector<std::uint8_t> states;
  std::vector<SwitchEvent> switches;

  std::vector<std::uint8_t> complement() const {
    std::vector<std::uint8_t> out(states.size());
    for (std::size_t k = 0; k < states.size(); ++k) out[k] = static_cast<std::uint8_t>(1 - states[k]);
    return out;
  }
};

inline std::string format_threshold_value(double v);

inline std::string Threshold::label() const { return is_channel() ? channel : format_threshold_value(value); }

enum class IndicatorKind { Upper, Lower, ProximityUpper, ProximityLower };

struct DifferenceChannel {
  std::string name;  // "<a>-<b>"
  std::string a;
  Threshold b;
  std::vector<double> values;
};

struct IndicatorTrace {
  std::vector<std::uint8_t> values;
  IndicatorKind kind = IndicatorKind::Upper;
  std::size_t source = 0;  // index into the difference list
};

struct CandidatePair {
  std::size_t lower;  // difference whose negative indicator acts as I_alpha
  std::size_t upper;  // difference whose indicator acts as I_beta
};

namespace detail {

inline void check_finite(std::span<const double> x, const char* what) {
  for (std::size_t k = 0; k < x.size(); ++k)
    if (std::isnan(x[k])) {
      Error e(ErrorKind::InvalidSample, std::string("NaN in ") + what + " at index " + std::to_string(k));
      e.row = static_cast<std::ptrdiff_t>(k);
      throw e;
    }
}

// Events: -1 none, 0 switch down, 1 switch up.
inline std::vector<std::int8_t> relay_events(std::span<const double> d_lo, std::span<const double> d_up) {
  std::vector<std::int8_t> ev(d_lo.size(), -1);
  for (std::size_t k = 0; k < d_lo.size(); ++k) {
    if (d_up[k] >= 0.0)
      ev[k] = 1;
    else if (d_lo[k] <= 0.0)
      ev[k] = 0;
  }
  return ev;
}

// One firing per time-connected excursion into an eps band.
inline std::vector<std::int8_t> proximity_events(std::span<const double> d_lo, std::span<const double> d_up,
                                                 double eps_alpha, double eps_beta) {
  const std::size_t n = d_lo.size();
  std::vector<std::int8_t> ev(n, -1);
  std::size_t k = 0;
  while (k < n) {
    if (d_up[k] < -eps_beta) {
      ++k;
      continue;
    }
    std::size_t j = k, fire = k;
    bool reached = false;
    while (j < n && d_up[j] >= -eps_beta) {
      if (!reached && d_up[j] >= 0.0) {
        reached = true;
        fire = j;
      } else if (!reached && d_up[j] > d_up[fire]) {
        fire = j;
      }
      ++j;
    }
    ev[fire] = 1;
    k = j;
  }
  k = 0;
  while (k < n) {
    if (d_lo[k] > eps_alpha) {
      ++k;
      continue;
    }
    std::size_t j = k, fire = k;
    bool reached = false;
    while (j < n && d_lo[j] <= eps_alpha) {
      if (!reached && d_lo[j] <= 0.0) {
        reached = true;
        fire = j;
      } else if (!reached && d_lo[j] < d_lo[fire]) {
        fire = j;
      }
      ++j;
    }
    if (ev[fire] == 1) throw Error(ErrorKind::InvalidArgument, "overlapping eps bands at index " + std::to_string(fire));
    ev[fire] = 0;
    k = j;
  }
  return ev;
}

inline std::optional<std::uint8_t> auto_initial(const std::vector<std::int8_t>& ev) {
  for (auto e : ev)
    if (e >= 0) return static_cast<std::uint8_t>(1 - e);
  return std::nullopt;
}

inline HysteronTrace trace_from_events(const HysteronSpec& spec, const std::vector<std::int8_t>& ev) {
  HysteronTrace tr;
  tr.spec = spec;
  if (spec.initial_state == InitialState::Auto) {
    auto init = auto_initial(ev);
    if (!init) throw Error(ErrorKind::NoSwitchObserved, "no threshold reached on '" + spec.signal_name + "'");
    tr.initial_state = *init;
  } else {
    tr.initial_state = spec.initial_state == InitialState::On ? 1 : 0;
  }
  tr.states.resize(ev.size());
  std::uint8_t s = tr.initial_state;
  for (std::size_t k = 0; k < ev.size(); ++k) {
    if (ev[k] >= 0 && static_cast<std::uint8_t>(ev[k]) != s) {
      s = static_cast<std::uint8_t>(ev[k]);
      tr.switches.push_back({k, s == 1});
    }
    tr.states[k] = s;
  }
  return tr;
}

struct Differences {
  std::vector<double> lo;  // x - alpha
  std::vector<double> up;  // x - beta
};

inline Differences differences(const HysteronSpec& spec, std::span<const double> x, std::span<const double> alpha,
                               std::span<const double> beta) {
  check_finite(x, "hysteron input");
  Differences d{std::vector<double>(x.size()), std::vector<double>(x.size())};
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double a = spec.alpha.is_channel() ? alpha[k] : spec.alpha.value;
    const double b = spec.beta.is_channel() ? beta[k] : spec.beta.value;
    if (!(a < b)) throw Error(ErrorKind::InvalidArgument, "alpha >= beta at index " + std::to_string(k));
    d.lo[k] = x[k] - a;
    d.up[k] = x[k] - b;
  }
  return d;
}

inline Differences differences(const HysteronSpec& spec, const TimeSeriesDataset& ds) {
  const auto& x = ds.values(spec.signal_name);
  std::span<const double> a, b;
  if (spec.alpha.is_channel()) a = ds.values(spec.alpha.channel);
  if (spec.beta.is_channel()) b = ds.values(spec.beta.channel);
  return differences(spec, x, a, b);
}

}  // namespace detail

inline HysteronTrace eval_relay(const HysteronSpec& spec, std::span<const double> x) {
  require(!spec.alpha.is_channel() && !spec.beta.is_channel(), "channel thresholds need a dataset");
  require(spec.eps_alpha == 0.0 && spec.eps_beta == 0.0, "relay hysteron takes no eps");
  spec.validate();
  auto d = detail::differences(spec, x, {}, {});
  return detail::trace_from_events(spec, detail::relay_events(d.lo, d.up));
}

inline HysteronTrace eval_relay(const HysteronSpec& spec, const TimeSeriesDataset& ds) {
  require(spec.eps_alpha == 0.0 && spec.eps_beta == 0.0, "relay hysteron takes no eps");
  spec.validate();
  auto d = detail::differences(spec, ds);
  return detail::trace_from_events(spec, detail::relay_events(d.lo, d.up));
}

inline HysteronTrace eval_proximity(const HysteronSpec& spec, std::span<const double> x) {
  require(!spec.alpha.is_channel() && !spec.beta.is_channel(), "channel thresholds need a dataset");
  spec.validate();
  auto d = detail::differences(spec, x, {}, {});
  return detail::trace_from_events(spec, detail::proximity_events(d.lo, d.up, spec.eps_alpha, spec.eps_beta));
}

inline HysteronTrace eval_proximity(const HysteronSpec& spec, const TimeSeriesDataset& ds) {
  spec.validate();
  auto d = detail::differences(spec, ds);
  return detail::trace_from_events(spec, detail::proximity_events(d.lo, d.up, spec.eps_alpha, spec.eps_beta));
}

struct EpsPair {
  double alpha = 0.0;
  double beta = 0.0;
};

// Half the largest per-step change seen near each threshold, capped at
// cap_fraction of the narrowest threshold gap.
inline EpsPair default_eps(std::span<const double> x, std::span<const double> d_lo, std::span<const double> d_up,
                           double cap_fraction = 0.25) {
  double gap = INFINITY;
  for (std::size_t k = 0; k < x.size(); ++k) gap = std::min(gap, d_lo[k] - d_up[k]);
  const double cap = cap_fraction * gap;
  EpsPair e;
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double dx = std::abs(x[k + 1] - x[k]);
    if (std::abs(d_up[k]) <= cap || std::abs(d_up[k + 1]) <= cap) e.beta = std::max(e.beta, 0.5 * dx);
    if (std::abs(d_lo[k]) <= cap || std::abs(d_lo[k + 1]) <= cap) e.alpha = std::max(e.alpha, 0.5 * dx);
  }
  e.alpha = std::min(e.alpha, cap);
  e.beta = std::min(e.beta, cap);
  return e;
}

inline EpsPair default_eps(const HysteronSpec& spec, const TimeSeriesDataset& ds, double cap_fraction = 0.25) {
  auto d = detail::differences(spec, ds);
  return default_eps(ds.values(spec.signal_name), d.lo, d.up, cap_fraction);
}

inline std::pair<IndicatorTrace, IndicatorTrace> eval_indicators(std::span<const double> diff, std::size_t source = 0) {
  detail::check_finite(diff, "indicator input");
  IndicatorTrace i{std::vector<std::uint8_t>(diff.size()), IndicatorKind::Upper, source};
  IndicatorTrace ibar{std::vector<std::uint8_t>(diff.size()), IndicatorKind::Lower, source};
  for (std::size_t k = 0; k < diff.size(); ++k) {
    i.values[k] = diff[k] >= 0.0;
    ibar.values[k] = diff[k] < 0.0;
  }
  return {std::move(i), std::move(ibar)};
}

// Pairwise differences inside each commensurable group, then every group
// channel against every threshold constant.
inline std::vector<DifferenceChannel> build_differences(const TimeSeriesDataset& ds,
                                                        const std::vector<std::vector<std::string>>& groups,
                                                        const std::vector<double>& constants = {}) {
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (const auto& name : groups[g]) {
      ds.index_of(name);
      for (std::size_t h = g + 1; h < groups.size(); ++h)
        require(std::find(groups[h].begin(), groups[h].end(), name) == groups[h].end(),
                "commensurable groups must be disjoint ('" + name + "')");
    }
  std::vector<DifferenceChannel> out;
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i + 1; j < g.size(); ++j) {
        const auto& a = ds.values(g[i]);
        const auto& b = ds.values(g[j]);
        DifferenceChannel d{g[i] + "-" + g[j], g[i], Threshold::of_channel(g[j]), std::vector<double>(a.size())};
        for (std::size_t k = 0; k < a.size(); ++k) d.values[k] = a[k] - b[k];
        out.push_back(std::move(d));
      }
    for (const auto& name : g)
      for (double c : constants) {
        const auto& a = ds.values(name);
        DifferenceChannel d{name + "-" + format_threshold_value(c), name, Threshold::constant(c),
                            std::vector<double>(a.size())};
        for (std::size_t k = 0; k < a.size(); ++k) d.values[k] = a[k] - c;
        out.push_back(std::move(d));
      }
  }
  return out;
}

namespace detail {
inline bool constant_trace(const std::vector<std::uint8_t>& v) {
  return std::all_of(v.begin(), v.end(), [&](std::uint8_t x) { return x == v.front(); });
}
}  // namespace detail

// Pairs a lower indicator (x < b, from difference x-b) with an upper one
// (x >= c, from difference x-c) on the same signal x when the two are never
// true together. A difference is never paired with itself and constant
// indicators are skipped since they cannot switch.
inline std::vector<CandidatePair> pair_candidates(const std::vector<DifferenceChannel>& diffs,
                                                  const std::vector<IndicatorTrace>& indicators) {
  std::vector<CandidatePair> out;
  for (const auto& lo : indicators) {
    if (lo.kind != IndicatorKind::Lower || detail::constant_trace(lo.values)) continue;
    for (const auto& up : indicators) {
      if (up.kind != IndicatorKind::Upper || detail::constant_trace(up.values)) continue;
      if (lo.source == up.source || diffs[lo.source].a != diffs[up.source].a) continue;
      require(lo.values.size() == up.values.size(), "indicator lengths differ");
      bool overlap = false;
      for (std::size_t k = 0; k < lo.values.size() && !overlap; ++k) overlap = lo.values[k] && up.values[k];
      if (!overlap) out.push_back({lo.source, up.source});
    }
  }
  return out;
}

inline HysteronSpec spec_from_pair(const std::vector<DifferenceChannel>& diffs, const CandidatePair& p) {
  HysteronSpec s;
  s.signal_name = diffs[p.lower].a;
  s.alpha = diffs[p.lower].b;
  s.beta = diffs[p.upper].b;
  return s;
}

inline std::string format_threshold_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // shortest representation that round trips
  for (int prec = 1; prec <= 17; ++prec) {
    char tmp[32];
    std::snprintf(tmp, sizeof tmp, "%.*g", prec, v);
    if (std::strtod(tmp, nullptr) == v) return tmp;
  }
  return buf;
}

}  // namespace hysid
