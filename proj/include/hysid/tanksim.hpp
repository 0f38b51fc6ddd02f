#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "hysid/dataset.hpp"

namespace hysid {

struct TankScenario {
  double h0 = 0.5;
  double h_min = 0.15;
  double h_max = 0.85;
  double q_in = 0.0011;    // inflow per step while the pump runs
  double q_out = -0.0005;  // drain per step
  std::size_t pipe_delay = 0;
  std::size_t n_steps = 8000;
  double base_step = 0.001;
  bool initial_pump = false;

  void validate() const {
    require(h_min < h_max, "tank: h_min must be below h_max");
    require(q_in > 0.0 && q_out < 0.0, "tank: need q_in > 0 > q_out");
    require(q_in + q_out > 0.0, "tank: level cannot rise with the pump on");
    require(n_steps >= 2, "tank: n_steps must be >= 2");
    require(pipe_delay < n_steps, "tank: pipe delay must be below n_steps");
    require(base_step > 0.0, "tank: base_step must be positive");
  }

  bool valid() const {
    try {
      validate();
      return true;
    } catch (const Error&) {
      return false;
    }
  }
};

// Two-point controller: command on at h <= h_min, off at h > h_max, else
// hold. The pump applies the command l_p steps later.
inline TimeSeriesDataset simulate(const TankScenario& sc) {
  sc.validate();
  const std::size_t n = sc.n_steps, lp = sc.pipe_delay;
  std::vector<double> h(n), u(n), cmd(n);
  h[0] = sc.h0;
  bool state = sc.initial_pump;
  for (std::size_t t = 0; t < n; ++t) {
    if (h[t] <= sc.h_min)
      state = true;
    else if (h[t] > sc.h_max)
      state = false;
    cmd[t] = state ? 1.0 : 0.0;
    const double applied = t >= lp ? cmd[t - lp] : (sc.initial_pump ? 1.0 : 0.0);
    u[t] = sc.q_in * applied;
    if (t + 1 < n) h[t + 1] = h[t] + u[t] + sc.q_out;
  }
  std::vector<Channel> ch;
  ch.push_back({"h", std::move(h)});
  ch.push_back({"u", std::move(u)});
  ch.push_back({"pump_cmd", std::move(cmd)});
  ch.push_back({"q_in", std::vector<double>(n, sc.q_in)});
  ch.push_back({"q_out", std::vector<double>(n, sc.q_out)});
  ch.push_back({"h_min", std::vector<double>(n, sc.h_min)});
  ch.push_back({"h_max", std::vector<double>(n, sc.h_max)});
  return TimeSeriesDataset(sc.base_step, std::move(ch));
}

using Range = std::pair<double, double>;

struct ScenarioVariations {
  std::optional<Range> h_min, h_max, q_in, q_out;
  std::optional<Range> h0_fraction;  // h0 = h_min + f * (h_max - h_min)
  std::optional<std::pair<std::size_t, std::size_t>> pipe_delay;
  bool random_initial_pump = false;
};

inline std::vector<TankScenario> make_scenario_batch(const TankScenario& base, std::size_t n_runs,
                                                     const ScenarioVariations& var, std::uint64_t seed) {
  require(n_runs >= 2, "scenario batch needs at least 2 runs");
  base.validate();
  auto check = [](const std::optional<Range>& r) { require(!r || r->first <= r->second, "variation range reversed"); };
  check(var.h_min), check(var.h_max), check(var.q_in), check(var.q_out), check(var.h0_fraction);
  std::mt19937_64 rng(seed);
  auto draw = [&](const std::optional<Range>& r, double fallback) {
    if (!r) return fallback;
    if (r->first == r->second) return r->first;
    return std::uniform_real_distribution<double>(r->first, r->second)(rng);
  };
  std::vector<TankScenario> out{base};
  while (out.size() < n_runs) {
    TankScenario sc = base;
    int tries = 0;
    for (;;) {
      sc.h_min = draw(var.h_min, base.h_min);
      sc.h_max = draw(var.h_max, base.h_max);
      sc.q_in = draw(var.q_in, base.q_in);
      sc.q_out = draw(var.q_out, base.q_out);
      if (var.h0_fraction) sc.h0 = sc.h_min + draw(var.h0_fraction, 0.5) * (sc.h_max - sc.h_min);
      if (var.pipe_delay)
        sc.pipe_delay = std::uniform_int_distribution<std::size_t>(var.pipe_delay->first, var.pipe_delay->second)(rng);
      if (var.random_initial_pump) sc.initial_pump = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
      if (sc.valid()) break;
      if (++tries >= 100)
        throw Error(ErrorKind::InfeasibleVariation,
                    "no valid scenario after 100 draws for run " + std::to_string(out.size()));
    }
    out.push_back(sc);
  }
  return out;
}

}  // namespace hysid
