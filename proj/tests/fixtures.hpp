#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "hysid/hysid.hpp"

namespace hysid::test {

// h(k+1) = h(k) + q_out + q_in * Hbar1(k), H1 on h between h_min and h_max.
inline SparseModel true_tank_model() {
  SparseModel m;
  m.state_channels = {"h", "q_in", "q_out"};
  m.target_channels = {"h"};
  m.degree = 1;
  HysteronSpec h;
  h.signal_name = "h";
  h.alpha = Threshold::of_channel("h_min");
  h.beta = Threshold::of_channel("h_max");
  m.hysterons = {h};
  m.descriptors = enumerate_basis(3, 1, 1);
  auto names = signal_column_names(m.state_channels, 0);
  for (auto& d : m.descriptors) d.name = basis_name(d, names);
  m.coefficients = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.descriptors.size()), 1);
  for (std::size_t j = 0; j < m.descriptors.size(); ++j) {
    const auto& n = m.descriptors[j].name;
    if (n == "h" || n == "q_out" || n == "q_in*Hbar1") m.coefficients(static_cast<Eigen::Index>(j), 0) = 1.0;
  }
  return m;
}

// Random walk that keeps crossing both thresholds 0 and 1.
inline std::vector<double> crossing_signal(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> step(0.02, 0.3);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  std::vector<double> x(n);
  double v = std::uniform_real_distribution<double>(-0.5, 1.5)(rng);
  int dir = 1;
  for (auto& xi : x) {
    xi = v;
    v += dir * step(rng) + jitter(rng);
    if (v > 1.2 + jitter(rng)) dir = -1;
    if (v < -0.2 + jitter(rng)) dir = 1;
  }
  return x;
}

inline HysteronSpec unit_spec(double eps_alpha = 0.0, double eps_beta = 0.0,
                              InitialState init = InitialState::Auto) {
  HysteronSpec s;
  s.signal_name = "x";
  s.alpha = Threshold::constant(0.0);
  s.beta = Threshold::constant(1.0);
  s.eps_alpha = eps_alpha;
  s.eps_beta = eps_beta;
  s.initial_state = init;
  return s;
}

inline TimeSeriesDataset single(const std::vector<double>& x, const std::string& name = "x") {
  return TimeSeriesDataset(1.0, {{name, x}});
}

}  // namespace hysid::test
