#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hysid/config.hpp"
#include "hysid/csv.hpp"
#include "hysid/dataset.hpp"
#include "hysid/embedding.hpp"
#include "hysid/hysteron.hpp"
#include "hysid/library.hpp"
#include "hysid/metrics.hpp"
#include "hysid/model.hpp"
#include "hysid/regression.hpp"
#include "hysid/tanksim.hpp"

namespace hysid {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
// written to per-index slots so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::vector<TimeSeriesDataset> simulate_batch(const RunConfig& cfg) {
  const auto scenarios = make_scenario_batch(cfg.base, cfg.n_runs, cfg.variations, cfg.seed);
  std::vector<TimeSeriesDataset> runs(scenarios.size());
  parallel_for(scenarios.size(), cfg.workers, [&](std::size_t i) { runs[i] = simulate(scenarios[i]); });
  return runs;
}

struct PreparedRun {
  TimeSeriesDataset clean;     // decimated, noise free
  TimeSeriesDataset observed;  // decimated, noisy if configured
};

// Decimation, then noise. Noise of run i uses its own seed stream so every
// sweep point sees the same realisation, only scaled.
inline PreparedRun prepare_run(const TimeSeriesDataset& raw, const RunConfig& cfg, std::size_t run_index) {
  PreparedRun p{cfg.downsample > 1 ? downsample(raw, cfg.downsample) : raw, {}};
  p.observed = cfg.snr ? add_noise(p.clean, *cfg.snr, mix_seed(cfg.seed, 1000 + run_index), cfg.noise_channels)
                       : p.clean;
  return p;
}

struct Warning {
  std::string stage;
  std::string message;
};

inline HysteronTrace evaluate_hysteron(HysteronSpec spec, const TimeSeriesDataset& scaled, const RunConfig& cfg,
                                       std::vector<Warning>* warnings = nullptr, const std::string& label = "") {
  if (cfg.kind == HysteronKind::Relay) {
    spec.eps_alpha = spec.eps_beta = 0.0;
  } else {
    const EpsPair e = cfg.fixed_eps ? *cfg.fixed_eps : default_eps(spec, scaled, cfg.eps_cap_fraction);
    spec.eps_alpha = e.alpha;
    spec.eps_beta = e.beta;
  }
  auto eval = [&](const HysteronSpec& s) {
    return cfg.kind == HysteronKind::Relay ? eval_relay(s, scaled) : eval_proximity(s, scaled);
  };
  try {
    return eval(spec);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoSwitchObserved || spec.initial_state != InitialState::Auto) throw;
    if (warnings)
      warnings->push_back({"hysterons", label + ": no switch observed on '" + spec.signal_name +
                                            "', initial state set to " + std::to_string(cfg.no_switch_state)});
    spec.initial_state = cfg.no_switch_state ? InitialState::On : InitialState::Off;
    return eval(spec);
  }
}

// Candidate hysterons from indicator pairs, judged over all runs at once.
inline std::vector<HysteronSpec> generate_candidates(const std::vector<TimeSeriesDataset>& scaled_runs,
                                                     const RunConfig& cfg) {
  if (!cfg.explicit_hysterons.empty()) return cfg.explicit_hysterons;
  if (cfg.commensurable_groups.empty()) return {};
  std::vector<DifferenceChannel> pooled;
  for (std::size_t r = 0; r < scaled_runs.size(); ++r) {
    auto d = build_differences(scaled_runs[r], cfg.commensurable_groups, cfg.threshold_constants);
    if (r == 0) {
      pooled = std::move(d);
      continue;
    }
    for (std::size_t i = 0; i < d.size(); ++i)
      pooled[i].values.insert(pooled[i].values.end(), d[i].values.begin(), d[i].values.end());
  }
  std::vector<IndicatorTrace> indicators;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    auto [up, lo] = eval_indicators(pooled[i].values, i);
    indicators.push_back(std::move(up));
    indicators.push_back(std::move(lo));
  }
  std::vector<HysteronSpec> out;
  for (const auto& p : pair_candidates(pooled, indicators)) out.push_back(spec_from_pair(pooled, p));
  return out;
}

inline std::optional<SwitchReport> detection_report(const HysteronTrace& tr, const TimeSeriesDataset& record,
                                                    const RunConfig& cfg, std::size_t n = 0) {
  if (!record.has(cfg.truth_channel)) return std::nullopt;
  const auto& truth = record.values(cfg.truth_channel);
  n = n == 0 ? truth.size() : std::min(n, truth.size());
  return match_switches(change_indices<double>(std::span(truth.data(), n)),
                        change_indices<std::uint8_t>(std::span(tr.states.data(), std::min(n, tr.states.size()))),
                        cfg.switch_window);
}

struct Identification {
  SparseModel model;
  std::size_t library_columns = 0;
  std::size_t rows = 0;
  std::vector<std::string> column_names;
  std::vector<int> iterations;
  std::vector<std::vector<int>> support_sizes;
  std::vector<SwitchReport> detection;  // per training run, first hysteron
  std::vector<double> residual_rms;     // per target, scaled units
  std::vector<Warning> warnings;
};

inline Identification identify(const std::vector<TimeSeriesDataset>& train, const RunConfig& cfg) {
  require(!train.empty(), "identify: no training runs");
  Identification id;
  const ScalingMap scaling = fit_group_scaling(train, cfg.scaling_groups, cfg.scale_lo, cfg.scale_hi);
  std::vector<TimeSeriesDataset> scaled;
  for (const auto& r : train) scaled.push_back(apply_scaling(r, scaling));

  const auto specs = generate_candidates(scaled, cfg);
  const std::size_t m = specs.size();
  const std::size_t ns = cfg.state_channels.size() * (cfg.lag_q + 1);

  std::vector<RegressionPair> pairs;
  std::size_t rows = 0;
  for (std::size_t r = 0; r < scaled.size(); ++r) {
    std::vector<HysteronTrace> traces;
    for (const auto& s : specs)
      traces.push_back(evaluate_hysteron(s, scaled[r], cfg, &id.warnings, "train run " + std::to_string(r)));
    if (!traces.empty())
      if (auto rep = detection_report(traces.front(), scaled[r], cfg)) id.detection.push_back(*rep);
    pairs.push_back(build_regression_pair(scaled[r], cfg.state_channels, cfg.targets, LagSpec{cfg.lag_q}, traces));
    rows += static_cast<std::size_t>(pairs.back().target.rows());
  }
  Eigen::MatrixXd signals(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(ns));
  Eigen::MatrixXd updated(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(2 * m));
  Eigen::MatrixXd target(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cfg.targets.size()));
  Eigen::Index at = 0;
  for (const auto& p : pairs) {
    signals.middleRows(at, p.signals.rows()) = p.signals;
    updated.middleRows(at, p.updated.rows()) = p.updated;
    target.middleRows(at, p.target.rows()) = p.target;
    at += p.target.rows();
  }

  const auto names = signal_column_names(cfg.state_channels, cfg.lag_q);
  auto descriptors = enumerate_basis(ns, m, cfg.degree);
  for (auto& d : descriptors) d.name = basis_name(d, names);
  const BasisLibrary lib = evaluate(descriptors, signals, updated);
  const StlsqResult fit = stlsq(lib.matrix, target, cfg.stlsq);
  for (const auto& w : fit.warnings) id.warnings.push_back({"regression", w});

  id.model.state_channels = cfg.state_channels;
  id.model.target_channels = cfg.targets;
  id.model.lag_q = cfg.lag_q;
  id.model.degree = cfg.degree;
  id.model.hysterons = specs;
  for (auto& h : id.model.hysterons) h.initial_state = InitialState::Auto;
  id.model.descriptors = descriptors;
  id.model.coefficients = fit.coefficients;
  id.model.scaling = scaling;
  id.library_columns = descriptors.size();
  id.rows = rows;
  for (const auto& d : descriptors) id.column_names.push_back(d.name);
  id.iterations = fit.iterations;
  id.support_sizes = fit.support_sizes;
  const Eigen::MatrixXd resid = lib.matrix * fit.coefficients - target;
  for (Eigen::Index t = 0; t < resid.cols(); ++t)
    id.residual_rms.push_back(std::sqrt(resid.col(t).squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, rows))));
  return id;
}

struct Prediction {
  std::size_t steps = 0;        // samples in the compared trajectory
  double rmse_scaled = NAN;     // first target, scaled units
  double rmse_unscaled = NAN;
  double band_scaled = NAN;     // mean (upper - lower band channel), scaled
  double rmse_band = NAN;       // rmse_scaled / band_scaled
  double final_quarter_std = NAN;
  double truth_std = NAN;
  bool diverged = false;
  std::ptrdiff_t divergence_step = -1;
  std::optional<SwitchReport> switches;   // free-run hysteron vs truth
  std::optional<SwitchReport> detection;  // evaluated hysteron on the record vs truth
  std::vector<double> time, truth, observed, predicted;
  std::vector<std::uint8_t> predicted_hysteron;
  std::vector<Warning> warnings;
};

inline std::size_t effective_horizon(const RunConfig& cfg, std::size_t length) {
  if (cfg.horizon == 0) return length;
  return std::clamp<std::size_t>(cfg.horizon / cfg.downsample, 2, length);
}

// Free run on one record. `observed` supplies the initial state and inputs;
// the clean record is the reference trajectory.
inline Prediction predict(const SparseModel& model, const TimeSeriesDataset& observed, const TimeSeriesDataset& clean,
                          const RunConfig& cfg, std::size_t n_samples = 0) {
  Prediction p;
  const TimeSeriesDataset obs = apply_scaling(observed, model.scaling);
  const TimeSeriesDataset ref = apply_scaling(clean, model.scaling);
  n_samples = n_samples == 0 ? effective_horizon(cfg, obs.length()) : std::min(n_samples, obs.length());
  require(n_samples >= 2, "predict: need at least 2 samples");
  p.steps = n_samples;

  std::vector<std::uint8_t> init;
  std::vector<HysteronTrace> evaluated;
  for (const auto& s : model.hysterons) {
    evaluated.push_back(evaluate_hysteron(s, obs, cfg, &p.warnings, "prediction record"));
    init.push_back(evaluated.back().states.front());
  }
  if (!evaluated.empty()) p.detection = detection_report(evaluated.front(), obs, cfg, n_samples);

  const std::string& target = model.target_channels.front();
  const auto& truth = ref.values(target);
  const auto& seen = obs.values(target);
  p.truth.assign(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(n_samples));
  p.observed.assign(seen.begin(), seen.begin() + static_cast<std::ptrdiff_t>(n_samples));
  for (std::size_t k = 0; k < n_samples; ++k) p.time.push_back(obs.time(k));
  p.truth_std = stddev(p.truth);
  if (cfg.band_channels.size() == 2 && ref.has(cfg.band_channels[0]) && ref.has(cfg.band_channels[1])) {
    const auto& lo = ref.values(cfg.band_channels[0]);
    const auto& hi = ref.values(cfg.band_channels[1]);
    double s = 0.0;
    for (std::size_t k = 0; k < n_samples; ++k) s += hi[k] - lo[k];
    p.band_scaled = s / static_cast<double>(n_samples);
  } else {
    auto [mn, mx] = std::minmax_element(p.truth.begin(), p.truth.end());
    p.band_scaled = *mx - *mn;
  }

  try {
    const FreeRunResult fr = free_run(model, obs, n_samples - 1, init);
    p.predicted = fr.trajectory.values(target);
    if (!fr.traces.empty()) {
      p.predicted_hysteron = fr.traces.front().states;
      p.switches = detection_report(fr.traces.front(), obs, cfg, n_samples);
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DivergenceDetected) throw;
    p.diverged = true;
    p.divergence_step = e.step;
    p.warnings.push_back({"predict", e.what()});
    p.rmse_scaled = p.rmse_unscaled = p.rmse_band = std::numeric_limits<double>::infinity();
    return p;
  }
  p.rmse_scaled = rmse(p.predicted, p.truth);
  const auto it = model.scaling.find(target);
  p.rmse_unscaled = it == model.scaling.end() ? p.rmse_scaled : p.rmse_scaled / std::abs(it->second.gain);
  p.rmse_band = p.rmse_scaled / p.band_scaled;
  const std::size_t q0 = n_samples - std::max<std::size_t>(1, n_samples / 4);
  p.final_quarter_std = stddev(std::span(p.predicted).subspan(q0));
  return p;
}

struct PointResult {
  double sweep_value = 0.0;
  HysteronKind kind = HysteronKind::Proximity;
  std::string label;
  std::optional<Identification> identification;
  std::vector<Prediction> predictions;
  std::string error;  // stage-labelled failure, empty on success
  double rmse_band = NAN;    // mean over validation runs
  double rmse_scaled = NAN;  // mean over validation runs
  std::size_t active_terms = 0;
  std::size_t library_columns = 0;
  SwitchSummary detection;  // hysteron evaluation on all records vs truth
  SwitchSummary free_run;   // free-run hysteron vs truth
  bool diverged = false;
};

inline bool has_hysteron_term(const SparseModel& m, std::size_t target, bool cross_only) {
  for (std::size_t j = 0; j < m.descriptors.size(); ++j) {
    const auto kind = m.descriptors[j].kind;
    const bool hit = cross_only ? kind == BasisKind::Cross : (kind == BasisKind::Cross || kind == BasisKind::Hysteron);
    if (hit && m.coefficients(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(target)) != 0.0) return true;
  }
  return false;
}

// Identification on the training split, free runs on the validation split.
inline PointResult run_point(const std::vector<TimeSeriesDataset>& raw, const RunConfig& cfg) {
  PointResult pr;
  pr.kind = cfg.kind;
  std::string stage = "preprocess";
  try {
    std::vector<PreparedRun> runs;
    for (std::size_t i = 0; i < raw.size(); ++i) runs.push_back(prepare_run(raw[i], cfg, i));
    auto [train, val] = split_scenarios(runs, cfg.train_count);
    std::vector<TimeSeriesDataset> observed;
    for (const auto& r : train) observed.push_back(r.observed);
    stage = "identify";
    pr.identification = identify(observed, cfg);
    const auto& id = *pr.identification;
    for (const auto& d : id.detection) pr.detection.add(d);
    pr.active_terms = active_term_count(id.model).front();
    pr.library_columns = id.library_columns;
    stage = "predict";
    double sb = 0.0, ss = 0.0;
    for (const auto& r : val) {
      pr.predictions.push_back(predict(id.model, r.observed, r.clean, cfg));
      const auto& p = pr.predictions.back();
      if (p.detection) pr.detection.add(*p.detection);
      if (p.switches) pr.free_run.add(*p.switches);
      pr.diverged = pr.diverged || p.diverged;
      sb += p.rmse_band;
      ss += p.rmse_scaled;
    }
    pr.rmse_band = sb / static_cast<double>(val.size());
    pr.rmse_scaled = ss / static_cast<double>(val.size());
  } catch (const Error& e) {
    pr.error = stage + ": " + e.what();
  }
  return pr;
}

enum class Sweep { Degree, Snr, SampleRate };

inline Sweep sweep_from(const std::string& s) {
  if (s == "degree") return Sweep::Degree;
  if (s == "snr") return Sweep::Snr;
  if (s == "samplerate") return Sweep::SampleRate;
  throw Error(ErrorKind::Config, "sweep must be degree|snr|samplerate, got '" + s + "'");
}

inline std::string sweep_name(Sweep s) {
  return s == Sweep::Degree ? "degree" : s == Sweep::Snr ? "snr" : "samplerate";
}

inline std::vector<std::pair<RunConfig, std::string>> sweep_points(Sweep sweep, const RunConfig& cfg,
                                                                   std::vector<double>& values) {
  std::vector<std::pair<RunConfig, std::string>> out;
  values.clear();
  auto num = [](double v) { return format_double(v); };
  switch (sweep) {
    case Sweep::Degree:
      for (int d : cfg.degree_values) {
        RunConfig c = cfg;
        c.degree = d;
        out.emplace_back(c, "degree_" + std::to_string(d));
        values.push_back(d);
      }
      break;
    case Sweep::Snr:
      for (double s : cfg.snr_values) {
        RunConfig c = cfg;
        c.snr = s;
        out.emplace_back(c, "snr_" + num(s));
        values.push_back(s);
      }
      break;
    case Sweep::SampleRate:
      for (HysteronKind k : {HysteronKind::Relay, HysteronKind::Proximity})
        for (std::size_t f : cfg.samplerate_values) {
          RunConfig c = cfg;
          c.downsample = f;
          c.kind = k;
          out.emplace_back(c, "samplerate_" + std::to_string(f) + "_" + kind_name(k));
          values.push_back(static_cast<double>(f));
        }
      break;
  }
  return out;
}

inline std::vector<PointResult> run_sweep(Sweep sweep, const RunConfig& cfg,
                                          const std::vector<TimeSeriesDataset>* raw_runs = nullptr) {
  std::vector<TimeSeriesDataset> simulated;
  if (!raw_runs) {
    simulated = simulate_batch(cfg);
    raw_runs = &simulated;
  }
  std::vector<double> values;
  const auto points = sweep_points(sweep, cfg, values);
  std::vector<PointResult> out(points.size());
  parallel_for(points.size(), cfg.workers, [&](std::size_t i) {
    out[i] = run_point(*raw_runs, points[i].first);
    out[i].sweep_value = values[i];
    out[i].label = points[i].second;
  });
  return out;
}

}  // namespace hysid
