#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "hysid/dataset.hpp"
#include "hysid/hysteron.hpp"
#include "hysid/model.hpp"
#include "hysid/regression.hpp"
#include "hysid/tanksim.hpp"

namespace hysid {

inline constexpr const char* kConfigSchema = "hysid-config/1";

enum class HysteronKind { Relay, Proximity };

inline std::string kind_name(HysteronKind k) { return k == HysteronKind::Relay ? "relay" : "proximity"; }

inline HysteronKind kind_from(const std::string& s) {
  if (s == "relay") return HysteronKind::Relay;
  if (s == "proximity") return HysteronKind::Proximity;
  throw Error(ErrorKind::Config, "hysteron kind must be 'relay' or 'proximity', got '" + s + "'");
}

struct RunConfig {
  std::uint64_t seed = 7;
  std::size_t workers = 1;

  TankScenario base;
  std::size_t n_runs = 20;
  ScenarioVariations variations;

  std::size_t downsample = 1;
  std::optional<double> snr;
  std::vector<std::string> noise_channels{"h"};
  double scale_lo = -1.0;
  double scale_hi = 1.0;
  std::vector<ScalingGroup> scaling_groups{{{"h", "h_min", "h_max"}, GroupMode::Affine},
                                           {{"q_in", "q_out"}, GroupMode::Gain}};
  std::size_t lag_q = 0;

  HysteronKind kind = HysteronKind::Proximity;
  std::vector<std::vector<std::string>> commensurable_groups{{"h", "h_min", "h_max"}};
  std::vector<double> threshold_constants;
  std::vector<HysteronSpec> explicit_hysterons;
  std::optional<EpsPair> fixed_eps;
  double eps_cap_fraction = 0.25;
  std::uint8_t no_switch_state = 0;

  int degree = 1;
  std::vector<std::string> state_channels{"h", "q_in", "q_out"};

  std::vector<std::string> targets{"h"};
  StlsqConfig stlsq;

  std::size_t train_count = 16;

  std::size_t horizon = 0;  // samples at the undecimated rate, 0 = whole record
  std::string truth_channel = "pump_cmd";
  std::vector<std::string> band_channels{"h_min", "h_max"};
  std::size_t switch_window = 5;

  std::vector<int> degree_values{1, 2, 3};
  std::vector<double> snr_values{1000, 100, 50, 10};
  std::vector<std::size_t> samplerate_values{1, 2, 5, 10, 20};

  void validate() const {
    auto bad = [](const std::string& w) { throw Error(ErrorKind::Config, w); };
    if (workers < 1) bad("workers must be >= 1");
    if (!base.valid()) bad("scenario.base violates the tank invariants");
    if (n_runs < 2) bad("scenario.n_runs must be >= 2");
    if (train_count == 0 || train_count >= n_runs) bad("split.train_count must be in [1, n_runs)");
    if (downsample < 1) bad("preprocess.downsample must be >= 1");
    if (snr && !(*snr > 0.0)) bad("preprocess.snr must be positive");
    if (!(scale_lo < scale_hi)) bad("preprocess.scale lo must be below hi");
    if (degree < 0) bad("library.degree must be >= 0");
    if (stlsq.lambda < 0.0) bad("regression.lambda must be >= 0");
    if (stlsq.max_iterations < 1) bad("regression.max_iterations must be >= 1");
    if (stlsq.ridge < 0.0) bad("regression.ridge must be >= 0");
    if (targets.empty()) bad("regression.targets must not be empty");
    if (state_channels.empty()) bad("library.state_channels must not be empty");
    if (!(eps_cap_fraction > 0.0 && eps_cap_fraction < 0.5)) bad("hysterons.eps.cap_fraction must be in (0, 0.5)");
    if (no_switch_state > 1) bad("hysterons.no_switch_state must be 0 or 1");
    if (switch_window < 1) bad("predict.switch_window must be >= 1");
  }
};

namespace detail {

inline void known_keys(const nlohmann::json& j, const std::string& where, std::set<std::string> keys) {
  if (!j.is_object()) throw Error(ErrorKind::Config, where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!keys.contains(k)) throw Error(ErrorKind::Config, "unknown key '" + k + "' in " + where);
}

inline Range range_from(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorKind::Config, what + " must be a [lo, hi] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  using detail::known_keys;
  RunConfig c;
  try {
    known_keys(j, "config", {"schema", "seed", "workers", "scenario", "preprocess", "hysterons", "library",
                             "regression", "split", "predict", "experiment", "description"});
    if (j.value("schema", std::string()) != kConfigSchema)
      throw Error(ErrorKind::Config, std::string("config schema must be '") + kConfigSchema + "'");
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);

    if (j.contains("scenario")) {
      const auto& s = j["scenario"];
      known_keys(s, "scenario", {"base", "n_runs", "variations"});
      if (s.contains("base")) {
        const auto& b = s["base"];
        known_keys(b, "scenario.base",
                   {"h0", "h_min", "h_max", "q_in", "q_out", "pipe_delay", "n_steps", "base_step", "initial_pump"});
        c.base.h0 = b.value("h0", c.base.h0);
        c.base.h_min = b.value("h_min", c.base.h_min);
        c.base.h_max = b.value("h_max", c.base.h_max);
        c.base.q_in = b.value("q_in", c.base.q_in);
        c.base.q_out = b.value("q_out", c.base.q_out);
        c.base.pipe_delay = b.value("pipe_delay", c.base.pipe_delay);
        c.base.n_steps = b.value("n_steps", c.base.n_steps);
        c.base.base_step = b.value("base_step", c.base.base_step);
        if (b.contains("initial_pump")) c.base.initial_pump = b["initial_pump"].get<std::string>() == "on";
      }
      c.n_runs = s.value("n_runs", c.n_runs);
      if (s.contains("variations")) {
        const auto& v = s["variations"];
        known_keys(v, "scenario.variations",
                   {"h_min", "h_max", "q_in", "q_out", "h0_fraction", "pipe_delay", "random_initial_pump"});
        if (v.contains("h_min")) c.variations.h_min = detail::range_from(v["h_min"], "h_min");
        if (v.contains("h_max")) c.variations.h_max = detail::range_from(v["h_max"], "h_max");
        if (v.contains("q_in")) c.variations.q_in = detail::range_from(v["q_in"], "q_in");
        if (v.contains("q_out")) c.variations.q_out = detail::range_from(v["q_out"], "q_out");
        if (v.contains("h0_fraction")) c.variations.h0_fraction = detail::range_from(v["h0_fraction"], "h0_fraction");
        if (v.contains("pipe_delay"))
          c.variations.pipe_delay = {v["pipe_delay"][0].get<std::size_t>(), v["pipe_delay"][1].get<std::size_t>()};
        c.variations.random_initial_pump = v.value("random_initial_pump", false);
      }
    }

    if (j.contains("preprocess")) {
      const auto& p = j["preprocess"];
      known_keys(p, "preprocess", {"downsample", "snr", "noise_channels", "scale", "lags"});
      c.downsample = p.value("downsample", c.downsample);
      if (p.contains("snr") && !p["snr"].is_null()) c.snr = p["snr"].get<double>();
      if (p.contains("noise_channels")) c.noise_channels = p["noise_channels"].get<std::vector<std::string>>();
      c.lag_q = p.value("lags", c.lag_q);
      if (p.contains("scale")) {
        const auto& s = p["scale"];
        known_keys(s, "preprocess.scale", {"lo", "hi", "groups"});
        c.scale_lo = s.value("lo", c.scale_lo);
        c.scale_hi = s.value("hi", c.scale_hi);
        if (s.contains("groups")) {
          c.scaling_groups.clear();
          for (const auto& g : s["groups"]) {
            known_keys(g, "preprocess.scale.groups[]", {"channels", "mode"});
            ScalingGroup sg;
            sg.channels = g.at("channels").get<std::vector<std::string>>();
            const auto mode = g.value("mode", std::string("affine"));
            if (mode != "affine" && mode != "gain") throw Error(ErrorKind::Config, "scale mode must be affine|gain");
            sg.mode = mode == "gain" ? GroupMode::Gain : GroupMode::Affine;
            c.scaling_groups.push_back(std::move(sg));
          }
        }
      }
    }

    if (j.contains("hysterons")) {
      const auto& h = j["hysterons"];
      known_keys(h, "hysterons", {"kind", "groups", "threshold_constants", "explicit", "eps", "no_switch_state"});
      if (h.contains("kind")) c.kind = kind_from(h["kind"].get<std::string>());
      if (h.contains("groups")) c.commensurable_groups = h["groups"].get<std::vector<std::vector<std::string>>>();
      if (h.contains("threshold_constants")) c.threshold_constants = h["threshold_constants"].get<std::vector<double>>();
      if (h.contains("explicit"))
        for (const auto& e : h["explicit"]) c.explicit_hysterons.push_back(hysteron_from_json(e));
      if (h.contains("eps")) {
        const auto& e = h["eps"];
        known_keys(e, "hysterons.eps", {"policy", "alpha", "beta", "cap_fraction"});
        const auto policy = e.value("policy", std::string("auto"));
        if (policy == "fixed")
          c.fixed_eps = EpsPair{e.value("alpha", 0.0), e.value("beta", 0.0)};
        else if (policy != "auto")
          throw Error(ErrorKind::Config, "hysterons.eps.policy must be auto|fixed");
        c.eps_cap_fraction = e.value("cap_fraction", c.eps_cap_fraction);
      }
      c.no_switch_state = static_cast<std::uint8_t>(h.value("no_switch_state", 0));
    }

    if (j.contains("library")) {
      const auto& l = j["library"];
      known_keys(l, "library", {"degree", "state_channels"});
      c.degree = l.value("degree", c.degree);
      if (l.contains("state_channels")) c.state_channels = l["state_channels"].get<std::vector<std::string>>();
    }

    if (j.contains("regression")) {
      const auto& r = j["regression"];
      known_keys(r, "regression", {"targets", "lambda", "max_iterations", "ridge", "rank_policy"});
      if (r.contains("targets")) c.targets = r["targets"].get<std::vector<std::string>>();
      c.stlsq.lambda = r.value("lambda", c.stlsq.lambda);
      c.stlsq.max_iterations = r.value("max_iterations", c.stlsq.max_iterations);
      c.stlsq.ridge = r.value("ridge", c.stlsq.ridge);
      const auto rp = r.value("rank_policy", std::string("prune"));
      if (rp == "prune")
        c.stlsq.rank_policy = RankPolicy::Prune;
      else if (rp == "ridge_retry")
        c.stlsq.rank_policy = RankPolicy::RidgeRetry;
      else if (rp == "strict")
        c.stlsq.rank_policy = RankPolicy::Strict;
      else
        throw Error(ErrorKind::Config, "regression.rank_policy must be prune|ridge_retry|strict");
    }

    if (j.contains("split")) {
      known_keys(j["split"], "split", {"train_count"});
      c.train_count = j["split"].value("train_count", c.train_count);
    }

    if (j.contains("predict")) {
      const auto& p = j["predict"];
      known_keys(p, "predict", {"horizon", "truth_channel", "band_channels", "switch_window"});
      c.horizon = p.value("horizon", c.horizon);
      c.truth_channel = p.value("truth_channel", c.truth_channel);
      if (p.contains("band_channels")) c.band_channels = p["band_channels"].get<std::vector<std::string>>();
      c.switch_window = p.value("switch_window", c.switch_window);
    }

    if (j.contains("experiment")) {
      const auto& e = j["experiment"];
      known_keys(e, "experiment", {"degree", "snr", "samplerate"});
      if (e.contains("degree")) c.degree_values = e["degree"].get<std::vector<int>>();
      if (e.contains("snr")) c.snr_values = e["snr"].get<std::vector<double>>();
      if (e.contains("samplerate")) c.samplerate_values = e["samplerate"].get<std::vector<std::size_t>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("bad config value: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    throw Error(ErrorKind::Config, e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Config, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace hysid
