#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hysid/config.hpp"
#include "hysid/csv.hpp"
#include "hysid/model.hpp"
#include "hysid/pipeline.hpp"

namespace hysid {

namespace fs = std::filesystem;

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitPipeline = 3,
  kExitDivergence = 4,
  kExitIo = 5,
};

inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return kExitConfig;
    case ErrorKind::Io: return kExitIo;
    case ErrorKind::DivergenceDetected: return kExitDivergence;
    default: return kExitPipeline;
  }
}

// Every output goes through here so the manifest lists exactly what was written.
class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create output directory '" + dir + "': " + ec.message());
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write_text(const std::string& name, const std::string& text) {
    std::ofstream f(path(name), std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot open '" + path(name) + "' for writing");
    f << text;
    if (!f) throw Error(ErrorKind::Io, "write failed for '" + path(name) + "'");
    files_.push_back(name);
  }

  void write_json(const std::string& name, const nlohmann::json& j) { write_text(name, j.dump(2) + "\n"); }

  void write_dataset(const std::string& name, const TimeSeriesDataset& ds) {
    std::ostringstream os;
    write_csv(os, ds);
    write_text(name, os.str());
  }

  void write_model(const std::string& name, const SparseModel& m) { write_json(name, model_to_json(m)); }

  void finish(const std::string& command, nlohmann::json params) {
    nlohmann::json j;
    j["command"] = command;
    j["parameters"] = std::move(params);
    j["files"] = files_;
    files_.push_back("manifest.json");
    std::ofstream f(path("manifest.json"), std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot write manifest in '" + dir_.string() + "'");
    f << j.dump(2) << "\n";
  }

  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

inline std::string indexed(const std::string& stem, std::size_t i, const std::string& ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return stem + "_" + buf + ext;
}

inline nlohmann::json scenario_json(const TankScenario& s) {
  return {{"h0", s.h0},         {"h_min", s.h_min},         {"h_max", s.h_max},         {"q_in", s.q_in},
          {"q_out", s.q_out},   {"pipe_delay", s.pipe_delay}, {"n_steps", s.n_steps}, {"base_step", s.base_step},
          {"initial_pump", s.initial_pump ? "on" : "off"}};
}

inline nlohmann::json config_summary(const RunConfig& c) {
  return {{"seed", c.seed},
          {"lambda", c.stlsq.lambda},
          {"degree", c.degree},
          {"hysteron_kind", kind_name(c.kind)},
          {"downsample", c.downsample},
          {"snr", c.snr ? nlohmann::json(*c.snr) : nlohmann::json(nullptr)},
          {"train_count", c.train_count},
          {"horizon", c.horizon}};
}

inline nlohmann::json switch_json(const SwitchReport& r) {
  nlohmann::json m = nlohmann::json::array();
  for (const auto& x : r.matches) m.push_back({{"truth", x.truth}, {"predicted", x.predicted}, {"error", x.error}});
  return {{"truth", r.truth},   {"predicted", r.predicted},           {"matches", m},
          {"missed", r.missed}, {"spurious", r.spurious}, {"max_abs_error", r.max_abs_error()}};
}

inline nlohmann::json summary_json(const SwitchSummary& s) {
  return {{"truth", s.truth},     {"matched", s.matched},   {"missed", s.missed},
          {"spurious", s.spurious}, {"max_abs_error", s.max_abs_error}};
}

inline nlohmann::json number_json(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_double(v));
}

inline nlohmann::json warnings_json(const std::vector<Warning>& w) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& x : w) out.push_back({{"stage", x.stage}, {"message", x.message}});
  return out;
}

inline nlohmann::json identification_json(const Identification& id) {
  nlohmann::json det = nlohmann::json::array();
  for (const auto& d : id.detection) det.push_back(switch_json(d));
  nlohmann::json hyst = nlohmann::json::array();
  for (const auto& h : id.model.hysterons) hyst.push_back(hysteron_to_json(h));
  nlohmann::json res = nlohmann::json::array();
  for (double r : id.residual_rms) res.push_back(number_json(r));
  return {{"active_terms", active_term_count(id.model)},
          {"library_columns", id.library_columns},
          {"regression_rows", id.rows},
          {"columns", id.column_names},
          {"hysteron_candidates", hyst},
          {"stlsq_iterations", id.iterations},
          {"stlsq_support_sizes", id.support_sizes},
          {"training_residual_rms_scaled", res},
          {"training_switch_detection", det},
          {"warnings", warnings_json(id.warnings)}};
}

inline nlohmann::json prediction_json(const Prediction& p) {
  nlohmann::json j{{"samples", p.steps},
                   {"rmse_scaled", number_json(p.rmse_scaled)},
                   {"rmse_unscaled", number_json(p.rmse_unscaled)},
                   {"rmse_band_fraction", number_json(p.rmse_band)},
                   {"band_scaled", number_json(p.band_scaled)},
                   {"final_quarter_std_scaled", number_json(p.final_quarter_std)},
                   {"truth_std_scaled", number_json(p.truth_std)},
                   {"diverged", p.diverged},
                   {"warnings", warnings_json(p.warnings)}};
  if (p.diverged) j["divergence_step"] = p.divergence_step;
  if (p.switches) j["free_run_switches"] = switch_json(*p.switches);
  if (p.detection) j["record_switch_detection"] = switch_json(*p.detection);
  return j;
}

inline TimeSeriesDataset trajectory_dataset(const Prediction& p, const std::string& target, double period,
                                            double start) {
  std::vector<Channel> ch{{target + "_true", p.truth}, {target + "_observed", p.observed}};
  if (!p.predicted.empty()) ch.push_back({target + "_pred", p.predicted});
  if (!p.predicted_hysteron.empty()) {
    Channel h{"H1_pred", {}};
    for (auto v : p.predicted_hysteron) h.values.push_back(v);
    ch.push_back(std::move(h));
  }
  return TimeSeriesDataset(period, std::move(ch), {}, start);
}

// Dataset source for identify/predict: a simulate output directory, a single
// CSV file, or an in-memory simulation of the configured batch.
inline std::vector<TimeSeriesDataset> load_runs(const std::string& data, const RunConfig& cfg) {
  if (data.empty()) return simulate_batch(cfg);
  if (fs::is_regular_file(data)) return {read_csv(data)};
  const fs::path manifest = fs::path(data) / "manifest.json";
  std::ifstream f(manifest, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "no manifest.json in '" + data + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, manifest.string() + ": " + e.what());
  }
  std::vector<TimeSeriesDataset> runs;
  for (const auto& name : j.at("files"))
    if (name.get<std::string>().ends_with(".csv")) runs.push_back(read_csv((fs::path(data) / name.get<std::string>()).string()));
  return runs;
}

inline void log_timing(const std::string& what, std::chrono::steady_clock::time_point t0) {
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "[hysid] " << what << " took " << s << " s\n";
}

inline std::vector<std::string> cmd_simulate(const RunConfig& cfg, const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  OutputDir out(out_dir);
  const auto scenarios = make_scenario_batch(cfg.base, cfg.n_runs, cfg.variations, cfg.seed);
  std::vector<TimeSeriesDataset> runs(scenarios.size());
  parallel_for(scenarios.size(), cfg.workers, [&](std::size_t i) { runs[i] = simulate(scenarios[i]); });
  nlohmann::json sc = nlohmann::json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    out.write_dataset(indexed("run", i, ".csv"), runs[i]);
    sc.push_back(scenario_json(scenarios[i]));
  }
  auto params = config_summary(cfg);
  params["scenarios"] = sc;
  out.finish("simulate", params);
  log_timing("simulate", t0);
  return out.files();
}

inline std::vector<std::string> cmd_identify(const RunConfig& cfg, const std::string& out_dir,
                                             const std::string& data = "") {
  const auto t0 = std::chrono::steady_clock::now();
  const auto raw = load_runs(data, cfg);
  std::vector<TimeSeriesDataset> train;
  const std::size_t n_train = raw.size() == 1 ? 1 : std::min(cfg.train_count, raw.size() - 1);
  for (std::size_t i = 0; i < n_train; ++i) train.push_back(prepare_run(raw[i], cfg, i).observed);
  const Identification id = identify(train, cfg);
  OutputDir out(out_dir);
  out.write_model("model.json", id.model);
  out.write_text("equations.txt", render_equations(id.model));
  out.write_json("metrics.json", identification_json(id));
  auto params = config_summary(cfg);
  params["data"] = data.empty() ? "simulated" : data;
  params["training_runs"] = n_train;
  out.finish("identify", params);
  log_timing("identify", t0);
  return out.files();
}

struct PredictOutcome {
  std::vector<std::string> files;
  bool diverged = false;
};

inline PredictOutcome cmd_predict(const RunConfig& cfg, const std::string& model_path, const std::string& out_dir,
                                  const std::string& data = "", std::size_t n_steps = 0) {
  const auto t0 = std::chrono::steady_clock::now();
  const SparseModel model = load_model(model_path);
  const auto raw = load_runs(data, cfg);
  std::vector<std::size_t> indices;
  if (raw.size() == 1)
    indices.push_back(0);
  else
    for (std::size_t i = std::min(cfg.train_count, raw.size() - 1); i < raw.size(); ++i) indices.push_back(i);
  OutputDir out(out_dir);
  PredictOutcome res;
  nlohmann::json metrics = nlohmann::json::array();
  for (std::size_t i : indices) {
    const PreparedRun pr = prepare_run(raw[i], cfg, i);
    const std::size_t samples = n_steps == 0 ? 0 : n_steps + 1;
    const Prediction p = predict(model, pr.observed, pr.clean, cfg, samples);
    res.diverged = res.diverged || p.diverged;
    auto pj = prediction_json(p);
    pj["record"] = i;
    metrics.push_back(pj);
    out.write_dataset(indexed("prediction", i, ".csv"),
                      trajectory_dataset(p, model.target_channels.front(), pr.observed.sample_period(),
                                         pr.observed.start_time()));
  }
  out.write_json("metrics.json", {{"records", metrics}});
  auto params = config_summary(cfg);
  params["model"] = model_path;
  params["data"] = data.empty() ? "simulated" : data;
  params["n_steps"] = n_steps;
  out.finish("predict", params);
  log_timing("predict", t0);
  res.files = out.files();
  return res;
}

inline std::string plot_header() { return "sweep_value,rmse,active_terms,missed_switches,library_columns\n"; }

inline std::string plot_row(const PointResult& p) {
  return format_double(p.sweep_value) + "," + format_double(p.error.empty() ? p.rmse_band : NAN) + "," +
         std::to_string(p.active_terms) + "," + std::to_string(p.detection.missed) + "," +
         std::to_string(p.library_columns) + "\n";
}

inline std::vector<std::string> cmd_experiment(const RunConfig& cfg, Sweep sweep, const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto points = run_sweep(sweep, cfg);
  OutputDir out(out_dir);
  std::string table =
      "sweep_value,hysteron,rmse,rmse_scaled,active_terms,missed_switches,spurious_switches,max_detection_error,"
      "free_run_missed,free_run_spurious,free_run_max_error,library_columns,diverged,error\n";
  std::map<std::string, std::string> plots;
  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& p : points) {
    std::string err = p.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    table += format_double(p.sweep_value) + "," + kind_name(p.kind) + "," +
             format_double(p.error.empty() ? p.rmse_band : NAN) + "," +
             format_double(p.error.empty() ? p.rmse_scaled : NAN) + "," + std::to_string(p.active_terms) + "," +
             std::to_string(p.detection.missed) + "," + std::to_string(p.detection.spurious) + "," +
             std::to_string(p.detection.max_abs_error) + "," + std::to_string(p.free_run.missed) + "," +
             std::to_string(p.free_run.spurious) + "," + std::to_string(p.free_run.max_abs_error) + "," +
             std::to_string(p.library_columns) + "," + (p.diverged ? "1" : "0") + "," + err + "\n";
    const std::string plot =
        sweep == Sweep::SampleRate ? "plot_samplerate_" + kind_name(p.kind) + ".csv" : "plot_" + sweep_name(sweep) + ".csv";
    if (!plots.contains(plot)) plots[plot] = plot_header();
    plots[plot] += plot_row(p);

    nlohmann::json pj{{"label", p.label},
                      {"sweep_value", p.sweep_value},
                      {"hysteron_kind", kind_name(p.kind)},
                      {"rmse_band_fraction", number_json(p.rmse_band)},
                      {"rmse_scaled", number_json(p.rmse_scaled)},
                      {"active_terms", p.active_terms},
                      {"library_columns", p.library_columns},
                      {"switch_detection", summary_json(p.detection)},
                      {"free_run_switches", summary_json(p.free_run)},
                      {"diverged", p.diverged},
                      {"error", p.error}};
    if (p.identification) {
      pj["identification"] = identification_json(*p.identification);
      out.write_text("equations_" + p.label + ".txt", render_equations(p.identification->model));
      out.write_model("model_" + p.label + ".json", p.identification->model);
    }
    nlohmann::json preds = nlohmann::json::array();
    for (std::size_t i = 0; i < p.predictions.size(); ++i) {
      preds.push_back(prediction_json(p.predictions[i]));
      const auto& pr = p.predictions[i];
      const double period = pr.time.size() > 1 ? pr.time[1] - pr.time[0] : cfg.base.base_step;
      out.write_dataset("traj_" + p.label + "_" + indexed("val", i, ".csv"),
                        trajectory_dataset(pr, cfg.targets.front(), period, pr.time.empty() ? 0.0 : pr.time.front()));
    }
    pj["validation"] = preds;
    metrics.push_back(pj);
  }
  out.write_text("results.csv", table);
  for (const auto& [name, text] : plots) out.write_text(name, text);
  out.write_json("metrics.json", {{"sweep", sweep_name(sweep)}, {"points", metrics}});
  auto params = config_summary(cfg);
  params["sweep"] = sweep_name(sweep);
  out.finish("experiment", params);
  log_timing("experiment " + sweep_name(sweep), t0);
  return out.files();
}

}  // namespace hysid
