#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "hysid/dataset.hpp"
#include "hysid/embedding.hpp"
#include "hysid/hysteron.hpp"
#include "hysid/library.hpp"

namespace hysid {

inline constexpr double kDivergenceLimit = 1e6;
inline constexpr const char* kModelFormat = "hysid-model";
inline constexpr int kModelVersion = 1;

struct SparseModel {
  std::vector<std::string> state_channels;
  std::vector<std::string> target_channels;
  std::size_t lag_q = 0;
  int degree = 1;
  std::vector<HysteronSpec> hysterons;
  std::vector<BasisDescriptor> descriptors;
  Eigen::MatrixXd coefficients;  // descriptors x targets
  ScalingMap scaling;

  std::vector<std::string> signal_names() const { return signal_column_names(state_channels, lag_q); }

  // Every channel a prediction step reads: state channels, then hysteron
  // signals and threshold channels.
  std::vector<std::string> input_channels() const {
    std::vector<std::string> out = state_channels;
    auto add = [&](const std::string& c) {
      if (!c.empty() && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    };
    for (const auto& h : hysterons) {
      add(h.signal_name);
      add(h.alpha.channel);
      add(h.beta.channel);
    }
    for (const auto& t : target_channels) add(t);
    return out;
  }

  void validate() const {
    require(coefficients.rows() == static_cast<Eigen::Index>(descriptors.size()),
            "model: coefficient rows must match descriptors");
    require(coefficients.cols() == static_cast<Eigen::Index>(target_channels.size()),
            "model: coefficient columns must match targets");
    const std::size_t ns = state_channels.size() * (lag_q + 1);
    for (const auto& d : descriptors) {
      require(d.exponents.empty() || d.exponents.size() == ns, "model: descriptor '" + d.name + "' has wrong arity");
      require(d.hysteron < static_cast<int>(2 * hysterons.size()), "model: descriptor references missing hysteron");
    }
    for (const auto& h : hysterons) h.validate();
  }
};

struct StepState {
  std::vector<std::vector<double>> history;  // history[l][i]: input channel i at k-l
  std::vector<std::uint8_t> hysterons;       // H(k-1)
};

struct StepResult {
  std::vector<double> next;               // targets at k+1
  std::vector<std::uint8_t> hysterons;    // H(k)
};

namespace detail {

struct ModelIndex {
  std::vector<std::string> inputs;
  std::vector<std::size_t> state;  // input index per state channel
  std::vector<std::size_t> target;
  std::vector<std::size_t> signal;
  std::vector<std::ptrdiff_t> alpha, beta;  // -1 for constant thresholds

  explicit ModelIndex(const SparseModel& m) : inputs(m.input_channels()) {
    auto idx = [&](const std::string& c) {
      return static_cast<std::size_t>(std::find(inputs.begin(), inputs.end(), c) - inputs.begin());
    };
    for (const auto& c : m.state_channels) state.push_back(idx(c));
    for (const auto& c : m.target_channels) target.push_back(idx(c));
    for (const auto& h : m.hysterons) {
      signal.push_back(idx(h.signal_name));
      alpha.push_back(h.alpha.is_channel() ? static_cast<std::ptrdiff_t>(idx(h.alpha.channel)) : -1);
      beta.push_back(h.beta.is_channel() ? static_cast<std::ptrdiff_t>(idx(h.beta.channel)) : -1);
    }
  }
};

inline std::uint8_t relay_update(std::uint8_t prev, double x, double a, double b) {
  if (x - b >= 0.0) return 1;
  if (x - a <= 0.0) return 0;
  return prev;
}

inline StepResult step(const SparseModel& m, const ModelIndex& ix, const StepState& st) {
  require(st.history.size() == m.lag_q + 1, "step: history must hold lag_q + 1 rows");
  require(st.hysterons.size() == m.hysterons.size(), "step: hysteron state size mismatch");
  const auto& cur = st.history.front();
  StepResult r;
  r.hysterons.resize(m.hysterons.size());
  std::vector<double> h(2 * m.hysterons.size());
  for (std::size_t j = 0; j < m.hysterons.size(); ++j) {
    const auto& spec = m.hysterons[j];
    const double a = ix.alpha[j] >= 0 ? cur[static_cast<std::size_t>(ix.alpha[j])] : spec.alpha.value;
    const double b = ix.beta[j] >= 0 ? cur[static_cast<std::size_t>(ix.beta[j])] : spec.beta.value;
    r.hysterons[j] = relay_update(st.hysterons[j], cur[ix.signal[j]], a, b);
    h[2 * j] = r.hysterons[j];
    h[2 * j + 1] = 1.0 - r.hysterons[j];
  }
  std::vector<double> x;
  for (std::size_t l = 0; l <= m.lag_q; ++l)
    for (std::size_t i : ix.state) x.push_back(st.history[l][i]);
  r.next.assign(m.target_channels.size(), 0.0);
  for (std::size_t j = 0; j < m.descriptors.size(); ++j) {
    const double v = eval_descriptor(m.descriptors[j], x.data(), h.data());
    for (std::size_t t = 0; t < r.next.size(); ++t) {
      const double c = m.coefficients(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t));
      if (c != 0.0) r.next[t] += c * v;
    }
  }
  for (std::size_t t = 0; t < r.next.size(); ++t)
    if (!std::isfinite(r.next[t])) {
      Error e(ErrorKind::NonFiniteValue, "prediction of '" + m.target_channels[t] + "' is not finite");
      e.channel = m.target_channels[t];
      throw e;
    }
  return r;
}

}  // namespace detail

// Hysterons are updated first with relay semantics on the current values,
// then the library row uses the updated states.
inline StepResult predict_one_step(const SparseModel& model, const StepState& state) {
  detail::ModelIndex ix(model);
  for (const auto& row : state.history) require(row.size() == ix.inputs.size(), "step: history row has wrong width");
  return detail::step(model, ix, state);
}

struct FreeRunResult {
  TimeSeriesDataset trajectory;       // targets and hysteron states, n_steps + 1 samples
  std::vector<HysteronTrace> traces;  // relay traces driven by the predicted signals
};

// Iterates predict_one_step from the record's first lag_q + 1 samples; other
// inputs stay as recorded. initial_hysterons holds H(-1).
inline FreeRunResult free_run(const SparseModel& model, const TimeSeriesDataset& record, std::size_t n_steps,
                              const std::vector<std::uint8_t>& initial_hysterons) {
  require(n_steps >= 1, "free_run: n_steps must be >= 1");
  require(record.length() >= n_steps + 1, "free_run: record shorter than n_steps + 1");
  require(initial_hysterons.size() == model.hysterons.size(), "free_run: one initial state per hysteron");
  model.validate();
  detail::ModelIndex ix(model);
  const std::size_t n = n_steps + 1, q = model.lag_q;
  require(q < n_steps, "free_run: n_steps must exceed the lag horizon");
  std::vector<std::vector<double>> work;
  for (const auto& c : ix.inputs) {
    const auto& v = record.values(c);
    work.emplace_back(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n));
  }
  std::vector<std::vector<std::uint8_t>> hs(model.hysterons.size(), std::vector<std::uint8_t>(n, 0));
  std::vector<std::uint8_t> h = initial_hysterons;

  auto relay_at = [&](std::size_t k) {
    for (std::size_t j = 0; j < model.hysterons.size(); ++j) {
      const auto& spec = model.hysterons[j];
      const double a = ix.alpha[j] >= 0 ? work[static_cast<std::size_t>(ix.alpha[j])][k] : spec.alpha.value;
      const double b = ix.beta[j] >= 0 ? work[static_cast<std::size_t>(ix.beta[j])][k] : spec.beta.value;
      h[j] = detail::relay_update(h[j], work[ix.signal[j]][k], a, b);
      hs[j][k] = h[j];
    }
  };
  for (std::size_t k = 0; k < q; ++k) relay_at(k);

  StepState st;
  st.history.assign(q + 1, std::vector<double>(ix.inputs.size()));
  for (std::size_t k = q; k + 1 < n; ++k) {
    for (std::size_t l = 0; l <= q; ++l)
      for (std::size_t i = 0; i < ix.inputs.size(); ++i) st.history[l][i] = work[i][k - l];
    st.hysterons = h;
    StepResult r;
    try {
      r = detail::step(model, ix, st);
    } catch (const Error& e) {
      Error d(ErrorKind::DivergenceDetected, std::string("free run failed at step ") + std::to_string(k + 1) + ": " +
                                                 e.what());
      d.step = static_cast<std::ptrdiff_t>(k + 1);
      throw d;
    }
    h = r.hysterons;
    for (std::size_t j = 0; j < h.size(); ++j) hs[j][k] = h[j];
    for (std::size_t t = 0; t < r.next.size(); ++t) {
      if (std::abs(r.next[t]) > kDivergenceLimit) {
        Error d(ErrorKind::DivergenceDetected, "'" + model.target_channels[t] + "' exceeded 1e6 at step " +
                                                   std::to_string(k + 1));
        d.step = static_cast<std::ptrdiff_t>(k + 1);
        d.channel = model.target_channels[t];
        throw d;
      }
      work[ix.target[t]][k + 1] = r.next[t];
    }
  }
  relay_at(n - 1);

  FreeRunResult out;
  std::vector<Channel> chans;
  for (std::size_t t = 0; t < model.target_channels.size(); ++t)
    chans.push_back({model.target_channels[t], work[ix.target[t]]});
  for (std::size_t j = 0; j < model.hysterons.size(); ++j) {
    Channel c{hysteron_name(j, false), std::vector<double>(n)};
    for (std::size_t k = 0; k < n; ++k) c.values[k] = hs[j][k];
    chans.push_back(std::move(c));
    HysteronTrace tr;
    tr.spec = model.hysterons[j];
    tr.initial_state = initial_hysterons[j];
    tr.states = hs[j];
    std::uint8_t s = tr.initial_state;
    for (std::size_t k = 0; k < n; ++k) {
      if (hs[j][k] != s) tr.switches.push_back({k, hs[j][k] == 1});
      s = hs[j][k];
    }
    out.traces.push_back(std::move(tr));
  }
  out.trajectory = TimeSeriesDataset(record.sample_period(), std::move(chans), {}, record.start_time());
  return out;
}

inline std::vector<std::size_t> active_term_count(const SparseModel& model) {
  std::vector<std::size_t> out;
  for (Eigen::Index t = 0; t < model.coefficients.cols(); ++t) {
    std::size_t c = 0;
    for (Eigen::Index j = 0; j < model.coefficients.rows(); ++j) c += model.coefficients(j, t) != 0.0;
    out.push_back(c);
  }
  return out;
}

inline std::string format_coefficient(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string render_equations(const SparseModel& model) {
  std::ostringstream os;
  const auto names = model.signal_names();
  for (std::size_t t = 0; t < model.target_channels.size(); ++t) {
    os << model.target_channels[t] << "(k+1) = ";
    bool first = true;
    for (std::size_t j = 0; j < model.descriptors.size(); ++j) {
      const double c = model.coefficients(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t));
      if (c == 0.0) continue;
      const std::string name = basis_name(model.descriptors[j], names);
      if (first)
        os << format_coefficient(c);
      else
        os << (c < 0 ? " - " : " + ") << format_coefficient(std::abs(c));
      if (name != "1") os << '*' << name;
      first = false;
    }
    if (first) os << '0';
    os << '\n';
  }
  for (std::size_t j = 0; j < model.hysterons.size(); ++j) {
    const auto& h = model.hysterons[j];
    const std::string hn = hysteron_name(j, false);
    os << hn << "(k) = 1 if " << h.signal_name << " >= " << h.beta.label() << "; 0 if " << h.signal_name
       << " <= " << h.alpha.label() << "; " << hn << "(k-1) otherwise\n";
    os << hysteron_name(j, true) << "(k) = 1 - " << hn << "(k)\n";
  }
  return os.str();
}

struct ParsedEquation {
  std::string target;
  std::vector<std::pair<std::string, double>> terms;
};

// Reads back the equation lines of render_equations.
inline std::vector<ParsedEquation> parse_equations(const std::string& text) {
  std::vector<ParsedEquation> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto lhs = line.find("(k+1) = ");
    if (lhs == std::string::npos) continue;
    ParsedEquation eq{line.substr(0, lhs), {}};
    std::string rhs = line.substr(lhs + 8);
    if (rhs == "0") {
      out.push_back(eq);
      continue;
    }
    double sign = 1.0;
    std::size_t pos = 0;
    while (pos <= rhs.size()) {
      std::size_t next = std::string::npos;
      double next_sign = 1.0;
      for (std::size_t i = pos; i + 2 < rhs.size(); ++i)
        if (rhs[i] == ' ' && (rhs[i + 1] == '+' || rhs[i + 1] == '-') && rhs[i + 2] == ' ') {
          next = i;
          next_sign = rhs[i + 1] == '-' ? -1.0 : 1.0;
          break;
        }
      const std::string term = rhs.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      const auto star = term.find('*');
      const std::string coef = term.substr(0, star);
      const double c = std::strtod(coef.c_str(), nullptr);
      eq.terms.emplace_back(star == std::string::npos ? "1" : term.substr(star + 1), sign * c);
      if (next == std::string::npos) break;
      sign = next_sign;
      pos = next + 3;
    }
    out.push_back(std::move(eq));
  }
  return out;
}

inline nlohmann::json threshold_to_json(const Threshold& t) {
  return t.is_channel() ? nlohmann::json{{"channel", t.channel}} : nlohmann::json{{"value", t.value}};
}

inline Threshold threshold_from_json(const nlohmann::json& j) {
  if (j.is_number()) return Threshold::constant(j.get<double>());
  if (j.is_string()) return Threshold::of_channel(j.get<std::string>());
  if (j.contains("channel")) return Threshold::of_channel(j.at("channel").get<std::string>());
  return Threshold::constant(j.at("value").get<double>());
}

inline std::string initial_state_name(InitialState s) {
  return s == InitialState::Auto ? "auto" : s == InitialState::On ? "on" : "off";
}

inline InitialState initial_state_from(const std::string& s) {
  if (s == "auto") return InitialState::Auto;
  if (s == "on" || s == "1") return InitialState::On;
  if (s == "off" || s == "0") return InitialState::Off;
  throw Error(ErrorKind::Format, "unknown initial state '" + s + "'");
}

inline nlohmann::json hysteron_to_json(const HysteronSpec& h) {
  return {{"signal", h.signal_name},
          {"alpha", threshold_to_json(h.alpha)},
          {"beta", threshold_to_json(h.beta)},
          {"eps_alpha", h.eps_alpha},
          {"eps_beta", h.eps_beta},
          {"initial_state", initial_state_name(h.initial_state)}};
}

inline HysteronSpec hysteron_from_json(const nlohmann::json& j) {
  HysteronSpec h;
  h.signal_name = j.at("signal").get<std::string>();
  h.alpha = threshold_from_json(j.at("alpha"));
  h.beta = threshold_from_json(j.at("beta"));
  h.eps_alpha = j.value("eps_alpha", 0.0);
  h.eps_beta = j.value("eps_beta", 0.0);
  h.initial_state = initial_state_from(j.value("initial_state", std::string("auto")));
  return h;
}

inline std::string basis_kind_name(BasisKind k) {
  switch (k) {
    case BasisKind::Constant: return "constant";
    case BasisKind::Monomial: return "monomial";
    case BasisKind::Hysteron: return "hysteron";
    case BasisKind::Cross: return "cross";
  }
  return "?";
}

inline BasisKind basis_kind_from(const std::string& s) {
  if (s == "constant") return BasisKind::Constant;
  if (s == "monomial") return BasisKind::Monomial;
  if (s == "hysteron") return BasisKind::Hysteron;
  if (s == "cross") return BasisKind::Cross;
  throw Error(ErrorKind::Format, "unknown basis kind '" + s + "'");
}

inline nlohmann::json model_to_json(const SparseModel& m) {
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["state_channels"] = m.state_channels;
  j["target_channels"] = m.target_channels;
  j["lag_q"] = m.lag_q;
  j["degree"] = m.degree;
  j["hysterons"] = nlohmann::json::array();
  for (const auto& h : m.hysterons) j["hysterons"].push_back(hysteron_to_json(h));
  const auto names = m.signal_names();
  j["descriptors"] = nlohmann::json::array();
  for (const auto& d : m.descriptors) {
    nlohmann::json dj{{"kind", basis_kind_name(d.kind)}, {"name", basis_name(d, names)}};
    if (!d.exponents.empty()) dj["exponents"] = d.exponents;
    if (d.hysteron >= 0) dj["hysteron"] = d.hysteron;
    j["descriptors"].push_back(dj);
  }
  j["coefficients"] = nlohmann::json::object();
  for (Eigen::Index t = 0; t < m.coefficients.cols(); ++t) {
    std::vector<double> col(static_cast<std::size_t>(m.coefficients.rows()));
    for (Eigen::Index r = 0; r < m.coefficients.rows(); ++r) col[static_cast<std::size_t>(r)] = m.coefficients(r, t);
    j["coefficients"][m.target_channels[static_cast<std::size_t>(t)]] = col;
  }
  j["scaling"] = nlohmann::json::object();
  for (const auto& [name, map] : m.scaling) j["scaling"][name] = {{"offset", map.offset}, {"gain", map.gain}};
  return j;
}

inline SparseModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != kModelFormat)
    throw Error(ErrorKind::Format, "not a model file (format tag missing)");
  if (j.value("version", 0) != kModelVersion)
    throw Error(ErrorKind::Format, "unsupported model version " + std::to_string(j.value("version", 0)));
  SparseModel m;
  try {
    m.state_channels = j.at("state_channels").get<std::vector<std::string>>();
    m.target_channels = j.at("target_channels").get<std::vector<std::string>>();
    m.lag_q = j.at("lag_q").get<std::size_t>();
    m.degree = j.at("degree").get<int>();
    for (const auto& h : j.at("hysterons")) m.hysterons.push_back(hysteron_from_json(h));
    const auto names = m.signal_names();
    for (const auto& dj : j.at("descriptors")) {
      BasisDescriptor d;
      d.kind = basis_kind_from(dj.at("kind").get<std::string>());
      if (dj.contains("exponents")) d.exponents = dj.at("exponents").get<std::vector<int>>();
      if (dj.contains("hysteron")) d.hysteron = dj.at("hysteron").get<int>();
      d.name = basis_name(d, names);
      m.descriptors.push_back(std::move(d));
    }
    m.coefficients = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.descriptors.size()),
                                           static_cast<Eigen::Index>(m.target_channels.size()));
    for (std::size_t t = 0; t < m.target_channels.size(); ++t) {
      const auto col = j.at("coefficients").at(m.target_channels[t]).get<std::vector<double>>();
      require(col.size() == m.descriptors.size(), "coefficient column length mismatch");
      for (std::size_t r = 0; r < col.size(); ++r)
        m.coefficients(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = col[r];
    }
    for (const auto& [name, mj] : j.at("scaling").items())
      m.scaling[name] = {mj.at("offset").get<double>(), mj.at("gain").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed model file: ") + e.what());
  }
  m.validate();
  return m;
}

inline void save_model(const std::string& path, const SparseModel& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  f << model_to_json(m).dump(2) << '\n';
}

inline SparseModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace hysid
