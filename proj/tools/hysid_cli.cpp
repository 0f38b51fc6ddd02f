#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "hysid/commands.hpp"

namespace {

struct Options {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<int> degree;
  std::optional<std::string> hysteron;
  std::optional<std::size_t> workers;
  std::string data;
  std::string model;
  std::size_t steps = 0;
  std::string sweep;
};

void add_common(CLI::App* app, Options& o) {
  app->add_option("--config", o.config, "run configuration (JSON)");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--seed", o.seed, "random seed");
  app->add_option("--lambda", o.lambda, "STLSQ threshold");
  app->add_option("--degree", o.degree, "maximum polynomial degree");
  app->add_option("--hysteron", o.hysteron, "hysteron kind")->check(CLI::IsMember({"relay", "proximity"}));
  app->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
}

hysid::RunConfig resolve(const Options& o) {
  hysid::RunConfig c = o.config.empty() ? hysid::RunConfig{} : hysid::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.lambda) c.stlsq.lambda = *o.lambda;
  if (o.degree) c.degree = *o.degree;
  if (o.hysteron) c.kind = hysid::kind_from(*o.hysteron);
  if (o.workers) c.workers = *o.workers;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hysid: sparse identification of hybrid systems with hysterons"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "simulate the tank scenario batch");
  add_common(sim, o);

  auto* ident = app.add_subcommand("identify", "identify a sparse model");
  add_common(ident, o);
  ident->add_option("--data", o.data, "simulate output directory or CSV file (default: simulate)");

  auto* pred = app.add_subcommand("predict", "free-run a model on validation records");
  add_common(pred, o);
  pred->add_option("--model", o.model, "model file")->required();
  pred->add_option("--data", o.data, "simulate output directory or CSV file (default: simulate)");
  pred->add_option("--steps", o.steps, "free-run steps (default: configured horizon)");

  auto* exp = app.add_subcommand("experiment", "run a parameter sweep");
  add_common(exp, o);
  exp->add_option("sweep", o.sweep, "degree | snr | samplerate")
      ->required()
      ->check(CLI::IsMember({"degree", "snr", "samplerate"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hysid::kExitConfig;
  }

  try {
    const hysid::RunConfig cfg = resolve(o);
    if (*sim) {
      hysid::cmd_simulate(cfg, o.out);
    } else if (*ident) {
      hysid::cmd_identify(cfg, o.out, o.data);
    } else if (*pred) {
      if (hysid::cmd_predict(cfg, o.model, o.out, o.data, o.steps).diverged) {
        std::cerr << "hysid: free run diverged, see " << o.out << "/metrics.json\n";
        return hysid::kExitDivergence;
      }
    } else if (*exp) {
      hysid::cmd_experiment(cfg, hysid::sweep_from(o.sweep), o.out);
    }
  } catch (const hysid::Error& e) {
    std::cerr << "hysid: " << e.what() << "\n";
    if (e.kind() == hysid::ErrorKind::AllTermsEliminated)
      std::cerr << "hysid: lower --lambda; every library term fell below the threshold\n";
    return hysid::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "hysid: " << e.what() << "\n";
    return hysid::kExitPipeline;
  }
  return hysid::kExitOk;
}
