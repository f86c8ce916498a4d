// Command-line driver: run experiments, the acceptance suite, the bias lab
// and the step-size tuner.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maips/acceptance.hpp"
#include "maips/errors.hpp"
#include "maips/experiments.hpp"
#include "maips/format.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitAcceptance = 3;

struct CommonArgs {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::vector<std::string> overrides;
};

void add_common(CLI::App *app, CommonArgs &a) {
  app->add_option("--config", a.config_file, "INI file; keys not given keep their defaults")
      ->check(CLI::ExistingFile);
  app->add_option("--seed", a.seed, "Overrides run.seed");
  app->add_option("--workers", a.workers,
                  "Worker threads for replicas (default: MAIPS_WORKERS or 1)")
      ->check(CLI::PositiveNumber);
  app->add_option("--set", a.overrides, "Override a key: section.key=value (repeatable)");
}

maips::Config resolve(const CommonArgs &a) {
  maips::Config cfg =
      a.config_file.empty() ? maips::default_config() : maips::load_run_config(a.config_file);
  for (const auto &o : a.overrides) cfg.apply_override(o);
  if (a.seed) cfg.set("run.seed", std::to_string(*a.seed));
  return cfg;
}

int workers_of(const CommonArgs &a) { return a.workers ? *a.workers : maips::default_workers(); }

void print_summary(const maips::RunSummary &s) {
  std::cout << s.experiment << " -> " << s.directory.string() << "\n";
  for (const auto &[k, v] : s.facts) std::cout << "  " << k << " = " << v << "\n";
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Metropolized interacting particle samplers"};
  app.require_subcommand(1);

  CommonArgs run_args;
  std::string run_out = "out";
  std::string run_experiment;
  auto *run = app.add_subcommand("run", "Run one experiment and write its CSVs");
  add_common(run, run_args);
  run->add_option("--out", run_out, "Output directory (created if missing)");
  run->add_option("--experiment", run_experiment, "exp1, exp2, exp3 or bias-lab");

  CommonArgs suite_args;
  std::string suite_out;
  std::vector<std::string> only;
  auto *suite = app.add_subcommand("suite", "Run the acceptance checks A1-A9");
  add_common(suite, suite_args);
  suite->add_option("--out", suite_out, "Also write every experiment's CSVs here");
  suite->add_option("--only", only, "Subset of check ids, e.g. --only A1 A6");

  CommonArgs bias_args;
  std::string bias_out = "out";
  auto *bias = app.add_subcommand("bias-lab", "Exact transition-matrix studies");
  add_common(bias, bias_args);
  bias->add_option("--out", bias_out, "Output directory (created if missing)");

  CommonArgs tune_args;
  std::string tune_experiment = "exp2";
  std::string tune_method = "aldi";
  std::string tune_mode = "ew";
  double tune_rate = 0.5;
  double tune_h0 = 0.01;
  double tune_gamma = 0.001;
  double tune_bandwidth = 0.01;
  int tune_epochs = 50;
  int tune_epoch_length = 50;
  double tune_c0 = 3.0;
  auto *tune = app.add_subcommand("tune", "Tune h to a target acceptance rate");
  add_common(tune, tune_args);
  tune->add_option("--experiment", tune_experiment, "Target and start: exp1, exp2 or exp3")
      ->capture_default_str();
  tune->add_option("--method", tune_method, "pmala, aldi, cbs, svgd or eksdf")
      ->capture_default_str();
  tune->add_option("--mode", tune_mode, "ew, pw, pw-rs, bw<B>, sim")->capture_default_str();
  tune->add_option("--rate", tune_rate, "Target acceptance rate")->capture_default_str();
  tune->add_option("--h0", tune_h0, "Initial step size")->capture_default_str();
  tune->add_option("--gamma", tune_gamma, "Variance inflation")->capture_default_str();
  tune->add_option("--bandwidth", tune_bandwidth, "SVGD kernel bandwidth")->capture_default_str();
  tune->add_option("--epochs", tune_epochs)->capture_default_str();
  tune->add_option("--epoch-length", tune_epoch_length)->capture_default_str();
  tune->add_option("--c0", tune_c0, "Adaptation gain")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      maips::Config cfg = resolve(run_args);
      if (!run_experiment.empty()) cfg.set("run.experiment", run_experiment);
      print_summary(maips::run_to_directory(cfg, run_out, workers_of(run_args)));
      return 0;
    }
    if (*bias) {
      maips::Config cfg = resolve(bias_args);
      cfg.set("run.experiment", "bias-lab");
      print_summary(maips::run_to_directory(cfg, bias_out, workers_of(bias_args)));
      return 0;
    }
    if (*suite) {
      maips::SuiteOptions o;
      o.config = resolve(suite_args);
      o.workers = workers_of(suite_args);
      if (!suite_out.empty()) o.out = suite_out;
      o.only = only;
      const auto results = maips::run_suite(o, [](const maips::CheckResult &r) {
        std::cout << maips::format_check(r) << std::endl;
      });
      int passed = 0;
      for (const auto &r : results) passed += r.pass ? 1 : 0;
      std::cout << "summary: " << passed << "/" << results.size() << " checks passed\n";
      return passed == static_cast<int>(results.size()) ? 0 : kExitAcceptance;
    }
    if (*tune) {
      const maips::Config cfg = resolve(tune_args);
      const auto t = maips::experiment_target(cfg, tune_experiment);
      maips::DynamicsSpec spec;
      const auto kind = maips::parse_dynamics_kind(tune_method);
      switch (kind) {
      case maips::DynamicsKind::PMala: spec = maips::DynamicsSpec::pmala(tune_h0); break;
      case maips::DynamicsKind::Aldi: spec = maips::DynamicsSpec::aldi(tune_h0, tune_gamma); break;
      case maips::DynamicsKind::Cbs: spec = maips::DynamicsSpec::cbs(tune_h0, tune_gamma); break;
      case maips::DynamicsKind::Svgd:
        spec = maips::DynamicsSpec::svgd(tune_h0, tune_bandwidth);
        break;
      case maips::DynamicsKind::Eksdf:
        if (!t.problem) throw maips::ConfigError("eksdf needs the exp3 forward model");
        spec = maips::DynamicsSpec::eksdf(tune_h0, tune_gamma, maips::make_forward_model(t.problem));
        break;
      }
      spec.validate();
      maips::TuneOptions opts;
      opts.target_rate = tune_rate;
      opts.epoch_length = tune_epoch_length;
      opts.c0 = tune_c0;
      const auto mode = maips::parse_mode(tune_mode, static_cast<int>(t.init.rows()));
      const auto res = maips::tune_step_size(mode, spec, *t.target, t.init, opts, tune_epochs,
                                             cfg.get_u64("run.seed"));
      std::cout << "epoch,step,rate\n";
      for (const auto &e : res.trace) {
        std::cout << e.epoch << "," << maips::format_double(e.step) << ","
                  << maips::format_double(e.rate) << "\n";
      }
      std::cout << "tuned step " << maips::format_double(res.step)
                << (res.saturated ? " (saturated at a clamp bound)" : "") << "\n";
      return 0;
    }
  } catch (const maips::ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const maips::Error &e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
