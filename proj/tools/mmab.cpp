// mmab: run experiments from a JSON config and write report.csv,
// report.json and plotdata.csv into the output directory.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "mmab/harness.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
};

void add_common(CLI::App* sub, Overrides& o, bool config_required) {
  auto* opt = sub->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  if (config_required) opt->required();
  sub->add_option("--seed", o.seed, "base seed");
  sub->add_option("--trials", o.trials, "trials per cell")->check(CLI::PositiveNumber);
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
}

int run(mmab::ExperimentKind kind, const Overrides& o) {
  mmab::ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = mmab::load_config(o.config);
    // An explicit experiment in the file must agree with the subcommand.
    std::ifstream in(o.config);
    if (mmab::json::parse(in).contains("experiment") && cfg.kind != kind) {
      throw mmab::ConfigError(o.config + ": experiment is '" + mmab::to_string(cfg.kind) + "' but the subcommand is '" +
                              mmab::to_string(kind) + "'");
    }
  }
  cfg.kind = kind;
  if (o.seed) cfg.seed = *o.seed;
  if (o.trials) cfg.trials = *o.trials;
  if (o.workers) cfg.workers = *o.workers;
  if (o.out) cfg.out = *o.out;

  const mmab::RunReport report = mmab::run_experiment(cfg);
  for (const auto& path : mmab::emit(report, cfg.out)) std::cout << path << '\n';
  std::cout << mmab::to_csv(report.tables.front());
  if (const auto* fits = report.find("fits")) std::cout << mmab::to_csv(*fits);
  if (const auto* cal = report.find("calibration")) std::cout << mmab::to_csv(*cal);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grouped-feedback bandit experiments"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    mmab::ExperimentKind kind;
    bool config_required;
  };
  const Sub subs[] = {
      {"regret", "regret sweep over groups x horizons", mmab::ExperimentKind::kRegretSweep, true},
      {"pac", "PAC success rate at a fixed budget", mmab::ExperimentKind::kPacSuccess, true},
      {"distinguish", "H_0..H_m distinguisher confusion matrix", mmab::ExperimentKind::kDistinguisher, true},
      {"graph", "graph adapter transcript check", mmab::ExperimentKind::kGraphAdapter, false},
      {"theory", "closed-form bound tables", mmab::ExperimentKind::kTheoryTables, false},
      {"calibrate", "estimate the regret constant", mmab::ExperimentKind::kCalibrate, true},
  };
  Overrides overrides[std::size(subs)];
  std::optional<std::size_t> chosen;
  for (std::size_t i = 0; i < std::size(subs); ++i) {
    CLI::App* sub = app.add_subcommand(subs[i].name, subs[i].help);
    add_common(sub, overrides[i], subs[i].config_required);
    sub->callback([&chosen, i] { chosen = i; });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    return run(subs[*chosen].kind, overrides[*chosen]);
  } catch (const std::exception& e) {
    std::cerr << "mmab: " << e.what() << '\n';
    return 1;
  }
}
