#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cmdp/bench.hpp"

namespace {

using cmdp::bench::ExperimentConfig;
using cmdp::bench::ExperimentKind;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  bool full_scale = false;
  bool timing = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value config file");
  cmd->add_option("--seed", args.seed, "base seed (overrides config)");
  cmd->add_option("--out", args.out, "output CSV path (overrides config)");
  cmd->add_option("--workers", args.workers, "replication workers; 1 = serial, 0 = all cores");
  cmd->add_flag("--full-scale", args.full_scale, "use the paper-scale parameters");
  cmd->add_flag("--timing", args.timing,
                "record measured walltime_ms in the CSV (breaks byte determinism)");
}

ExperimentConfig resolve_config(ExperimentKind kind, const CommonArgs& args) {
  ExperimentConfig cfg = args.config_path.empty()
                             ? cmdp::bench::default_config(kind, args.full_scale)
                             : cmdp::bench::parse_config_file(args.config_path);
  cfg.kind = kind;
  if (args.seed) cfg.base_seed = *args.seed;
  if (args.out) cfg.out_path = *args.out;
  if (args.workers) cfg.workers = *args.workers;
  cfg.timing = args.timing;
  return cfg;
}

int run_experiment(ExperimentKind kind, const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(kind, args);
  std::vector<cmdp::bench::ResultRow> rows;
  switch (kind) {
    case ExperimentKind::RegretVsT: rows = cmdp::bench::run_regret_vs_T(cfg); break;
    case ExperimentKind::RegretVsLambda: rows = cmdp::bench::run_regret_vs_lambda(cfg); break;
    case ExperimentKind::LowerBound: rows = cmdp::bench::run_lower_bound_sanity(cfg); break;
    case ExperimentKind::Properties: return 2;
  }
  cmdp::bench::write_csv(cfg.out_path, rows, cfg.timing);
  cmdp::bench::print_summary(std::cout, cfg, rows);
  std::cout << "wrote " << rows.size() << " rows to " << cfg.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage causal MDP exploration benchmarks"};
  app.require_subcommand(1);

  CommonArgs rt_args, rl_args, lb_args;
  auto* rt = app.add_subcommand("regret-vs-t", "simple regret across time horizons");
  add_common(rt, rt_args);
  auto* rl = app.add_subcommand("regret-vs-lambda", "simple regret across instance difficulty");
  add_common(rl, rl_args);
  auto* lb = app.add_subcommand("lower-bound", "regret on the hard deterministic family");
  add_common(lb, lb_args);
  auto* props = app.add_subcommand("properties", "run the analytic property checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (rt->parsed()) return run_experiment(ExperimentKind::RegretVsT, rt_args);
    if (rl->parsed()) return run_experiment(ExperimentKind::RegretVsLambda, rl_args);
    if (lb->parsed()) return run_experiment(ExperimentKind::LowerBound, lb_args);
    if (props->parsed()) {
      const auto report = cmdp::bench::run_property_suite();
      for (const auto& item : report.items)
        std::cout << (item.pass ? "[PASS] " : "[FAIL] ") << item.name
                  << (item.detail.empty() ? "" : "  (" + item.detail + ")") << "\n";
      return report.all_pass() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
