// msn: train, evaluate, ablate and benchmark Memory Scaling Network models.
//
//   msn train            --config exp.json [--out DIR] [--strict]
//   msn eval             --config exp.json --checkpoint FILE [--out DIR]
//   msn ablate           --config exp.json --axis NAME --values a,b,c [--out DIR]
//   msn bench            [--kernel topk|gather] [--m 1024] [--k 32] [--reps 200] [--out DIR]
//   msn export-histogram --config exp.json --checkpoint FILE [--out DIR]
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "msn/experiment.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory Scaling Network experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string checkpoint;
  std::string axis;
  std::string values;
  bool strict = false;
  msn::BenchConfig bench;

  auto* train = app.add_subcommand("train", "train a model and write metrics, checkpoint and histogram");
  train->add_option("--config", config_path, "experiment config (JSON)")->required();
  train->add_option("--out", out_dir, "output directory (overrides output.dir)");
  train->add_flag("--strict", strict, "force strict (deterministic) mode");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval->add_option("--config", config_path, "experiment config (JSON)")->required();
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--out", out_dir, "output directory (overrides output.dir)");
  eval->add_flag("--strict", strict, "force strict (deterministic) mode");

  auto* ablate = app.add_subcommand("ablate", "train one model per axis value and tabulate");
  ablate->add_option("--config", config_path, "experiment config (JSON)")->required();
  ablate->add_option("--axis", axis, "msn_layers | memory_n | topk | gating_fn | weight_mode | per_token_values")
      ->required();
  ablate->add_option("--values", values, "comma-separated axis values")->required();
  ablate->add_option("--out", out_dir, "output directory (overrides output.dir)");
  ablate->add_flag("--strict", strict, "force strict (deterministic) mode");

  auto* benchcmd = app.add_subcommand("bench", "benchmark a retrieval kernel against its baseline");
  benchcmd->add_option("--kernel", bench.kernel, "topk | gather")->capture_default_str();
  benchcmd->add_option("--m", bench.m, "candidates (topk) or table rows (gather)")->capture_default_str();
  benchcmd->add_option("--k", bench.k, "selected entries")->capture_default_str();
  benchcmd->add_option("--d", bench.d, "value width for gather")->capture_default_str();
  benchcmd->add_option("--reps", bench.reps, "timed repetitions")->capture_default_str();
  benchcmd->add_option("--seed", bench.seed, "input seed")->capture_default_str();
  benchcmd->add_option("--out", out_dir, "directory for bench.jsonl")->capture_default_str();

  auto* hist = app.add_subcommand("export-histogram", "write the slot histogram of a checkpoint");
  hist->add_option("--config", config_path, "experiment config (JSON)")->required();
  hist->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  hist->add_option("--out", out_dir, "output directory (overrides output.dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (benchcmd->parsed()) {
      try {
        bench.validate();
      } catch (const msn::ContractError& e) {
        throw msn::ConfigError(e.what());
      }
      const auto r = msn::cmd_bench(bench, out_dir.empty() ? "." : out_dir);
      std::cout << r.to_json().dump() << '\n';
      return r.oracle_ok ? 0 : kRuntimeError;
    }

    auto cfg = msn::load_experiment(config_path);
    if (strict) cfg.train.strict_mode = true;
    const std::filesystem::path out = out_dir.empty() ? cfg.output_dir : out_dir;

    if (train->parsed()) {
      const auto a = msn::cmd_train(cfg, out);
      std::cout << "trained " << a.result.steps << " steps; test loss " << a.final_eval.loss << ", auc "
                << a.final_eval.auc << ", qauc " << a.final_eval.qauc << '\n'
                << "wrote " << a.metrics.string() << ", " << a.checkpoint.string();
      if (!a.histogram.empty()) std::cout << ", " << a.histogram.string();
      std::cout << '\n';
    } else if (eval->parsed()) {
      const auto e = msn::cmd_eval(cfg, checkpoint, out);
      std::cout << "loss " << e.loss << ", auc " << e.auc << ", qauc " << e.qauc << " over " << e.samples
                << " samples\n";
    } else if (ablate->parsed()) {
      const auto rows = msn::cmd_ablate(cfg, axis, split_csv(values), out);
      std::cout << "variant,delta_qauc,total_params,activated_params,msn_param_ratio,qauc\n";
      for (const auto& r : rows)
        std::cout << r.variant << ',' << r.delta_qauc << ',' << r.total_params << ',' << r.activated_params << ','
                  << r.msn_param_ratio << ',' << r.qauc << '\n';
    } else if (hist->parsed()) {
      std::cout << "wrote " << msn::cmd_export_histogram(cfg, checkpoint, out).string() << '\n';
    }
  } catch (const msn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
