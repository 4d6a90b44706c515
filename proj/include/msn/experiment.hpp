// Experiment commands behind the `msn` CLI. Each takes a validated
// ExperimentConfig and writes its artifacts under an output directory.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "msn/bench.hpp"
#include "msn/config.hpp"
#include "msn/flops.hpp"
#include "msn/train.hpp"

namespace msn {

struct TrainArtifacts {
  std::filesystem::path metrics;     // metrics.jsonl
  std::filesystem::path checkpoint;  // checkpoint.msn
  std::filesystem::path histogram;   // histogram.csv; empty when the model has no MSN layer
  TrainResult result;
  EvalResult final_eval;
};

/// Generates data, trains, and writes the metrics log, final checkpoint and
/// slot histogram (one pass over the test split) into `out_dir`.
TrainArtifacts cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Evaluates a checkpoint on the config's test split; writes eval.json.
EvalResult cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                    const std::filesystem::path& out_dir);

/// Slot histogram of a checkpoint over the config's test split.
std::filesystem::path cmd_export_histogram(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                                           const std::filesystem::path& out_dir);

inline const std::vector<std::string>& ablation_axes() {
  static const std::vector<std::string> axes = {"msn_layers", "memory_n", "topk",
                                                "gating_fn", "weight_mode", "per_token_values"};
  return axes;
}

/// `cfg` with one ablation axis set to `value`. Throws ConfigError for an
/// unknown axis or a value the axis cannot take.
ExperimentConfig apply_axis(const ExperimentConfig& cfg, const std::string& axis, const std::string& value);

struct AblationRow {
  std::string variant;
  double qauc = 0.0;
  double delta_qauc = 0.0;  // against the first value
  std::int64_t total_params = 0;
  std::int64_t activated_params = 0;
  double msn_param_ratio = 0.0;
};

/// Trains one model per value with the config's seeds and writes
/// ablation_<axis>.csv into `out_dir`.
std::vector<AblationRow> cmd_ablate(const ExperimentConfig& cfg, const std::string& axis,
                                    const std::vector<std::string>& values, const std::filesystem::path& out_dir);

/// Runs the benchmark and appends its JSON report to bench.jsonl in `out_dir`.
BenchReport cmd_bench(const BenchConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace msn
