#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "msn/dataset.hpp"
#include "msn/model.hpp"
#include "msn/schedule.hpp"

namespace msn {

/// Raised when a training batch produces a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double lr = 0.01;
  std::int64_t warmup_steps = 2000;
  double warmup_floor = 0.001;
  std::int64_t epochs = 1;
  std::int64_t steps = 0;  // stop after this many updates; 0 means run all epochs
  Index batch_size = 64;
  OptimizerConfig optimizer;
  bool strict_mode = true;
  std::uint64_t seed = 7;  // model init and shuffling
  std::int64_t eval_every = 0;            // extra evaluations every N steps; 0 = per epoch only
  std::int64_t histogram_start_step = 0;  // training-time slot counts start at this step

  WarmupSchedule schedule() const { return {lr, warmup_steps, warmup_floor}; }
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

struct EvalResult {
  double loss = 0.0;
  double auc = 0.0;
  double qauc = 0.0;  // NaN when no query group holds both labels
  std::int64_t samples = 0;
};

EvalResult evaluate(const BlockStack& model, std::span<const Sample> data);

/// Selection counts per value slot. `per_layer[l]` covers the l-th MSN
/// layer (all tokens); `counts` sums the layers.
struct ActivationHistogram {
  Index n = 0;
  Index k = 0;
  std::int64_t samples = 0;
  Index lookups_per_sample = 0;  // MSN layers x tokens
  std::vector<std::int64_t> counts;
  std::vector<std::vector<std::int64_t>> per_layer;

  static ActivationHistogram empty_for(const BlockStack& model);
  void record(const SampleTape& tape);
  std::int64_t total() const;
  /// Fraction of slots selected at least once, in the least-covered layer.
  double min_layer_coverage() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Slot counts over one pass of `data` through `model`.
ActivationHistogram activation_histogram(const BlockStack& model, std::span<const Sample> data);

struct MetricsRecord {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double train_loss = 0.0;  // mean over batches since the previous record
  double loss = 0.0;
  double auc = 0.0;
  double qauc = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<MetricsRecord> log;
  std::vector<ActivationHistogram> epoch_histograms;  // training-time, steps >= histogram_start_step
  std::int64_t steps = 0;
};

using EvalCallback = std::function<void(const MetricsRecord&)>;

/// Mini-batch training with warm-up on the BCE loss. Per-sample gradients
/// are summed in sample order, so a run is fully determined by the seeds.
TrainResult train(BlockStack& model, std::span<const Sample> train_data, std::span<const Sample> eval_data,
                  const TrainConfig& cfg, const EvalCallback& on_eval = {});

}  // namespace msn
