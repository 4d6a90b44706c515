#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "msn/numerics.hpp"

namespace msn {

/// Linear warm-up from floor_fraction * base_lr to base_lr over
/// warmup_steps, constant afterwards.
struct WarmupSchedule {
  double base_lr = 0.01;
  std::int64_t warmup_steps = 2000;
  double floor_fraction = 0.001;

  double lr(std::int64_t step) const {
    if (step >= warmup_steps) return base_lr;
    if (step <= 0) return base_lr * floor_fraction;
    const double progress = static_cast<double>(step) / static_cast<double>(warmup_steps);
    return base_lr * (floor_fraction + (1.0 - floor_fraction) * progress);
  }
};

/// A named, contiguous parameter buffer.
struct ParamSlot {
  std::string name;
  double* data = nullptr;
  Index rows = 0;
  Index cols = 0;
  bool trainable = true;  // false for parameters the config leaves unused

  Index size() const { return rows * cols; }
  std::span<double> span() const { return {data, static_cast<std::size_t>(size())}; }
};

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const OptimizerConfig&) const = default;
};

/// Applies one update to every trainable slot. `grads` must list the same
/// slots in the same order as `params`.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<ParamSlot>& params, const std::vector<ParamSlot>& grads, double lr);
  std::int64_t steps_taken() const { return t_; }

 private:
  OptimizerConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace msn
