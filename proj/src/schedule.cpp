#include "msn/schedule.hpp"

#include <cmath>

namespace msn {

void Optimizer::step(const std::vector<ParamSlot>& params, const std::vector<ParamSlot>& grads, double lr) {
  require(params.size() == grads.size(), "optimizer: param/grad slot count mismatch");
  ++t_;
  if (cfg_.kind == OptimizerKind::kAdam && m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
      v_.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
    }
  }
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t s = 0; s < params.size(); ++s) {
    const auto& p = params[s];
    const auto& g = grads[s];
    require(p.size() == g.size(), [&] { return "optimizer: slot " + p.name + " size mismatch"; });
    if (!p.trainable) continue;
    if (cfg_.kind == OptimizerKind::kSgd) {
      for (Index i = 0; i < p.size(); ++i) p.data[i] -= lr * g.data[i];
      continue;
    }
    auto& m = m_[s];
    auto& v = v_[s];
    for (Index i = 0; i < p.size(); ++i) {
      const double gi = g.data[i];
      const auto u = static_cast<std::size_t>(i);
      m[u] = cfg_.beta1 * m[u] + (1.0 - cfg_.beta1) * gi;
      v[u] = cfg_.beta2 * v[u] + (1.0 - cfg_.beta2) * gi * gi;
      p.data[i] -= lr * (m[u] / c1) / (std::sqrt(v[u] / c2) + cfg_.epsilon);
    }
  }
}

}  // namespace msn
