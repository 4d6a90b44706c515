#include "msn/flops.hpp"

namespace msn {

FlopsReport count_flops(const ModelConfig& cfg, Index d_in) {
  cfg.validate();
  FlopsReport r;
  r.io = 2 * static_cast<std::int64_t>(cfg.d_model) * d_in + 2 * static_cast<std::int64_t>(cfg.d_model);
  const auto mcfg = cfg.memory();
  const std::int64_t ffn = 2 * ffn_macs(cfg.d_model, cfg.ffn_hidden, cfg.d_model);
  for (auto kind : cfg.layers) {
    BlockFlops b;
    b.kind = to_string(kind);
    if (has_smoe(kind)) {
      b.dense += 2 * static_cast<std::int64_t>(cfg.d_model) * cfg.smoe_experts + cfg.smoe_active * ffn;
    } else {
      b.dense += ffn;
    }
    if (has_memory(kind)) {
      const std::int64_t tokens = cfg.tokens;
      const std::int64_t dk = cfg.d_key;
      b.scoring = tokens * memory_scoring_ops(mcfg);
      b.combination = tokens * static_cast<std::int64_t>(cfg.k) * cfg.k;
      b.gather = tokens * 2 * static_cast<std::int64_t>(cfg.k) * cfg.d_token();
      b.dense += tokens * 2 * (2 * dk * cfg.d_token());
      if (cfg.over_param) b.dense += tokens * 2 * (2 * dk * dk);
      b.flat_scan_baseline = tokens * flat_scan_ops(mcfg);
    }
    r.scoring += b.scoring;
    r.combination += b.combination;
    r.gather += b.gather;
    r.dense += b.dense;
    r.flat_scan_baseline += b.flat_scan_baseline;
    r.blocks.push_back(std::move(b));
  }
  return r;
}

nlohmann::json FlopsReport::to_json() const {
  nlohmann::json blocks_json = nlohmann::json::array();
  for (const auto& b : blocks)
    blocks_json.push_back({{"kind", b.kind},
                           {"scoring", b.scoring},
                           {"combination", b.combination},
                           {"gather", b.gather},
                           {"dense", b.dense},
                           {"flat_scan_baseline", b.flat_scan_baseline}});
  return {{"io", io},
          {"scoring", scoring},
          {"combination", combination},
          {"gather", gather},
          {"dense", dense},
          {"flat_scan_baseline", flat_scan_baseline},
          {"total", total()},
          {"blocks", blocks_json}};
}

}  // namespace msn
