// Analytic per-sample operation counts. Multiplies and adds are counted
// separately, so one multiply-accumulate is 2 ops.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msn/model.hpp"

namespace msn {

struct BlockFlops {
  std::string kind;
  std::int64_t scoring = 0;      // sub-key scores, both subspaces
  std::int64_t combination = 0;  // k*k candidate sums
  std::int64_t gather = 0;       // weighted sum of k value rows
  std::int64_t dense = 0;        // query network, key transforms, FFN/SMoE
  std::int64_t flat_scan_baseline = 0;  // scoring every slot with one flat key table

  std::int64_t total() const { return scoring + combination + gather + dense; }
};

struct FlopsReport {
  std::vector<BlockFlops> blocks;
  std::int64_t io = 0;  // stem projection and logit head
  std::int64_t scoring = 0;
  std::int64_t combination = 0;
  std::int64_t gather = 0;
  std::int64_t dense = 0;
  std::int64_t flat_scan_baseline = 0;

  std::int64_t total() const { return io + scoring + combination + gather + dense; }
  nlohmann::json to_json() const;
};

inline std::int64_t ffn_macs(Index d_in, Index d_mid, Index d_out) {
  return static_cast<std::int64_t>(d_in) * d_mid + static_cast<std::int64_t>(d_mid) * d_out;
}

/// Scoring for one memory lookup: 2 subspaces x sqrt(n) keys x d_key MACs.
inline std::int64_t memory_scoring_ops(const MemoryConfig& m) {
  return 2 * (2 * static_cast<std::int64_t>(m.sqrt_n()) * m.d_key);
}

/// Scoring every one of the n slots against a single d_key query.
inline std::int64_t flat_scan_ops(const MemoryConfig& m) { return 2 * static_cast<std::int64_t>(m.n) * m.d_key; }

FlopsReport count_flops(const ModelConfig& cfg, Index d_in);

}  // namespace msn
