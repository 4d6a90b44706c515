// Block-stack CTR model.
//
//   h_0     = W_stem x + b_stem                       (d_model)
//   h_{l+1} = h_l + F_l(G_l(h_l))                     per block
//   logit   = <w_head, h_L> + b_head
//
// F_l is an FFN or an SMoE. For MSN blocks G_l splits h_l into `tokens`
// equal slices, retrieves a memory output per slice (own query network and
// sub-keys per token, value table shared across tokens unless
// per_token_values) and gates the slice with it; otherwise G_l is the
// identity.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "msn/baselines.hpp"
#include "msn/memory.hpp"
#include "msn/schedule.hpp"

namespace msn {

enum class BlockKind { kFfn, kSmoe, kMsnFfn, kMsnSmoe };

inline bool has_memory(BlockKind k) { return k == BlockKind::kMsnFfn || k == BlockKind::kMsnSmoe; }
inline bool has_smoe(BlockKind k) { return k == BlockKind::kSmoe || k == BlockKind::kMsnSmoe; }

const char* to_string(BlockKind k);
BlockKind parse_block_kind(const std::string& s);
const char* to_string(WeightMode m);
WeightMode parse_weight_mode(const std::string& s);
const char* to_string(GatingFn g);
GatingFn parse_gating_fn(const std::string& s);
const char* to_string(Activation a);
Activation parse_activation(const std::string& s);

struct ModelConfig {
  Index d_model = 32;
  Index tokens = 1;
  std::vector<BlockKind> layers = {BlockKind::kMsnFfn, BlockKind::kFfn};
  Index ffn_hidden = 64;
  Activation activation = Activation::kRelu;
  Index smoe_experts = 4;
  Index smoe_active = 2;
  double branch_scale = 0.5;  // init scale of each block's output projection

  // memory
  Index n = 64 * 64;
  Index k = 8;
  Index d_key = 16;
  WeightMode weight_mode = WeightMode::kSoftmax;
  GatingFn gating = GatingFn::kTanh;
  bool over_param = true;
  bool layernorm_qk = true;
  bool layernorm_affine = true;
  bool per_token_values = false;
  double value_init_scale = 1.0;

  Index d_token() const { return d_model / tokens; }
  Index msn_layer_count() const;
  MemoryConfig memory() const;
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct Block {
  BlockKind kind = BlockKind::kFfn;
  Ffn2<double> ffn;
  SmoeBlock<double> smoe;
  std::vector<MemoryBlock<double>> heads;  // one per token; own values only if per-token
  MatrixXd shared_values;                  // n x d_token when values are shared

  const MatrixXd& values_for(std::size_t token) const {
    return shared_values.size() > 0 ? shared_values : heads[token].values;
  }
};

struct BlockStack {
  ModelConfig cfg;
  Index d_in = 0;
  MatrixXd stem_weight;  // d_model x d_in
  VectorXd stem_bias;
  std::vector<Block> layers;
  VectorXd head_weight;  // d_model
  VectorXd head_bias;    // 1
};

BlockStack init_model(const ModelConfig& cfg, Index d_in, std::uint64_t seed);

/// Same shapes as `m`, every buffer zero. Used as the gradient accumulator.
BlockStack zeros_like(const BlockStack& m);

/// Every parameter buffer in a fixed order (names are checkpoint keys).
std::vector<ParamSlot> param_slots(BlockStack& m);

struct ParamCounts {
  std::int64_t total = 0;
  std::int64_t activated = 0;
  std::int64_t memory = 0;  // memory-layer parameters (values, keys, transforms, query nets, norms)
  double memory_ratio() const { return total > 0 ? static_cast<double>(memory) / static_cast<double>(total) : 0.0; }
};

/// Analytic counts from dims. Activated counts every parameter a forward
/// pass touches except memory value rows, whose k gathered rows per lookup
/// are reported by the FLOPs counter instead.
ParamCounts count_params(const ModelConfig& cfg, Index d_in);

struct LayerTape {
  VectorXd input;
  std::vector<MemoryTape<double>> memory;
  std::vector<VectorXd> memory_out;
  VectorXd gated;
  FfnTape<double> ffn;
  SmoeTape<double> smoe;
};

struct SampleTape {
  VectorXd x;
  std::vector<LayerTape> layers;
  VectorXd final_hidden;
  double logit = 0.0;
};

/// Forward pass. The tape points into `m`; keep `m` in place until the
/// matching backward call.
SampleTape forward(const BlockStack& m, const VectorXd& x);

/// Accumulates d(loss)/d(params) for one sample into `grads` (a zeros_like
/// of `m`) and returns d(loss)/dx.
VectorXd backward(const BlockStack& m, const SampleTape& tape, double d_logit, BlockStack& grads);

/// Layer kinds with the first `msn_layers` layers carrying memory and the
/// rest plain, keeping each layer's FFN/SMoE base.
std::vector<BlockKind> with_msn_layers(const std::vector<BlockKind>& layers, Index msn_layers);

/// Plain-FFN variant of `cfg` whose ffn_hidden is widened so its activated
/// parameter count is as close as possible to that of `cfg`.
ModelConfig matched_ffn_baseline(const ModelConfig& cfg, Index d_in);

}  // namespace msn
