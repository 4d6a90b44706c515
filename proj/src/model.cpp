#include "msn/model.hpp"

#include <cmath>
#include <limits>

namespace msn {

const char* to_string(BlockKind k) {
  switch (k) {
    case BlockKind::kFfn:
      return "ffn";
    case BlockKind::kSmoe:
      return "smoe";
    case BlockKind::kMsnFfn:
      return "msn-ffn";
    case BlockKind::kMsnSmoe:
      return "msn-smoe";
  }
  return "?";
}

BlockKind parse_block_kind(const std::string& s) {
  if (s == "ffn") return BlockKind::kFfn;
  if (s == "smoe") return BlockKind::kSmoe;
  if (s == "msn-ffn") return BlockKind::kMsnFfn;
  if (s == "msn-smoe") return BlockKind::kMsnSmoe;
  throw ContractError("unknown block kind '" + s + "' (expected ffn, smoe, msn-ffn, msn-smoe)");
}

const char* to_string(WeightMode m) { return m == WeightMode::kSoftmax ? "softmax" : "linear"; }

WeightMode parse_weight_mode(const std::string& s) {
  if (s == "softmax") return WeightMode::kSoftmax;
  if (s == "linear") return WeightMode::kLinearNormalized;
  throw ContractError("unknown weight mode '" + s + "' (expected softmax, linear)");
}

const char* to_string(GatingFn g) {
  switch (g) {
    case GatingFn::kTanh:
      return "tanh";
    case GatingFn::kSigmoid:
      return "sigmoid";
    case GatingFn::kIdentity:
      return "identity";
  }
  return "?";
}

GatingFn parse_gating_fn(const std::string& s) {
  if (s == "tanh") return GatingFn::kTanh;
  if (s == "sigmoid") return GatingFn::kSigmoid;
  if (s == "identity") return GatingFn::kIdentity;
  throw ContractError("unknown gating function '" + s + "' (expected tanh, sigmoid, identity)");
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kGelu:
      return "gelu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kIdentity:
      return "identity";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "gelu") return Activation::kGelu;
  throw ContractError("unknown activation '" + s + "' (expected relu, gelu)");
}

Index ModelConfig::msn_layer_count() const {
  Index count = 0;
  for (auto k : layers) count += has_memory(k) ? 1 : 0;
  return count;
}

MemoryConfig ModelConfig::memory() const {
  MemoryConfig m;
  m.n = n;
  m.k = k;
  m.d_key = d_key;
  m.d_value = d_token();
  m.d_in = d_token();
  m.weight_mode = weight_mode;
  m.gating = gating;
  m.over_param = over_param;
  m.layernorm_qk = layernorm_qk;
  m.layernorm_affine = layernorm_affine;
  return m;
}

void ModelConfig::validate() const {
  require(d_model >= 1, "model.d_model must be positive");
  require(tokens >= 1 && d_model % tokens == 0, "model.tokens must divide model.d_model");
  require(!layers.empty(), "model.layers must not be empty");
  require(ffn_hidden >= 1, "model.ffn_hidden must be positive");
  bool any_smoe = false;
  for (auto k : layers) any_smoe = any_smoe || has_smoe(k);
  if (any_smoe) {
    require(smoe_experts >= 1, "model.smoe_experts must be positive");
    require(smoe_active >= 1 && smoe_active <= smoe_experts, "model.smoe_active must satisfy 1 <= smoe_active <= smoe_experts");
  }
  if (msn_layer_count() > 0) {
    try {
      memory().validate();
    } catch (const ContractError& e) {
      throw ContractError(std::string("model: ") + e.what());
    }
  }
}

namespace {

MatrixXd gaussian(Index rows, Index cols, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * normal(rng);
  return m;
}

template <typename Fn>
void for_each_slot(BlockStack& m, Fn&& add) {
  const auto& cfg = m.cfg;
  const bool ln_trainable = cfg.layernorm_qk && cfg.layernorm_affine;
  add("stem.weight", m.stem_weight.data(), m.stem_weight.rows(), m.stem_weight.cols(), true);
  add("stem.bias", m.stem_bias.data(), m.stem_bias.size(), Index{1}, true);
  auto ffn_slots = [&](const std::string& prefix, Ffn2<double>& f) {
    add(prefix + ".w_in", f.w_in.data(), f.w_in.rows(), f.w_in.cols(), true);
    add(prefix + ".bias", f.bias.data(), f.bias.size(), Index{1}, true);
    add(prefix + ".w_out", f.w_out.data(), f.w_out.rows(), f.w_out.cols(), true);
  };
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& b = m.layers[l];
    const std::string p = "layers." + std::to_string(l);
    if (has_memory(b.kind)) {
      if (b.shared_values.size() > 0)
        add(p + ".memory.values", b.shared_values.data(), b.shared_values.rows(), b.shared_values.cols(), true);
      for (std::size_t t = 0; t < b.heads.size(); ++t) {
        auto& h = b.heads[t];
        const std::string q = p + ".memory." + std::to_string(t);
        if (h.values.size() > 0) add(q + ".values", h.values.data(), h.values.rows(), h.values.cols(), true);
        add(q + ".key_row", h.key_row.data(), h.key_row.rows(), h.key_row.cols(), true);
        add(q + ".key_col", h.key_col.data(), h.key_col.rows(), h.key_col.cols(), true);
        add(q + ".theta_row", h.theta_row.data(), h.theta_row.rows(), h.theta_row.cols(), cfg.over_param);
        add(q + ".theta_col", h.theta_col.data(), h.theta_col.rows(), h.theta_col.cols(), cfg.over_param);
        add(q + ".query_weight", h.query_weight.data(), h.query_weight.rows(), h.query_weight.cols(), true);
        add(q + ".query_bias", h.query_bias.data(), h.query_bias.size(), Index{1}, true);
        add(q + ".ln_q.gamma", h.ln_q.gamma.data(), h.ln_q.gamma.size(), Index{1}, ln_trainable);
        add(q + ".ln_q.beta", h.ln_q.beta.data(), h.ln_q.beta.size(), Index{1}, ln_trainable);
        add(q + ".ln_k.gamma", h.ln_k.gamma.data(), h.ln_k.gamma.size(), Index{1}, ln_trainable);
        add(q + ".ln_k.beta", h.ln_k.beta.data(), h.ln_k.beta.size(), Index{1}, ln_trainable);
      }
    }
    if (has_smoe(b.kind)) {
      for (std::size_t e = 0; e < b.smoe.experts.size(); ++e)
        ffn_slots(p + ".smoe.experts." + std::to_string(e), b.smoe.experts[e]);
      add(p + ".smoe.router", b.smoe.router.data(), b.smoe.router.rows(), b.smoe.router.cols(), true);
    } else {
      ffn_slots(p + ".ffn", b.ffn);
    }
  }
  add("head.weight", m.head_weight.data(), m.head_weight.size(), Index{1}, true);
  add("head.bias", m.head_bias.data(), m.head_bias.size(), Index{1}, true);
}

}  // namespace

BlockStack init_model(const ModelConfig& cfg, Index d_in, std::uint64_t seed) {
  cfg.validate();
  require(d_in >= 1, "model: input dimension must be positive");
  std::mt19937_64 rng(seed);
  BlockStack m;
  m.cfg = cfg;
  m.d_in = d_in;
  m.stem_weight = gaussian(cfg.d_model, d_in, 1.0 / std::sqrt(static_cast<double>(d_in)), rng);
  m.stem_bias = VectorXd::Zero(cfg.d_model);
  const auto mcfg = cfg.memory();
  for (auto kind : cfg.layers) {
    Block b;
    b.kind = kind;
    if (has_memory(kind)) {
      for (Index t = 0; t < cfg.tokens; ++t)
        b.heads.push_back(init_memory_block<double>(mcfg, rng, cfg.value_init_scale, cfg.per_token_values));
      if (!cfg.per_token_values) b.shared_values = gaussian(cfg.n, cfg.d_token(), cfg.value_init_scale, rng);
    }
    if (has_smoe(kind)) {
      b.smoe = init_smoe<double>(cfg.smoe_experts, cfg.smoe_active, cfg.d_model, cfg.ffn_hidden, cfg.d_model, rng,
                                 cfg.activation, cfg.branch_scale);
    } else {
      b.ffn = init_ffn<double>(cfg.d_model, cfg.ffn_hidden, cfg.d_model, rng, cfg.activation, cfg.branch_scale);
    }
    m.layers.push_back(std::move(b));
  }
  m.head_weight = gaussian(cfg.d_model, 1, 1.0 / std::sqrt(static_cast<double>(cfg.d_model)), rng).col(0);
  m.head_bias = VectorXd::Zero(1);
  return m;
}

BlockStack zeros_like(const BlockStack& m) {
  BlockStack z = m;
  for (auto& slot : param_slots(z))
    for (double& v : slot.span()) v = 0.0;
  return z;
}

std::vector<ParamSlot> param_slots(BlockStack& m) {
  std::vector<ParamSlot> slots;
  for_each_slot(m, [&](const std::string& name, double* data, Index rows, Index cols, bool trainable) {
    slots.push_back({name, data, rows, cols, trainable});
  });
  return slots;
}

ParamCounts count_params(const ModelConfig& cfg, Index d_in) {
  cfg.validate();
  ParamCounts c;
  const std::int64_t stem = static_cast<std::int64_t>(cfg.d_model) * d_in + cfg.d_model;
  const std::int64_t head = cfg.d_model + 1;
  c.total = c.activated = stem + head;
  const auto ffn = Ffn2<double>::param_count(cfg.d_model, cfg.ffn_hidden, cfg.d_model);
  const auto mcfg = cfg.memory();
  for (auto kind : cfg.layers) {
    if (has_smoe(kind)) {
      c.total += SmoeBlock<double>::total_param_count(cfg.smoe_experts, cfg.d_model, cfg.ffn_hidden, cfg.d_model);
      c.activated += SmoeBlock<double>::activated_param_count(cfg.smoe_experts, cfg.smoe_active, cfg.d_model,
                                                              cfg.ffn_hidden, cfg.d_model);
    } else {
      c.total += ffn;
      c.activated += ffn;
    }
    if (has_memory(kind)) {
      const std::int64_t retrieval = cfg.tokens * MemoryBlock<double>::retrieval_param_count(mcfg);
      const std::int64_t values =
          (cfg.per_token_values ? cfg.tokens : 1) * MemoryBlock<double>::value_param_count(mcfg);
      c.memory += retrieval + values;
      c.total += retrieval + values;
      c.activated += retrieval;
    }
  }
  return c;
}

SampleTape forward(const BlockStack& m, const VectorXd& x) {
  require_dims(x.size(), m.d_in, "model input");
  const auto& cfg = m.cfg;
  const Index dt = cfg.d_token();
  const MemoryConfig mcfg = cfg.memory();
  SampleTape tape;
  tape.x = x;
  VectorXd h = matvec(m.stem_weight, x) + m.stem_bias;
  tape.layers.resize(m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& b = m.layers[l];
    auto& lt = tape.layers[l];
    lt.input = h;
    const VectorXd* branch_in = &h;
    if (has_memory(b.kind)) {
      lt.gated.resize(h.size());
      for (Index t = 0; t < cfg.tokens; ++t) {
        const auto token = static_cast<std::size_t>(t);
        const VectorXd slice = h.segment(t * dt, dt);
        auto out = memory_forward(slice, b.heads[token], b.values_for(token), mcfg);
        lt.gated.segment(t * dt, dt) = memory_gate(slice, out.v_o, cfg.gating);
        lt.memory.push_back(std::move(out.tape));
        lt.memory_out.push_back(std::move(out.v_o));
      }
      branch_in = &lt.gated;
    }
    if (has_smoe(b.kind)) {
      h += smoe_forward(*branch_in, b.smoe, &lt.smoe);
    } else {
      h += ffn_forward(*branch_in, b.ffn, &lt.ffn);
    }
  }
  tape.logit = dot(m.head_weight, h) + m.head_bias[0];
  tape.final_hidden = std::move(h);
  return tape;
}

namespace {

void add_ffn_grad(Ffn2<double>& acc, const FfnGrad<double>& g) {
  acc.w_in += g.w_in;
  acc.bias += g.bias;
  acc.w_out += g.w_out;
}

}  // namespace

VectorXd backward(const BlockStack& m, const SampleTape& tape, double d_logit, BlockStack& grads) {
  const auto& cfg = m.cfg;
  const Index dt = cfg.d_token();
  grads.head_weight += d_logit * tape.final_hidden;
  grads.head_bias[0] += d_logit;
  VectorXd d_h = d_logit * m.head_weight;

  for (std::size_t l = m.layers.size(); l-- > 0;) {
    const auto& b = m.layers[l];
    const auto& lt = tape.layers[l];
    auto& gb = grads.layers[l];
    VectorXd d_branch_in;
    if (has_smoe(b.kind)) {
      auto g = smoe_backward(b.smoe, lt.smoe, d_h);
      for (std::size_t e = 0; e < g.experts.size(); ++e) add_ffn_grad(gb.smoe.experts[e], g.experts[e]);
      gb.smoe.router += g.router;
      d_branch_in = std::move(g.d_input);
    } else {
      auto g = ffn_backward(b.ffn, lt.ffn, d_h);
      add_ffn_grad(gb.ffn, g);
      d_branch_in = std::move(g.d_input);
    }
    if (!has_memory(b.kind)) {
      d_h += d_branch_in;
      continue;
    }
    for (Index t = 0; t < cfg.tokens; ++t) {
      const auto token = static_cast<std::size_t>(t);
      const VectorXd slice = lt.input.segment(t * dt, dt);
      const VectorXd d_gated = d_branch_in.segment(t * dt, dt);
      auto gg = grad_memory_gate(slice, lt.memory_out[token], cfg.gating, d_gated);
      auto mb = memory_backward(lt.memory[token], gg.d_memory);
      d_h.segment(t * dt, dt) += gg.d_input + mb.d_input;

      auto& head = gb.heads[token];
      MatrixXd& values = gb.shared_values.size() > 0 ? gb.shared_values : head.values;
      const auto& rows = mb.grads.values.rows;
      for (std::size_t r = 0; r < rows.size(); ++r) values.row(rows[r]) += mb.grads.values.grads.row(static_cast<Index>(r));
      head.key_row += mb.grads.key_row;
      head.key_col += mb.grads.key_col;
      head.theta_row += mb.grads.theta_row;
      head.theta_col += mb.grads.theta_col;
      head.query_weight += mb.grads.query_weight;
      head.query_bias += mb.grads.query_bias;
      head.ln_q.gamma += mb.grads.ln_q_gamma;
      head.ln_q.beta += mb.grads.ln_q_beta;
      head.ln_k.gamma += mb.grads.ln_k_gamma;
      head.ln_k.beta += mb.grads.ln_k_beta;
    }
  }
  auto stem = grad_matvec(m.stem_weight, tape.x, VectorXd(d_h));
  grads.stem_weight += stem.d_matrix;
  grads.stem_bias += d_h;
  return stem.d_vector;
}

std::vector<BlockKind> with_msn_layers(const std::vector<BlockKind>& layers, Index msn_layers) {
  require(msn_layers >= 0 && msn_layers <= static_cast<Index>(layers.size()),
          "msn layer count " + std::to_string(msn_layers) + " exceeds the " + std::to_string(layers.size()) +
              " backbone layers");
  std::vector<BlockKind> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const bool smoe = has_smoe(layers[i]);
    if (static_cast<Index>(i) < msn_layers)
      out.push_back(smoe ? BlockKind::kMsnSmoe : BlockKind::kMsnFfn);
    else
      out.push_back(smoe ? BlockKind::kSmoe : BlockKind::kFfn);
  }
  return out;
}

ModelConfig matched_ffn_baseline(const ModelConfig& cfg, Index d_in) {
  const std::int64_t target = count_params(cfg, d_in).activated;
  ModelConfig base = cfg;
  for (auto& k : base.layers) k = BlockKind::kFfn;
  Index best = 1;
  std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
  for (Index hidden = 1; hidden <= 64 * cfg.ffn_hidden + 1024; ++hidden) {
    base.ffn_hidden = hidden;
    const std::int64_t got = count_params(base, d_in).activated;
    const std::int64_t gap = std::llabs(got - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = hidden;
    }
    if (got > target) break;
  }
  base.ffn_hidden = best;
  return base;
}

}  // namespace msn
