// Product-key memory layer.
//
// A query network maps the block input to a row query and a column query.
// Each query scores its own table of sqrt(n) sub-keys (optionally
// layer-normalized and passed through a learnable d_key x d_key transform),
// the top-k of each subspace are combined over their k*k Cartesian product,
// and the best k pairs address rows of the n x d_value value table. The
// retrieved rows are mixed by softmax (or linearly normalized) pair scores
// and the result gates the block input elementwise.
//
// Indices are not differentiable: gradient reaches keys, queries and the
// transforms only through the scores of the selected pairs.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "msn/kernels.hpp"
#include "msn/numerics.hpp"

namespace msn {

enum class WeightMode { kSoftmax, kLinearNormalized };
enum class GatingFn { kTanh, kSigmoid, kIdentity };

/// Raised when linear-normalized weighting divides by a near-zero score sum.
class DegenerateNormalizationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct MemoryConfig {
  Index n = 64 * 64;   // value slots, a perfect square
  Index d_key = 32;    // sub-key and query dimension
  Index d_value = 32;  // value row dimension (also the gated width)
  Index d_in = 32;     // query-network input dimension
  Index k = 8;         // retrieval size
  WeightMode weight_mode = WeightMode::kSoftmax;
  GatingFn gating = GatingFn::kTanh;
  bool over_param = true;
  bool layernorm_qk = true;
  bool layernorm_affine = true;
  double layernorm_epsilon = 1e-5;

  bool operator==(const MemoryConfig&) const = default;

  Index sqrt_n() const {
    auto r = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(n))));
    while (r * r > n) --r;
    while ((r + 1) * (r + 1) <= n) ++r;
    return r;
  }

  void validate() const {
    require(n >= 1, "memory: n must be positive");
    const Index r = sqrt_n();
    require(r * r == n, [&] { return "memory: n=" + std::to_string(n) + " is not a perfect square"; });
    require(k >= 1 && k <= r, [&] { return "memory: k=" + std::to_string(k) + " must satisfy 1 <= k <= sqrt(n)=" + std::to_string(r); });
    require(d_key > 0, "memory: d_key must be positive");
    require(d_value > 0, "memory: d_value must be positive");
    require(d_in > 0, "memory: d_in must be positive");
    require(layernorm_epsilon > 0.0, "memory: layernorm epsilon must be positive");
  }
};

template <typename Scalar>
struct MemoryBlock {
  Matrix<Scalar> values;        // n x d_value
  Matrix<Scalar> key_row;       // sqrt(n) x d_key
  Matrix<Scalar> key_col;       // sqrt(n) x d_key
  Matrix<Scalar> theta_row;     // d_key x d_key, applied to each key vector
  Matrix<Scalar> theta_col;     // d_key x d_key
  Matrix<Scalar> query_weight;  // 2*d_key x d_in, rows [0, d_key) produce q_row
  Vector<Scalar> query_bias;    // 2*d_key
  LayerNormParams<Scalar> ln_q;
  LayerNormParams<Scalar> ln_k;

  void check(const MemoryConfig& cfg, bool with_values = true) const {
    cfg.validate();
    const Index r = cfg.sqrt_n();
    if (with_values) {
      require_dims(values.rows(), cfg.n, "memory values rows");
      require_dims(values.cols(), cfg.d_value, "memory values cols");
    }
    require_dims(key_row.rows(), r, "key_row rows");
    require_dims(key_row.cols(), cfg.d_key, "key_row cols");
    require_dims(key_col.rows(), r, "key_col rows");
    require_dims(key_col.cols(), cfg.d_key, "key_col cols");
    require(theta_row.rows() == cfg.d_key && theta_row.cols() == cfg.d_key, "theta_row must be d_key x d_key");
    require(theta_col.rows() == cfg.d_key && theta_col.cols() == cfg.d_key, "theta_col must be d_key x d_key");
    require_dims(query_weight.rows(), 2 * cfg.d_key, "query_weight rows");
    require_dims(query_weight.cols(), cfg.d_in, "query_weight cols");
    require_dims(query_bias.size(), 2 * cfg.d_key, "query_bias");
    require_dims(ln_q.dim(), cfg.d_key, "ln_q");
    require_dims(ln_k.dim(), cfg.d_key, "ln_k");
  }

  /// Trainable parameters excluding the value table; theta and LayerNorm
  /// terms count only when the config uses them.
  static std::int64_t retrieval_param_count(const MemoryConfig& cfg) {
    const std::int64_t r = cfg.sqrt_n();
    const std::int64_t dk = cfg.d_key;
    std::int64_t count = 2 * r * dk + 2 * dk * cfg.d_in + 2 * dk;
    if (cfg.over_param) count += 2 * dk * dk;
    if (cfg.layernorm_qk && cfg.layernorm_affine) count += 4 * dk;
    return count;
  }
  static std::int64_t value_param_count(const MemoryConfig& cfg) {
    return static_cast<std::int64_t>(cfg.n) * cfg.d_value;
  }
};

/// Random initialization: Gaussian keys and values, identity transforms,
/// fan-in scaled query weights, zero query bias, LayerNorm at 1/0.
template <typename Scalar>
MemoryBlock<Scalar> init_memory_block(const MemoryConfig& cfg, std::mt19937_64& rng, double value_scale = 1.0,
                                      bool with_values = true) {
  cfg.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Index rows, Index cols, double scale) {
    Matrix<Scalar> m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = static_cast<Scalar>(scale * normal(rng));
    return m;
  };
  const Index r = cfg.sqrt_n();
  MemoryBlock<Scalar> b;
  if (with_values) b.values = gaussian(cfg.n, cfg.d_value, value_scale);
  b.key_row = gaussian(r, cfg.d_key, 1.0 / std::sqrt(static_cast<double>(cfg.d_key)));
  b.key_col = gaussian(r, cfg.d_key, 1.0 / std::sqrt(static_cast<double>(cfg.d_key)));
  b.theta_row = Matrix<Scalar>::Identity(cfg.d_key, cfg.d_key);
  b.theta_col = Matrix<Scalar>::Identity(cfg.d_key, cfg.d_key);
  b.query_weight = gaussian(2 * cfg.d_key, cfg.d_in, 1.0 / std::sqrt(static_cast<double>(cfg.d_in)));
  b.query_bias = Vector<Scalar>::Zero(2 * cfg.d_key);
  b.ln_q = LayerNormParams<Scalar>::identity(cfg.d_key, cfg.layernorm_affine, cfg.layernorm_epsilon);
  b.ln_k = LayerNormParams<Scalar>::identity(cfg.d_key, cfg.layernorm_affine, cfg.layernorm_epsilon);
  return b;
}

/// Multiply-add tallies taken at the loop sites of a forward pass.
struct OpCounts {
  std::int64_t scoring = 0;      // sub-key dot products, 2 per MAC
  std::int64_t combination = 0;  // candidate pair sums, 1 per add
  std::int64_t gather = 0;       // weighted value accumulation, 2 per MAC
};

// ---------------------------------------------------------------------------
// Query network

template <typename Scalar>
struct QueryPair {
  Vector<Scalar> row;
  Vector<Scalar> col;
};

template <typename Scalar>
struct QueryCache {
  Vector<Scalar> raw;  // query-network output, 2*d_key
  LayerNormCache<Scalar> ln_row;
  LayerNormCache<Scalar> ln_col;
};

template <typename Scalar>
QueryPair<Scalar> query_split(const Vector<Scalar>& x_in, const MemoryBlock<Scalar>& block, const MemoryConfig& cfg,
                              QueryCache<Scalar>* cache = nullptr) {
  require_dims(x_in.size(), block.query_weight.cols(), "query_split input");
  Vector<Scalar> raw = matvec(block.query_weight, x_in);
  raw += block.query_bias;
  const Index dk = cfg.d_key;
  QueryPair<Scalar> q{raw.head(dk), raw.tail(dk)};
  if (cfg.layernorm_qk) {
    q.row = layernorm(Vector<Scalar>(q.row), block.ln_q, cache ? &cache->ln_row : nullptr);
    q.col = layernorm(Vector<Scalar>(q.col), block.ln_q, cache ? &cache->ln_col : nullptr);
  }
  if (cache != nullptr) cache->raw = std::move(raw);
  return q;
}

// ---------------------------------------------------------------------------
// Sub-key scoring

template <typename Scalar>
struct SubkeyCache {
  Matrix<Scalar> keys_normalized;  // rows after optional LayerNorm (before the transform)
  Vector<Scalar> query_mapped;     // theta^T q, or q itself when over_param is off
};

/// score[i] = <theta * norm(keys[i]), q> = <norm(keys[i]), theta^T q>.
/// `ln_k` is used only when `layernorm_qk` is set.
template <typename Scalar>
Vector<Scalar> score_subkeys(const Vector<Scalar>& q, const Matrix<Scalar>& keys, const Matrix<Scalar>& theta,
                             bool over_param, bool layernorm_qk, const LayerNormParams<Scalar>& ln_k,
                             SubkeyCache<Scalar>* cache = nullptr, OpCounts* counts = nullptr) {
  require_dims(q.size(), keys.cols(), "score_subkeys query");
  const Index d = keys.cols();
  Vector<Scalar> mapped = q;
  if (over_param) {
    require(theta.rows() == d && theta.cols() == d, "score_subkeys: theta must be d_key x d_key");
    mapped = vecmat(q, theta);  // theta^T q
  }
  Matrix<Scalar> normalized;
  const Matrix<Scalar>* rows = &keys;
  if (layernorm_qk) {
    normalized.resize(keys.rows(), d);
    for (Index i = 0; i < keys.rows(); ++i)
      normalized.row(i) = layernorm(Vector<Scalar>(keys.row(i).transpose()), ln_k).transpose();
    rows = &normalized;
  }
  Vector<Scalar> scores(keys.rows());
  for (Index i = 0; i < keys.rows(); ++i) {
    double acc = 0.0;
    for (Index j = 0; j < d; ++j) acc += static_cast<double>((*rows)(i, j)) * static_cast<double>(mapped[j]);
    scores[i] = static_cast<Scalar>(acc);
    if (counts != nullptr) counts->scoring += 2 * d;
  }
  if (cache != nullptr) {
    cache->keys_normalized = layernorm_qk ? std::move(normalized) : keys;
    cache->query_mapped = std::move(mapped);
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Candidate combination

struct ScoredPair {
  Index row = 0;
  Index col = 0;
  double score = 0.0;
  bool operator==(const ScoredPair&) const = default;
};

/// Top-k pairs of row_scores[i] + col_scores[j] over I x J, where I and J are
/// the per-subspace top-k sets. Best first; equal sums keep (i, j)
/// lexicographic order.
template <typename Scalar>
std::vector<ScoredPair> combine_topk(const Vector<Scalar>& row_scores, const Vector<Scalar>& col_scores, Index k,
                                     OpCounts* counts = nullptr) {
  require_dims(col_scores.size(), row_scores.size(), "combine_topk");
  require(k >= 1 && k <= row_scores.size(), [&] {
    return "combine_topk: k=" + std::to_string(k) + " must satisfy 1 <= k <= sqrt(n)=" +
           std::to_string(row_scores.size());
  });
  auto rows = partial_topk<Scalar>(row_scores, k).indices;
  auto cols = partial_topk<Scalar>(col_scores, k).indices;
  // Candidate position c = a*k + b is then lexicographic in (i, j), so the
  // lower-position tie rule of partial_topk is the lexicographic pair rule.
  std::sort(rows.begin(), rows.end());
  std::sort(cols.begin(), cols.end());
  Eigen::VectorXd sums(k * k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b)
      sums[a * k + b] = static_cast<double>(row_scores[rows[static_cast<std::size_t>(a)]]) +
                        static_cast<double>(col_scores[cols[static_cast<std::size_t>(b)]]);
  if (counts != nullptr) counts->combination += k * k;
  const auto best = partial_topk<double>(sums, k);
  std::vector<ScoredPair> out;
  out.reserve(static_cast<std::size_t>(k));
  for (std::size_t t = 0; t < best.indices.size(); ++t) {
    const Index c = best.indices[t];
    out.push_back({rows[static_cast<std::size_t>(c / k)], cols[static_cast<std::size_t>(c % k)], best.scores[t]});
  }
  return out;
}

/// Row-major slot address of pair (i, j); inverse is divmod by sqrt_n.
inline Index flat_index(Index row, Index col, Index sqrt_n) {
  require(row >= 0 && row < sqrt_n && col >= 0 && col < sqrt_n,
          "flat_index: (" + std::to_string(row) + ", " + std::to_string(col) + ") out of range for sqrt_n=" +
              std::to_string(sqrt_n));
  return sqrt_n * row + col;
}

// ---------------------------------------------------------------------------
// Weighted aggregation

template <typename Scalar>
struct RetrievalResult {
  std::vector<ScoredPair> pairs;
  std::vector<Index> flat_indices;
  std::vector<double> raw_scores;
  std::vector<Scalar> weights;
};

inline std::vector<double> pair_weights(const std::vector<double>& scores, WeightMode mode) {
  std::vector<double> w(scores.size());
  if (mode == WeightMode::kSoftmax) {
    double top = scores.front();
    for (double s : scores) top = std::max(top, s);
    double z = 0.0;
    for (std::size_t t = 0; t < scores.size(); ++t) z += (w[t] = std::exp(scores[t] - top));
    for (double& x : w) x /= z;
  } else {
    double z = 0.0;
    for (double s : scores) z += s;
    if (std::abs(z) < 1e-12)
      throw DegenerateNormalizationError("linear-normalized weights: score sum " + std::to_string(z) +
                                         " is too close to zero");
    for (std::size_t t = 0; t < scores.size(); ++t) w[t] = scores[t] / z;
  }
  return w;
}

/// Backward of pair_weights: d_scores from d_weights.
inline std::vector<double> grad_pair_weights(const std::vector<double>& scores, const std::vector<double>& weights,
                                             const std::vector<double>& d_weights, WeightMode mode) {
  double mix = 0.0;
  for (std::size_t t = 0; t < weights.size(); ++t) mix += weights[t] * d_weights[t];
  std::vector<double> d(scores.size());
  if (mode == WeightMode::kSoftmax) {
    for (std::size_t t = 0; t < d.size(); ++t) d[t] = weights[t] * (d_weights[t] - mix);
  } else {
    double z = 0.0;
    for (double s : scores) z += s;
    for (std::size_t t = 0; t < d.size(); ++t) d[t] = (d_weights[t] - mix) / z;
  }
  return d;
}

template <typename Scalar, typename Table>
std::pair<Vector<Scalar>, RetrievalResult<Scalar>> aggregate_values(const std::vector<ScoredPair>& pairs,
                                                                    const Table& values, Index sqrt_n,
                                                                    WeightMode mode, OpCounts* counts = nullptr) {
  require(!pairs.empty(), "aggregate_values: no pairs");
  RetrievalResult<Scalar> r;
  r.pairs = pairs;
  for (const auto& p : pairs) {
    r.flat_indices.push_back(flat_index(p.row, p.col, sqrt_n));
    r.raw_scores.push_back(p.score);
  }
  const auto w = pair_weights(r.raw_scores, mode);
  r.weights.assign(w.begin(), w.end());
  GatherPlan<Scalar> plan{r.flat_indices, r.weights};
  auto v_o = fused_gather_sum(plan, values);
  if (counts != nullptr) counts->gather += 2 * static_cast<std::int64_t>(pairs.size()) * values.cols();
  return {std::move(v_o), std::move(r)};
}

// ---------------------------------------------------------------------------
// End-to-end forward / backward

/// Everything memory_backward needs. Holds non-owning pointers to the block
/// and value table used in the forward call; both must outlive the tape.
template <typename Scalar>
struct MemoryTape {
  const MemoryBlock<Scalar>* block = nullptr;
  const Matrix<Scalar>* values = nullptr;
  MemoryConfig cfg;
  Vector<Scalar> x_in;
  QueryCache<Scalar> query;
  QueryPair<Scalar> q;
  SubkeyCache<Scalar> row_keys;
  SubkeyCache<Scalar> col_keys;
  Vector<Scalar> row_scores;
  Vector<Scalar> col_scores;
  RetrievalResult<Scalar> result;
};

template <typename Scalar>
struct MemoryOutput {
  Vector<Scalar> v_o;
  RetrievalResult<Scalar> result;
  MemoryTape<Scalar> tape;
};

/// Forward pass reading values from `values` instead of block.values, for
/// value tables shared across several query networks.
template <typename Scalar>
MemoryOutput<Scalar> memory_forward(const Vector<Scalar>& x_in, const MemoryBlock<Scalar>& block,
                                    const Matrix<Scalar>& values, const MemoryConfig& cfg,
                                    OpCounts* counts = nullptr) {
  require_dims(values.rows(), cfg.n, "memory values rows");
  require_dims(values.cols(), cfg.d_value, "memory values cols");
  MemoryOutput<Scalar> out;
  auto& tape = out.tape;
  tape.block = &block;
  tape.values = &values;
  tape.cfg = cfg;
  tape.x_in = x_in;
  tape.q = query_split(x_in, block, cfg, &tape.query);
  tape.row_scores = score_subkeys(tape.q.row, block.key_row, block.theta_row, cfg.over_param, cfg.layernorm_qk,
                                  block.ln_k, &tape.row_keys, counts);
  tape.col_scores = score_subkeys(tape.q.col, block.key_col, block.theta_col, cfg.over_param, cfg.layernorm_qk,
                                  block.ln_k, &tape.col_keys, counts);
  const auto pairs = combine_topk(tape.row_scores, tape.col_scores, cfg.k, counts);
  auto [v_o, result] = aggregate_values<Scalar>(pairs, values, cfg.sqrt_n(), cfg.weight_mode, counts);
  tape.result = result;
  out.v_o = std::move(v_o);
  out.result = std::move(result);
  return out;
}

template <typename Scalar>
MemoryOutput<Scalar> memory_forward(const Vector<Scalar>& x_in, const MemoryBlock<Scalar>& block,
                                    const MemoryConfig& cfg, OpCounts* counts = nullptr) {
  return memory_forward(x_in, block, block.values, cfg, counts);
}

/// One gradient buffer per MemoryBlock parameter. The value-table gradient
/// is kept in scatter form (k rows).
template <typename Scalar>
struct MemoryGradients {
  SparseRows<Scalar> values;
  Matrix<Scalar> key_row;
  Matrix<Scalar> key_col;
  Matrix<Scalar> theta_row;
  Matrix<Scalar> theta_col;
  Matrix<Scalar> query_weight;
  Vector<Scalar> query_bias;
  Vector<Scalar> ln_q_gamma;
  Vector<Scalar> ln_q_beta;
  Vector<Scalar> ln_k_gamma;
  Vector<Scalar> ln_k_beta;
};

template <typename Scalar>
struct MemoryBackward {
  Vector<Scalar> d_input;
  MemoryGradients<Scalar> grads;
};

namespace detail {

// Backward through one subspace's scoring. Accumulates into the key, theta
// and ln_k buffers and returns the gradient w.r.t. the (normalized) query.
template <typename Scalar>
Vector<Scalar> subkey_backward(const std::vector<double>& d_scores, const Vector<Scalar>& q,
                               const Matrix<Scalar>& keys, const Matrix<Scalar>& theta,
                               const SubkeyCache<Scalar>& cache, const MemoryConfig& cfg,
                               const LayerNormParams<Scalar>& ln_k, Matrix<Scalar>& d_keys, Matrix<Scalar>& d_theta,
                               Vector<Scalar>& d_ln_gamma, Vector<Scalar>& d_ln_beta) {
  const Index d = keys.cols();
  Eigen::VectorXd d_mapped = Eigen::VectorXd::Zero(d);  // sum_i dS_i * norm(key_i)
  for (Index i = 0; i < keys.rows(); ++i) {
    const double ds = d_scores[static_cast<std::size_t>(i)];
    if (ds == 0.0) continue;
    for (Index j = 0; j < d; ++j) d_mapped[j] += ds * static_cast<double>(cache.keys_normalized(i, j));
    Vector<Scalar> d_norm_key(d);
    for (Index j = 0; j < d; ++j) d_norm_key[j] = static_cast<Scalar>(ds * static_cast<double>(cache.query_mapped[j]));
    if (cfg.layernorm_qk) {
      LayerNormCache<Scalar> c;
      layernorm(Vector<Scalar>(keys.row(i).transpose()), ln_k, &c);
      const auto g = grad_layernorm(c, ln_k, d_norm_key);
      d_keys.row(i) += g.d_input.transpose();
      d_ln_gamma += g.d_gamma;
      d_ln_beta += g.d_beta;
    } else {
      d_keys.row(i) += d_norm_key.transpose();
    }
  }
  const Vector<Scalar> dm = d_mapped.cast<Scalar>();
  if (!cfg.over_param) return dm;
  // mapped = theta^T q  =>  d_theta = outer(q, d_mapped), d_q = theta d_mapped
  const auto g = grad_vecmat(q, theta, dm);
  d_theta += g.d_matrix;
  return g.d_vector;
}

}  // namespace detail

template <typename Scalar>
MemoryBackward<Scalar> memory_backward(const MemoryTape<Scalar>& tape, const Vector<Scalar>& d_out) {
  require(tape.block != nullptr && tape.values != nullptr, "memory_backward: empty tape");
  const auto& cfg = tape.cfg;
  const auto& block = *tape.block;
  require_dims(d_out.size(), cfg.d_value, "memory_backward upstream");
  const Index r = cfg.sqrt_n();
  const Index dk = cfg.d_key;

  MemoryBackward<Scalar> out;
  auto& g = out.grads;
  g.key_row = Matrix<Scalar>::Zero(r, dk);
  g.key_col = Matrix<Scalar>::Zero(r, dk);
  g.theta_row = Matrix<Scalar>::Zero(dk, dk);
  g.theta_col = Matrix<Scalar>::Zero(dk, dk);
  g.ln_q_gamma = Vector<Scalar>::Zero(dk);
  g.ln_q_beta = Vector<Scalar>::Zero(dk);
  g.ln_k_gamma = Vector<Scalar>::Zero(dk);
  g.ln_k_beta = Vector<Scalar>::Zero(dk);

  const auto& res = tape.result;
  GatherPlan<Scalar> plan{res.flat_indices, res.weights};
  auto gathered = fused_gather_backward(plan, *tape.values, d_out);
  g.values = std::move(gathered.d_values);

  std::vector<double> weights(res.weights.begin(), res.weights.end());
  std::vector<double> d_weights(gathered.d_weights.begin(), gathered.d_weights.end());
  const auto d_pair = grad_pair_weights(res.raw_scores, weights, d_weights, cfg.weight_mode);

  std::vector<double> d_row(static_cast<std::size_t>(r), 0.0);
  std::vector<double> d_col(static_cast<std::size_t>(r), 0.0);
  for (std::size_t t = 0; t < res.pairs.size(); ++t) {
    d_row[static_cast<std::size_t>(res.pairs[t].row)] += d_pair[t];
    d_col[static_cast<std::size_t>(res.pairs[t].col)] += d_pair[t];
  }

  Vector<Scalar> dq_row = detail::subkey_backward(d_row, tape.q.row, block.key_row, block.theta_row, tape.row_keys,
                                                  cfg, block.ln_k, g.key_row, g.theta_row, g.ln_k_gamma, g.ln_k_beta);
  Vector<Scalar> dq_col = detail::subkey_backward(d_col, tape.q.col, block.key_col, block.theta_col, tape.col_keys,
                                                  cfg, block.ln_k, g.key_col, g.theta_col, g.ln_k_gamma, g.ln_k_beta);
  if (cfg.layernorm_qk) {
    const auto gr = grad_layernorm(tape.query.ln_row, block.ln_q, dq_row);
    const auto gc = grad_layernorm(tape.query.ln_col, block.ln_q, dq_col);
    dq_row = gr.d_input;
    dq_col = gc.d_input;
    g.ln_q_gamma = gr.d_gamma + gc.d_gamma;
    g.ln_q_beta = gr.d_beta + gc.d_beta;
  }
  Vector<Scalar> dq(2 * dk);
  dq << dq_row, dq_col;
  auto lin = grad_matvec(block.query_weight, tape.x_in, dq);
  g.query_weight = std::move(lin.d_matrix);
  g.query_bias = dq;
  out.d_input = std::move(lin.d_vector);
  return out;
}

// ---------------------------------------------------------------------------
// Memory-gated fusion

inline double gate_value(GatingFn fn, double v) {
  switch (fn) {
    case GatingFn::kTanh:
      return std::tanh(v);
    case GatingFn::kSigmoid:
      return sigmoid(v);
    case GatingFn::kIdentity:
      return v;
  }
  return v;
}

inline double gate_derivative(GatingFn fn, double v) {
  switch (fn) {
    case GatingFn::kTanh: {
      const double t = std::tanh(v);
      return 1.0 - t * t;
    }
    case GatingFn::kSigmoid: {
      const double s = sigmoid(v);
      return s * (1.0 - s);
    }
    case GatingFn::kIdentity:
      return 1.0;
  }
  return 1.0;
}

/// x_in * g(v_o), elementwise.
template <typename Scalar>
Vector<Scalar> memory_gate(const Vector<Scalar>& x_in, const Vector<Scalar>& v_o, GatingFn fn) {
  require_dims(v_o.size(), x_in.size(), "memory_gate");
  Vector<Scalar> out(x_in.size());
  for (Index i = 0; i < x_in.size(); ++i)
    out[i] = static_cast<Scalar>(static_cast<double>(x_in[i]) * gate_value(fn, static_cast<double>(v_o[i])));
  return out;
}

template <typename Scalar>
struct GateGrad {
  Vector<Scalar> d_input;
  Vector<Scalar> d_memory;
};

template <typename Scalar>
GateGrad<Scalar> grad_memory_gate(const Vector<Scalar>& x_in, const Vector<Scalar>& v_o, GatingFn fn,
                                  const Vector<Scalar>& d_out) {
  require_dims(v_o.size(), x_in.size(), "grad_memory_gate");
  require_dims(d_out.size(), x_in.size(), "grad_memory_gate upstream");
  GateGrad<Scalar> g{Vector<Scalar>(x_in.size()), Vector<Scalar>(x_in.size())};
  for (Index i = 0; i < x_in.size(); ++i) {
    const double v = static_cast<double>(v_o[i]);
    const double up = static_cast<double>(d_out[i]);
    g.d_input[i] = static_cast<Scalar>(up * gate_value(fn, v));
    g.d_memory[i] = static_cast<Scalar>(up * static_cast<double>(x_in[i]) * gate_derivative(fn, v));
  }
  return g;
}

}  // namespace msn
