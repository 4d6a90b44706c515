// Retrieval kernels: partial top-k selection for small k over moderate
// candidate counts, and the fused sparse gather (gather + weighted sum, and
// its scatter-form backward) over a value table.
//
// Tie rule everywhere: among equal scores the lower candidate index ranks
// first. Scores must be free of NaN.
#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "msn/numerics.hpp"

namespace msn {

template <typename Scalar>
struct TopKResult {
  std::vector<Index> indices;  // candidate positions, best first
  std::vector<Scalar> scores;  // non-increasing
};

enum class TopKStrategy {
  kAuto,    // heap when k is small relative to m, partition-select otherwise
  kHeap,    // bounded min-heap of size k, one pass
  kSelect,  // nth_element partition, then sort the k survivors
};

namespace detail {

// True when candidate a ranks strictly ahead of candidate b.
template <typename Scalar>
struct RanksAhead {
  const Scalar* scores;
  bool operator()(Index a, Index b) const {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  }
};

}  // namespace detail

/// Returns the k best entries of `scores` in rank order. Expected work is
/// O(m + k log k) for the select path and O(m log k) worst case for the heap
/// path, which only touches the heap when a candidate beats the current k-th.
template <typename Scalar, typename Derived>
TopKResult<Scalar> partial_topk(const Eigen::DenseBase<Derived>& scores, Index k,
                                TopKStrategy strategy = TopKStrategy::kAuto) {
  const Index m = scores.size();
  require(k >= 1 && k <= m, [&] {
    return "partial_topk: k must satisfy 1 <= k <= m (k=" + std::to_string(k) + ", m=" + std::to_string(m) + ")";
  });
  // Contiguous view of the scores; most callers already pass a plain vector.
  const Vector<Scalar> owned = scores.derived().template cast<Scalar>();
  const Scalar* s = owned.data();
  const detail::RanksAhead<Scalar> ahead{s};

  if (strategy == TopKStrategy::kAuto) strategy = (k * 8 <= m) ? TopKStrategy::kHeap : TopKStrategy::kSelect;

  std::vector<Index> picked;
  if (strategy == TopKStrategy::kHeap) {
    // Heap front holds the weakest survivor. Candidates arrive in index
    // order, so an equal score never displaces an earlier index.
    picked.resize(static_cast<std::size_t>(k));
    std::iota(picked.begin(), picked.end(), Index{0});
    std::make_heap(picked.begin(), picked.end(), ahead);
    for (Index i = k; i < m; ++i) {
      if (s[i] > s[picked.front()]) {
        std::pop_heap(picked.begin(), picked.end(), ahead);
        picked.back() = i;
        std::push_heap(picked.begin(), picked.end(), ahead);
      }
    }
  } else {
    picked.resize(static_cast<std::size_t>(m));
    std::iota(picked.begin(), picked.end(), Index{0});
    if (k < m) std::nth_element(picked.begin(), picked.begin() + (k - 1), picked.end(), ahead);
    picked.resize(static_cast<std::size_t>(k));
  }
  std::sort(picked.begin(), picked.end(), ahead);

  TopKResult<Scalar> out;
  out.indices = std::move(picked);
  out.scores.reserve(out.indices.size());
  for (Index i : out.indices) out.scores.push_back(s[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Fused sparse gather

template <typename Scalar>
struct GatherPlan {
  std::vector<Index> indices;
  std::vector<Scalar> weights;
};

/// Scatter-form gradient: one gradient row per gathered index.
template <typename Scalar>
struct SparseRows {
  std::vector<Index> rows;
  Matrix<Scalar> grads;  // rows.size() x value dim

  /// Materializes the n x d dense gradient (tests and small tables only).
  Matrix<Scalar> dense(Index n) const {
    Matrix<Scalar> out = Matrix<Scalar>::Zero(n, grads.cols());
    for (std::size_t t = 0; t < rows.size(); ++t) out.row(rows[t]) += grads.row(static_cast<Index>(t));
    return out;
  }
};

template <typename Scalar>
struct GatherBackward {
  SparseRows<Scalar> d_values;
  std::vector<Scalar> d_weights;
};

template <typename Scalar, typename Table>
void check_plan(const GatherPlan<Scalar>& plan, const Table& table) {
  require(plan.indices.size() == plan.weights.size(), "gather plan: indices/weights length mismatch");
  for (Index i : plan.indices)
    require(i >= 0 && i < table.rows(), [&] {
      return "gather plan: index " + std::to_string(i) + " out of bounds for table with " +
             std::to_string(table.rows()) + " rows";
    });
}

/// sum_t weights[t] * table.row(indices[t]); each selected row is read once.
/// `Table` needs rows(), cols() and row(i) returning an indexable row.
template <typename Scalar, typename Table>
Vector<Scalar> fused_gather_sum(const GatherPlan<Scalar>& plan, const Table& table) {
  check_plan(plan, table);
  const Index d = table.cols();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
  for (std::size_t t = 0; t < plan.indices.size(); ++t) {
    const auto row = table.row(plan.indices[t]);
    const double w = static_cast<double>(plan.weights[t]);
    for (Index j = 0; j < d; ++j) acc[j] += w * static_cast<double>(row(j));
  }
  return acc.cast<Scalar>();
}

/// Backward of fused_gather_sum in one pass over the gathered rows:
/// d_values[indices[t]] = weights[t] * d_out and d_weights[t] = <row_t, d_out>.
template <typename Scalar, typename Table>
GatherBackward<Scalar> fused_gather_backward(const GatherPlan<Scalar>& plan, const Table& table,
                                             const Vector<Scalar>& d_out) {
  check_plan(plan, table);
  const Index d = table.cols();
  require_dims(d_out.size(), d, "fused_gather_backward");
  const Index k = static_cast<Index>(plan.indices.size());
  GatherBackward<Scalar> g;
  g.d_values.rows = plan.indices;
  g.d_values.grads.resize(k, d);
  g.d_weights.resize(plan.indices.size());
  for (Index t = 0; t < k; ++t) {
    const auto row = table.row(plan.indices[static_cast<std::size_t>(t)]);
    const double w = static_cast<double>(plan.weights[static_cast<std::size_t>(t)]);
    double acc = 0.0;
    for (Index j = 0; j < d; ++j) {
      const double up = static_cast<double>(d_out[j]);
      acc += static_cast<double>(row(j)) * up;
      g.d_values.grads(t, j) = static_cast<Scalar>(w * up);
    }
    g.d_weights[static_cast<std::size_t>(t)] = static_cast<Scalar>(acc);
  }
  return g;
}

}  // namespace msn
