// Dense control blocks: the two-layer FFN  phi(x W_in + b) W_out  and a
// sparse mixture of such FFNs with a linear top-k router.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "msn/kernels.hpp"
#include "msn/numerics.hpp"

namespace msn {

template <typename Scalar>
struct Ffn2 {
  Matrix<Scalar> w_in;   // d_in x d_mid
  Vector<Scalar> bias;   // d_mid
  Matrix<Scalar> w_out;  // d_mid x d_out
  Activation activation = Activation::kRelu;

  Index d_in() const { return w_in.rows(); }
  Index d_mid() const { return w_in.cols(); }
  Index d_out() const { return w_out.cols(); }

  void check() const {
    require_dims(bias.size(), w_in.cols(), "ffn bias");
    require_dims(w_out.rows(), w_in.cols(), "ffn w_out rows");
  }

  static std::int64_t param_count(Index d_in, Index d_mid, Index d_out) {
    return static_cast<std::int64_t>(d_in) * d_mid + d_mid + static_cast<std::int64_t>(d_mid) * d_out;
  }
};

template <typename Scalar>
Ffn2<Scalar> init_ffn(Index d_in, Index d_mid, Index d_out, std::mt19937_64& rng,
                      Activation activation = Activation::kRelu, double out_scale = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Ffn2<Scalar> f;
  f.activation = activation;
  const double s_in = std::sqrt(2.0 / static_cast<double>(d_in));
  const double s_out = out_scale / std::sqrt(static_cast<double>(d_mid));
  f.w_in.resize(d_in, d_mid);
  for (Index i = 0; i < d_in; ++i)
    for (Index j = 0; j < d_mid; ++j) f.w_in(i, j) = static_cast<Scalar>(s_in * normal(rng));
  f.bias = Vector<Scalar>::Zero(d_mid);
  f.w_out.resize(d_mid, d_out);
  for (Index i = 0; i < d_mid; ++i)
    for (Index j = 0; j < d_out; ++j) f.w_out(i, j) = static_cast<Scalar>(s_out * normal(rng));
  return f;
}

template <typename Scalar>
struct FfnTape {
  Vector<Scalar> x;
  Vector<Scalar> pre;     // x W_in + b
  Vector<Scalar> hidden;  // phi(pre)
};

template <typename Scalar>
Vector<Scalar> ffn_forward(const Vector<Scalar>& x, const Ffn2<Scalar>& f, FfnTape<Scalar>* tape = nullptr) {
  require_dims(x.size(), f.d_in(), "ffn_forward input");
  Vector<Scalar> pre = vecmat(x, f.w_in) + f.bias;
  Vector<Scalar> hidden = activate(f.activation, pre);
  Vector<Scalar> out = vecmat(hidden, f.w_out);
  if (tape != nullptr) {
    tape->x = x;
    tape->pre = std::move(pre);
    tape->hidden = std::move(hidden);
  }
  return out;
}

template <typename Scalar>
struct FfnGrad {
  Matrix<Scalar> w_in;
  Vector<Scalar> bias;
  Matrix<Scalar> w_out;
  Vector<Scalar> d_input;

  static FfnGrad zeros(const Ffn2<Scalar>& f) {
    return {Matrix<Scalar>::Zero(f.w_in.rows(), f.w_in.cols()), Vector<Scalar>::Zero(f.bias.size()),
            Matrix<Scalar>::Zero(f.w_out.rows(), f.w_out.cols()), Vector<Scalar>::Zero(f.d_in())};
  }
};

template <typename Scalar>
FfnGrad<Scalar> ffn_backward(const Ffn2<Scalar>& f, const FfnTape<Scalar>& tape, const Vector<Scalar>& d_out) {
  require_dims(d_out.size(), f.d_out(), "ffn_backward upstream");
  require_dims(tape.pre.size(), f.d_mid(), "ffn_backward tape");
  FfnGrad<Scalar> g;
  auto out_grad = grad_vecmat(tape.hidden, f.w_out, d_out);
  g.w_out = std::move(out_grad.d_matrix);
  Vector<Scalar> d_pre(f.d_mid());
  for (Index i = 0; i < f.d_mid(); ++i)
    d_pre[i] = static_cast<Scalar>(static_cast<double>(out_grad.d_vector[i]) *
                                   activate_derivative(f.activation, static_cast<double>(tape.pre[i])));
  auto in_grad = grad_vecmat(tape.x, f.w_in, d_pre);
  g.w_in = std::move(in_grad.d_matrix);
  g.bias = d_pre;
  g.d_input = std::move(in_grad.d_vector);
  return g;
}

// ---------------------------------------------------------------------------
// Sparse mixture of experts

template <typename Scalar>
struct SmoeBlock {
  std::vector<Ffn2<Scalar>> experts;
  Matrix<Scalar> router;  // N x d_in
  Index active_k = 1;

  Index num_experts() const { return static_cast<Index>(experts.size()); }

  void check() const {
    require(!experts.empty(), "smoe: no experts");
    require(active_k >= 1 && active_k <= num_experts(), "smoe: active_k must satisfy 1 <= active_k <= N");
    require_dims(router.rows(), num_experts(), "smoe router rows");
    for (const auto& e : experts) {
      e.check();
      require(e.d_in() == experts.front().d_in() && e.d_mid() == experts.front().d_mid() &&
                  e.d_out() == experts.front().d_out(),
              "smoe: experts must share dims");
    }
    require_dims(router.cols(), experts.front().d_in(), "smoe router cols");
  }

  static std::int64_t total_param_count(Index n_experts, Index d_in, Index d_mid, Index d_out) {
    return n_experts * Ffn2<Scalar>::param_count(d_in, d_mid, d_out) + static_cast<std::int64_t>(d_in) * n_experts;
  }
  static std::int64_t activated_param_count(Index n_experts, Index active_k, Index d_in, Index d_mid, Index d_out) {
    return active_k * Ffn2<Scalar>::param_count(d_in, d_mid, d_out) + static_cast<std::int64_t>(d_in) * n_experts;
  }
};

template <typename Scalar>
SmoeBlock<Scalar> init_smoe(Index n_experts, Index active_k, Index d_in, Index d_mid, Index d_out,
                            std::mt19937_64& rng, Activation activation = Activation::kRelu,
                            double out_scale = 1.0) {
  SmoeBlock<Scalar> s;
  s.active_k = active_k;
  for (Index e = 0; e < n_experts; ++e) s.experts.push_back(init_ffn<Scalar>(d_in, d_mid, d_out, rng, activation, out_scale));
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d_in)));
  s.router.resize(n_experts, d_in);
  for (Index i = 0; i < n_experts; ++i)
    for (Index j = 0; j < d_in; ++j) s.router(i, j) = static_cast<Scalar>(normal(rng));
  s.check();
  return s;
}

template <typename Scalar>
struct SmoeTape {
  Vector<Scalar> x;
  std::vector<Index> selected;  // expert ids, best router score first
  std::vector<double> gates;    // softmax over the selected router scores
  std::vector<FfnTape<Scalar>> expert_tapes;
  std::vector<Vector<Scalar>> expert_outputs;
};

template <typename Scalar>
Vector<Scalar> smoe_forward(const Vector<Scalar>& x, const SmoeBlock<Scalar>& s, SmoeTape<Scalar>* tape = nullptr) {
  s.check();
  require_dims(x.size(), s.router.cols(), "smoe_forward input");
  const Vector<Scalar> scores = matvec(s.router, x);
  const auto top = partial_topk<Scalar>(scores, s.active_k);
  std::vector<double> gates(top.indices.size());
  double z = 0.0;
  for (std::size_t t = 0; t < gates.size(); ++t) z += (gates[t] = std::exp(static_cast<double>(top.scores[t] - top.scores[0])));
  for (double& g : gates) g /= z;

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(s.experts.front().d_out());
  SmoeTape<Scalar> local;
  for (std::size_t t = 0; t < top.indices.size(); ++t) {
    FfnTape<Scalar> et;
    auto y = ffn_forward(x, s.experts[static_cast<std::size_t>(top.indices[t])], &et);
    acc += gates[t] * y.template cast<double>();
    local.expert_tapes.push_back(std::move(et));
    local.expert_outputs.push_back(std::move(y));
  }
  if (tape != nullptr) {
    local.x = x;
    local.selected = top.indices;
    local.gates = std::move(gates);
    *tape = std::move(local);
  }
  return acc.cast<Scalar>();
}

template <typename Scalar>
struct SmoeGrad {
  std::vector<FfnGrad<Scalar>> experts;  // unselected experts hold exact zeros
  Matrix<Scalar> router;
  Vector<Scalar> d_input;
};

template <typename Scalar>
SmoeGrad<Scalar> smoe_backward(const SmoeBlock<Scalar>& s, const SmoeTape<Scalar>& tape, const Vector<Scalar>& d_out) {
  require(tape.selected.size() == tape.expert_tapes.size() && !tape.selected.empty(), "smoe_backward: tape mismatch");
  require_dims(d_out.size(), s.experts.front().d_out(), "smoe_backward upstream");
  SmoeGrad<Scalar> g;
  for (const auto& e : s.experts) g.experts.push_back(FfnGrad<Scalar>::zeros(e));
  g.router = Matrix<Scalar>::Zero(s.router.rows(), s.router.cols());
  Eigen::VectorXd d_x = Eigen::VectorXd::Zero(tape.x.size());

  std::vector<double> d_gates(tape.selected.size());
  double mix = 0.0;
  for (std::size_t t = 0; t < tape.selected.size(); ++t) {
    const auto e = static_cast<std::size_t>(tape.selected[t]);
    d_gates[t] = dot(tape.expert_outputs[t], d_out);
    mix += tape.gates[t] * d_gates[t];
    const Vector<Scalar> d_expert = (tape.gates[t] * d_out.template cast<double>()).template cast<Scalar>();
    auto eg = ffn_backward(s.experts[e], tape.expert_tapes[t], d_expert);
    d_x += eg.d_input.template cast<double>();
    g.experts[e] = std::move(eg);
  }
  for (std::size_t t = 0; t < tape.selected.size(); ++t) {
    const Index e = tape.selected[t];
    const double d_score = tape.gates[t] * (d_gates[t] - mix);
    for (Index j = 0; j < tape.x.size(); ++j) {
      g.router(e, j) = static_cast<Scalar>(d_score * static_cast<double>(tape.x[j]));
      d_x[j] += d_score * static_cast<double>(s.router(e, j));
    }
  }
  for (auto& eg : g.experts) eg.d_input.resize(0);
  g.d_input = d_x.cast<Scalar>();
  return g;
}

}  // namespace msn
