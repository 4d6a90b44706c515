// Dense primitives shared by every layer: row-major matrix/vector aliases,
// linear maps, layer normalization and elementwise activations, each with an
// analytic backward pass.
//
// All reductions accumulate in double regardless of the storage scalar.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <type_traits>

#include <Eigen/Dense>

namespace msn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using MatrixXf = Matrix<float>;
using VectorXf = Vector<float>;

using Index = Eigen::Index;

/// Raised when an operation's preconditions (shapes, ranges, config
/// invariants) do not hold.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require(bool ok, const char* what) {
  if (!ok) throw ContractError(what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

/// Builds the message only on failure; for checks on hot paths.
template <typename MakeMessage>
  requires std::is_invocable_r_v<std::string, MakeMessage>
void require(bool ok, MakeMessage&& make_message) {
  if (!ok) throw ContractError(make_message());
}

inline void require_dims(Index got, Index want, const char* what) {
  if (got != want) {
    throw ContractError(std::string(what) + ": dimension mismatch (got " + std::to_string(got) +
                        ", expected " + std::to_string(want) + ")");
  }
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j)
      if (!std::isfinite(static_cast<double>(x(i, j)))) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Linear maps

/// out[i] = sum_j M[i,j] * v[j]
template <typename Scalar>
Vector<Scalar> matvec(const Matrix<Scalar>& m, const Vector<Scalar>& v) {
  require_dims(v.size(), m.cols(), "matvec");
  Vector<Scalar> out(m.rows());
  for (Index i = 0; i < m.rows(); ++i) {
    double acc = 0.0;
    for (Index j = 0; j < m.cols(); ++j) acc += static_cast<double>(m(i, j)) * static_cast<double>(v[j]);
    out[i] = static_cast<Scalar>(acc);
  }
  return out;
}

/// out[j] = sum_i v[i] * M[i,j]  (row vector times matrix, x W)
template <typename Scalar>
Vector<Scalar> vecmat(const Vector<Scalar>& v, const Matrix<Scalar>& m) {
  require_dims(v.size(), m.rows(), "vecmat");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    const double vi = static_cast<double>(v[i]);
    for (Index j = 0; j < m.cols(); ++j) acc[j] += vi * static_cast<double>(m(i, j));
  }
  return acc.cast<Scalar>();
}

template <typename Scalar>
double dot(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  require_dims(b.size(), a.size(), "dot");
  double acc = 0.0;
  for (Index i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

template <typename Scalar>
struct MatvecGrad {
  Matrix<Scalar> d_matrix;
  Vector<Scalar> d_vector;
};

/// Backward of matvec: dM = outer(d_out, v), dv = M^T d_out.
template <typename Scalar>
MatvecGrad<Scalar> grad_matvec(const Matrix<Scalar>& m, const Vector<Scalar>& v, const Vector<Scalar>& d_out) {
  require_dims(v.size(), m.cols(), "grad_matvec");
  require_dims(d_out.size(), m.rows(), "grad_matvec upstream");
  MatvecGrad<Scalar> g;
  g.d_matrix.resize(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) g.d_matrix(i, j) = static_cast<Scalar>(static_cast<double>(d_out[i]) * v[j]);
  g.d_vector = vecmat(d_out, m);
  return g;
}

/// Backward of vecmat: dM = outer(v, d_out), dv = M d_out.
template <typename Scalar>
MatvecGrad<Scalar> grad_vecmat(const Vector<Scalar>& v, const Matrix<Scalar>& m, const Vector<Scalar>& d_out) {
  require_dims(v.size(), m.rows(), "grad_vecmat");
  require_dims(d_out.size(), m.cols(), "grad_vecmat upstream");
  MatvecGrad<Scalar> g;
  g.d_matrix.resize(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) g.d_matrix(i, j) = static_cast<Scalar>(static_cast<double>(v[i]) * d_out[j]);
  g.d_vector = matvec(m, d_out);
  return g;
}

// ---------------------------------------------------------------------------
// Layer normalization

template <typename Scalar>
struct LayerNormParams {
  Vector<Scalar> gamma;
  Vector<Scalar> beta;
  double epsilon = 1e-5;
  bool affine = true;  // when false gamma/beta stay at 1/0 and receive no gradient

  static LayerNormParams identity(Index dim, bool affine = true, double epsilon = 1e-5) {
    return {Vector<Scalar>::Ones(dim), Vector<Scalar>::Zero(dim), epsilon, affine};
  }
  Index dim() const { return gamma.size(); }
};

/// Forward record needed by the backward pass.
template <typename Scalar>
struct LayerNormCache {
  Eigen::VectorXd normalized;  // (x - mean) / sqrt(var + eps)
  double inv_std = 0.0;
};

template <typename Scalar>
Vector<Scalar> layernorm(const Vector<Scalar>& x, const LayerNormParams<Scalar>& p, LayerNormCache<Scalar>* cache = nullptr) {
  require_dims(x.size(), p.gamma.size(), "layernorm");
  require_dims(p.beta.size(), p.gamma.size(), "layernorm beta");
  require(p.epsilon > 0.0, "layernorm: epsilon must be positive");
  const Index n = x.size();
  double mean = 0.0;
  for (Index i = 0; i < n; ++i) mean += static_cast<double>(x[i]);
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double c = static_cast<double>(x[i]) - mean;
    var += c * c;
  }
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + p.epsilon);

  Eigen::VectorXd xhat(n);
  Vector<Scalar> out(n);
  for (Index i = 0; i < n; ++i) {
    xhat[i] = (static_cast<double>(x[i]) - mean) * inv_std;
    out[i] = static_cast<Scalar>(static_cast<double>(p.gamma[i]) * xhat[i] + static_cast<double>(p.beta[i]));
  }
  if (cache != nullptr) {
    cache->normalized = std::move(xhat);
    cache->inv_std = inv_std;
  }
  return out;
}

template <typename Scalar>
struct LayerNormGrad {
  Vector<Scalar> d_input;
  Vector<Scalar> d_gamma;
  Vector<Scalar> d_beta;
};

template <typename Scalar>
LayerNormGrad<Scalar> grad_layernorm(const LayerNormCache<Scalar>& cache, const LayerNormParams<Scalar>& p,
                                     const Vector<Scalar>& d_out) {
  const Index n = cache.normalized.size();
  require_dims(d_out.size(), n, "grad_layernorm");
  LayerNormGrad<Scalar> g;
  g.d_gamma = Vector<Scalar>::Zero(n);
  g.d_beta = Vector<Scalar>::Zero(n);
  // g_i = d_out_i * gamma_i; dx = inv_std * (g - mean(g) - xhat * mean(g * xhat))
  double mean_g = 0.0;
  double mean_gx = 0.0;
  Eigen::VectorXd scaled(n);
  for (Index i = 0; i < n; ++i) {
    scaled[i] = static_cast<double>(d_out[i]) * static_cast<double>(p.gamma[i]);
    mean_g += scaled[i];
    mean_gx += scaled[i] * cache.normalized[i];
    if (p.affine) {
      g.d_gamma[i] = static_cast<Scalar>(static_cast<double>(d_out[i]) * cache.normalized[i]);
      g.d_beta[i] = d_out[i];
    }
  }
  mean_g /= static_cast<double>(n);
  mean_gx /= static_cast<double>(n);
  g.d_input.resize(n);
  for (Index i = 0; i < n; ++i)
    g.d_input[i] = static_cast<Scalar>(cache.inv_std * (scaled[i] - mean_g - cache.normalized[i] * mean_gx));
  return g;
}

// ---------------------------------------------------------------------------
// Elementwise activations

enum class Activation { kRelu, kGelu, kTanh, kSigmoid, kIdentity };

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::kRelu:
      return x > 0.0 ? x : 0.0;
    case Activation::kGelu:  // tanh approximation
      return 0.5 * x * (1.0 + std::tanh(0.7978845608028654 * (x + 0.044715 * x * x * x)));
    case Activation::kTanh:
      return std::tanh(x);
    case Activation::kSigmoid:
      return sigmoid(x);
    case Activation::kIdentity:
      return x;
  }
  return x;
}

/// Derivative of `activate(a, .)` evaluated at the pre-activation x.
inline double activate_derivative(Activation a, double x) {
  switch (a) {
    case Activation::kRelu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::kGelu: {
      constexpr double c = 0.7978845608028654;
      const double u = c * (x + 0.044715 * x * x * x);
      const double t = std::tanh(u);
      return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x);
    }
    case Activation::kTanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::kSigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case Activation::kIdentity:
      return 1.0;
  }
  return 1.0;
}

template <typename Scalar>
Vector<Scalar> activate(Activation a, const Vector<Scalar>& x) {
  Vector<Scalar> out(x.size());
  for (Index i = 0; i < x.size(); ++i) out[i] = static_cast<Scalar>(activate(a, static_cast<double>(x[i])));
  return out;
}

}  // namespace msn
