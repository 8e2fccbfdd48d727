#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rng.hpp"

namespace lattice_bert {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct NamedTensor {
  std::string name;
  Matrix<Scalar>* tensor;
};

template <typename Scalar>
Matrix<Scalar> gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(rng.normal(0.0, stddev));
  return m;
}

// Row-wise softmax, stable under large logits.
template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Scalar mx = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

// Given probabilities A and dL/dA, returns dL/dlogits.
template <typename Scalar>
Matrix<Scalar> softmax_rows_backward(const Matrix<Scalar>& probs, const Matrix<Scalar>& d_probs) {
  Matrix<Scalar> out = d_probs;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const Scalar dot = probs.row(i).dot(d_probs.row(i));
    out.row(i) = probs.row(i).array() * (d_probs.row(i).array() - dot);
  }
  return out;
}

template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) * std::numbers::inv_sqrtpi_v<Scalar> / std::numbers::sqrt2_v<Scalar>;
  return cdf + x * pdf;
}

template <typename Scalar>
Matrix<Scalar> gelu(const Matrix<Scalar>& x) {
  return x.unaryExpr([](Scalar v) { return gelu(v); });
}

// Per-row layer normalization; keeps what the backward pass needs.
template <typename Scalar>
struct LayerNormCache {
  Matrix<Scalar> normalized;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std;
};

inline constexpr double kLayerNormEps = 1e-12;

template <typename Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& x, const Matrix<Scalar>& gain, const Matrix<Scalar>& bias,
                          LayerNormCache<Scalar>* cache) {
  const auto d = static_cast<Scalar>(x.cols());
  Matrix<Scalar> xhat(x.rows(), x.cols());
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Scalar mean = x.row(i).sum() / d;
    const auto centered = (x.row(i).array() - mean).matrix();
    const Scalar var = centered.squaredNorm() / d;
    inv_std(i) = Scalar(1) / std::sqrt(var + Scalar(kLayerNormEps));
    xhat.row(i) = centered * inv_std(i);
  }
  Matrix<Scalar> y = (xhat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
  if (cache) *cache = {std::move(xhat), std::move(inv_std)};
  return y;
}

// Returns dL/dx and accumulates dL/dgain, dL/dbias.
template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const Matrix<Scalar>& dy, const Matrix<Scalar>& gain, const LayerNormCache<Scalar>& cache,
                                   Matrix<Scalar>* d_gain, Matrix<Scalar>* d_bias) {
  const auto& xhat = cache.normalized;
  if (d_gain) *d_gain += (dy.array() * xhat.array()).colwise().sum().matrix();
  if (d_bias) *d_bias += dy.colwise().sum();
  Matrix<Scalar> dxhat = dy.array().rowwise() * gain.row(0).array();
  Matrix<Scalar> dx(dy.rows(), dy.cols());
  const auto d = static_cast<Scalar>(dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const Scalar mean_d = dxhat.row(i).sum() / d;
    const Scalar mean_dx = dxhat.row(i).dot(xhat.row(i)) / d;
    dx.row(i) = ((dxhat.row(i).array() - mean_d) - xhat.row(i).array() * mean_dx) * cache.inv_std(i);
  }
  return dx;
}

// Inverted dropout mask: entries are 0 or 1/(1-p). Empty when p == 0.
template <typename Scalar>
Matrix<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  if (p <= 0.0) return {};
  Matrix<Scalar> m(rows, cols);
  const Scalar keep = static_cast<Scalar>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < p ? Scalar(0) : keep;
  return m;
}

template <typename Scalar>
void apply_mask(Matrix<Scalar>& x, const Matrix<Scalar>& mask) {
  if (mask.size() != 0) x.array() *= mask.array();
}

}  // namespace lattice_bert
