#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "config.hpp"
#include "errors.hpp"
#include "position.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace lattice_bert {

enum class Direction : std::uint8_t { ss = 0, se = 1, es = 2, ee = 3 };
inline constexpr std::array<const char*, 4> kDirectionNames{"ss", "se", "es", "ee"};

// Lattice position attention parameters. One copy feeds every encoder
// layer; everything except the start/end embeddings is per head.
template <typename Scalar = double>
struct LpaParams {
  Matrix<Scalar> p_s;  // (l_max, d_e) start-position embeddings
  Matrix<Scalar> p_e;  // (l_max, d_e) end-position embeddings
  std::vector<Matrix<Scalar>> w_q;  // per head (2 d_e, d_k)
  std::vector<Matrix<Scalar>> w_k;
  std::vector<std::array<Matrix<Scalar>, 4>> b;  // per head and direction (1, 257)
  std::vector<Matrix<Scalar>> r;                 // per head (1, 7)
  std::vector<Matrix<Scalar>> cls_q;             // per head (1, 1)
  std::vector<Matrix<Scalar>> cls_k;

  int n_heads() const { return static_cast<int>(w_q.size()); }
  int l_max() const { return static_cast<int>(p_s.rows()); }
  int d_embed() const { return static_cast<int>(p_s.cols()); }
  int d_head() const { return w_q.empty() ? 0 : static_cast<int>(w_q.front().cols()); }

  // Distance and relation scalars: n_heads * (4 * 257 + 7).
  std::size_t bias_parameter_count() const {
    std::size_t n = 0;
    for (const auto& tables : b)
      for (const auto& t : tables) n += static_cast<std::size_t>(t.size());
    for (const auto& t : r) n += static_cast<std::size_t>(t.size());
    return n;
  }

  static LpaParams zeros(const EncoderConfig& cfg) {
    LpaParams p;
    const int d_k = cfg.d_head();
    p.p_s = Matrix<Scalar>::Zero(cfg.l_max, cfg.d_embed);
    p.p_e = Matrix<Scalar>::Zero(cfg.l_max, cfg.d_embed);
    for (int h = 0; h < cfg.n_heads; ++h) {
      p.w_q.push_back(Matrix<Scalar>::Zero(2 * cfg.d_embed, d_k));
      p.w_k.push_back(Matrix<Scalar>::Zero(2 * cfg.d_embed, d_k));
      std::array<Matrix<Scalar>, 4> tables;
      for (auto& t : tables) t = Matrix<Scalar>::Zero(1, static_cast<Eigen::Index>(kDistanceBuckets));
      p.b.push_back(std::move(tables));
      p.r.push_back(Matrix<Scalar>::Zero(1, static_cast<Eigen::Index>(kNumRelations)));
      p.cls_q.push_back(Matrix<Scalar>::Zero(1, 1));
      p.cls_k.push_back(Matrix<Scalar>::Zero(1, 1));
    }
    return p;
  }

  // Checkpoint names: p_s, p_e, w_q.<h>, w_k.<h>, b.<h>.<dir>, r.<h>, cls_q.<h>, cls_k.<h>.
  std::vector<NamedTensor<Scalar>> tensors(const std::string& prefix = "") {
    std::vector<NamedTensor<Scalar>> out;
    out.push_back({prefix + "p_s", &p_s});
    out.push_back({prefix + "p_e", &p_e});
    for (int h = 0; h < n_heads(); ++h) {
      const auto hs = std::to_string(h);
      out.push_back({prefix + "w_q." + hs, &w_q[h]});
      out.push_back({prefix + "w_k." + hs, &w_k[h]});
      for (std::size_t d = 0; d < 4; ++d) out.push_back({prefix + "b." + hs + "." + kDirectionNames[d], &b[h][d]});
      out.push_back({prefix + "r." + hs, &r[h]});
      out.push_back({prefix + "cls_q." + hs, &cls_q[h]});
      out.push_back({prefix + "cls_k." + hs, &cls_k[h]});
    }
    return out;
  }
};

// Embeddings and projections ~ N(0, 0.02^2); distance, relation and reset
// scalars start at zero so the positional terms begin as pure att_ij.
template <typename Scalar = double>
LpaParams<Scalar> init_params(const EncoderConfig& cfg, Rng& rng) {
  auto p = LpaParams<Scalar>::zeros(cfg);
  p.p_s = gaussian<Scalar>(cfg.l_max, cfg.d_embed, 0.02, rng);
  p.p_e = gaussian<Scalar>(cfg.l_max, cfg.d_embed, 0.02, rng);
  for (int h = 0; h < cfg.n_heads; ++h) {
    p.w_q[h] = gaussian<Scalar>(2 * cfg.d_embed, cfg.d_head(), 0.02, rng);
    p.w_k[h] = gaussian<Scalar>(2 * cfg.d_embed, cfg.d_head(), 0.02, rng);
  }
  return p;
}

// Per-input geometry shared by all heads and layers: clipped-distance
// buckets and relation codes for every ordered token pair. Pairs involving
// the [CLS] row or column are left at zero; the reset overrides them.
struct LatticeGeometry {
  std::size_t n = 0;
  std::vector<std::int32_t> starts;
  std::vector<std::int32_t> ends;
  int cls_index = -1;
  std::vector<std::array<std::uint16_t, 4>> buckets;  // row-major n x n
  std::vector<std::uint8_t> relations;

  std::size_t at(std::size_t i, std::size_t j) const { return i * n + j; }
};

inline LatticeGeometry make_geometry(std::span<const std::int32_t> starts, std::span<const std::int32_t> ends,
                                     int cls_index) {
  if (starts.size() != ends.size()) throw ShapeError("geometry: start/end arrays differ in length");
  LatticeGeometry g;
  g.n = starts.size();
  g.starts.assign(starts.begin(), starts.end());
  g.ends.assign(ends.begin(), ends.end());
  g.cls_index = cls_index;
  g.buckets.assign(g.n * g.n, {0, 0, 0, 0});
  g.relations.assign(g.n * g.n, 0);
  const auto cls = static_cast<std::size_t>(cls_index);
  for (std::size_t i = 0; i < g.n; ++i) {
    if (cls_index >= 0 && i == cls) continue;
    const Span si{starts[i], ends[i]};
    for (std::size_t j = 0; j < g.n; ++j) {
      if (cls_index >= 0 && j == cls) continue;
      const Span sj{starts[j], ends[j]};
      const auto off = distance_offsets(si, sj);
      g.buckets[g.at(i, j)] = {static_cast<std::uint16_t>(bucket(off.ss)), static_cast<std::uint16_t>(bucket(off.se)),
                               static_cast<std::uint16_t>(bucket(off.es)), static_cast<std::uint16_t>(bucket(off.ee))};
      g.relations[g.at(i, j)] = static_cast<std::uint8_t>(relation(si, sj, i == j));
    }
  }
  return g;
}

namespace detail {

// Rows [P_S[s_i]; P_E[e_i]] of the concatenated position embedding.
template <typename Scalar>
Matrix<Scalar> gather_positions(const Matrix<Scalar>& p_s, const Matrix<Scalar>& p_e, std::span<const std::int32_t> starts,
                                std::span<const std::int32_t> ends) {
  const auto d_e = p_s.cols();
  Matrix<Scalar> out(static_cast<Eigen::Index>(starts.size()), 2 * d_e);
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (starts[i] < 0 || ends[i] < 0 || starts[i] >= p_s.rows() || ends[i] >= p_e.rows())
      throw PositionOverflow("position " + std::to_string(std::max(starts[i], ends[i])) + " outside [0, " +
                             std::to_string(p_s.rows()) + ")");
    const auto row = static_cast<Eigen::Index>(i);
    out.row(row).head(d_e) = p_s.row(starts[i]);
    out.row(row).tail(d_e) = p_e.row(ends[i]);
  }
  return out;
}

}  // namespace detail

// att_ij = ([P_S s_i; P_E e_i] W_q)([P_S s_j; P_E e_j] W_k)^T / sqrt(2 d_k).
template <typename Scalar>
Matrix<Scalar> abs_position_term(const Matrix<Scalar>& p_s, const Matrix<Scalar>& p_e, const Matrix<Scalar>& w_q,
                                 const Matrix<Scalar>& w_k, std::span<const std::int32_t> starts,
                                 std::span<const std::int32_t> ends) {
  const auto pos = detail::gather_positions(p_s, p_e, starts, ends);
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(2 * w_q.cols()));
  return scale * (pos * w_q) * (pos * w_k).transpose();
}

template <typename Scalar>
Scalar distance_bias(const std::array<Matrix<Scalar>, 4>& tables, const DistanceOffsets& off) {
  return tables[0](0, bucket(off.ss)) + tables[1](0, bucket(off.se)) + tables[2](0, bucket(off.es)) +
         tables[3](0, bucket(off.ee));
}

template <typename Scalar>
Scalar relation_bias(const Matrix<Scalar>& table, PositionRelation rel) {
  return table(0, static_cast<Eigen::Index>(rel));
}

// alpha + att + b + r, then the [CLS] reset: on the [CLS] row the positional
// sum is replaced by cls_q, on the [CLS] column by cls_k. The diagonal takes
// cls_k; a constant row would cancel in the softmax and leave cls_q inert.
// cls_index < 0 disables the reset.
template <typename Scalar>
Matrix<Scalar> combine_scores(const Matrix<Scalar>& alpha, const Matrix<Scalar>& att, const Matrix<Scalar>& b,
                              const Matrix<Scalar>& r, int cls_index, Scalar cls_q, Scalar cls_k) {
  if (alpha.rows() != alpha.cols() || att.rows() != alpha.rows() || att.cols() != alpha.cols() ||
      b.rows() != alpha.rows() || b.cols() != alpha.cols() || r.rows() != alpha.rows() || r.cols() != alpha.cols())
    throw ShapeError("combine_scores: operands must be equal square matrices");
  Matrix<Scalar> positional = att + b + r;
  if (cls_index >= 0) {
    if (cls_index >= alpha.rows()) throw ShapeError("combine_scores: cls index out of range");
    positional.row(cls_index).setConstant(cls_q);
    positional.col(cls_index).setConstant(cls_k);
  }
  return alpha + positional;
}

// Distance-bias and relation-bias matrices of one head over a geometry.
template <typename Scalar>
Matrix<Scalar> distance_bias_matrix(const LpaParams<Scalar>& params, int head, const LatticeGeometry& g) {
  const auto n = static_cast<Eigen::Index>(g.n);
  Matrix<Scalar> out = Matrix<Scalar>::Zero(n, n);
  const auto& tables = params.b[head];
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = 0; j < g.n; ++j) {
      const auto& bk = g.buckets[g.at(i, j)];
      out(i, j) = tables[0](0, bk[0]) + tables[1](0, bk[1]) + tables[2](0, bk[2]) + tables[3](0, bk[3]);
    }
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> relation_bias_matrix(const LpaParams<Scalar>& params, int head, const LatticeGeometry& g) {
  const auto n = static_cast<Eigen::Index>(g.n);
  Matrix<Scalar> out(n, n);
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j) out(i, j) = params.r[head](0, g.relations[g.at(i, j)]);
  return out;
}

// The positional part of the logits for one head (att + b + r with reset).
template <typename Scalar>
Matrix<Scalar> positional_scores(const LpaParams<Scalar>& params, int head, const LatticeGeometry& g) {
  const auto n = static_cast<Eigen::Index>(g.n);
  const auto att = abs_position_term(params.p_s, params.p_e, params.w_q[head], params.w_k[head], g.starts, g.ends);
  return combine_scores<Scalar>(Matrix<Scalar>::Zero(n, n), att, distance_bias_matrix(params, head, g),
                                relation_bias_matrix(params, head, g), g.cls_index, params.cls_q[head](0, 0),
                                params.cls_k[head](0, 0));
}

// Accumulates into grads the gradient of a loss whose derivative with
// respect to positional_scores(params, head, g) is d_scores.
template <typename Scalar>
void positional_scores_backward(const LpaParams<Scalar>& params, int head, const LatticeGeometry& g,
                                const Matrix<Scalar>& d_scores, LpaParams<Scalar>& grads) {
  Matrix<Scalar> d = d_scores;
  if (g.cls_index >= 0) {
    const auto c = g.cls_index;
    grads.cls_q[head](0, 0) += d.row(c).sum() - d(c, c);
    grads.cls_k[head](0, 0) += d.col(c).sum();
    d.row(c).setZero();
    d.col(c).setZero();
  }
  auto& db = grads.b[head];
  auto& dr = grads.r[head];
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = 0; j < g.n; ++j) {
      const Scalar v = d(i, j);
      if (v == Scalar(0)) continue;
      const auto& bk = g.buckets[g.at(i, j)];
      for (std::size_t k = 0; k < 4; ++k) db[k](0, bk[k]) += v;
      dr(0, g.relations[g.at(i, j)]) += v;
    }
  }

  const auto pos = detail::gather_positions(params.p_s, params.p_e, g.starts, g.ends);
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(2 * params.d_head()));
  const Matrix<Scalar> q = pos * params.w_q[head];
  const Matrix<Scalar> k = pos * params.w_k[head];
  const Matrix<Scalar> dq = scale * d * k;
  const Matrix<Scalar> dk = scale * d.transpose() * q;
  grads.w_q[head] += pos.transpose() * dq;
  grads.w_k[head] += pos.transpose() * dk;
  const Matrix<Scalar> dpos = dq * params.w_q[head].transpose() + dk * params.w_k[head].transpose();
  const auto d_e = params.p_s.cols();
  for (std::size_t i = 0; i < g.n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    grads.p_s.row(g.starts[i]) += dpos.row(row).head(d_e);
    grads.p_e.row(g.ends[i]) += dpos.row(row).tail(d_e);
  }
}

}  // namespace lattice_bert
