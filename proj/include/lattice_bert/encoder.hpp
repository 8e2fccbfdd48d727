#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "config.hpp"
#include "errors.hpp"
#include "instance.hpp"
#include "lattice.hpp"
#include "lpa.hpp"
#include "rng.hpp"
#include "tensor.hpp"
#include "vocabulary.hpp"

namespace lattice_bert {

template <typename Scalar = double>
struct LayerParams {
  Matrix<Scalar> w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o;
  Matrix<Scalar> ln1_g, ln1_b;
  Matrix<Scalar> w_1, b_1, w_2, b_2;
  Matrix<Scalar> ln2_g, ln2_b;
};

// Transformer encoder over lattice tokens. The token embedding is
// factorized into a (vocab, d_e) table and a (d_e, d_h) up-projection; the
// masked-segment head projects back to d_e and reuses the table as output
// weights.
template <typename Scalar = double>
struct EncoderState {
  EncoderConfig config;
  Matrix<Scalar> tok_emb;   // (vocab, d_e)
  Matrix<Scalar> emb_up;    // (d_e, d_h)
  Matrix<Scalar> emb_up_b;  // (1, d_h)
  Matrix<Scalar> emb_ln_g, emb_ln_b;
  std::vector<LayerParams<Scalar>> layers;
  LpaParams<Scalar> lpa;
  Matrix<Scalar> msp_w, msp_b;  // (d_h, d_e), (1, d_e)
  Matrix<Scalar> msp_ln_g, msp_ln_b;
  Matrix<Scalar> msp_out_b;     // (1, vocab)
  Matrix<Scalar> sop_w, sop_b;  // (d_h, 2), (1, 2)

  static EncoderState zeros(const EncoderConfig& cfg) {
    cfg.validate();
    EncoderState s;
    s.config = cfg;
    const int v = cfg.vocab_size, de = cfg.d_embed, dh = cfg.d_hidden, df = cfg.d_ffn;
    auto z = [](int r, int c) { return Matrix<Scalar>::Zero(r, c); };
    s.tok_emb = z(v, de);
    s.emb_up = z(de, dh);
    s.emb_up_b = z(1, dh);
    s.emb_ln_g = z(1, dh);
    s.emb_ln_b = z(1, dh);
    for (int l = 0; l < cfg.n_layers; ++l) {
      LayerParams<Scalar> p{z(dh, dh), z(1, dh), z(dh, dh), z(1, dh), z(dh, dh), z(1, dh), z(dh, dh), z(1, dh),
                            z(1, dh),  z(1, dh), z(dh, df), z(1, df), z(df, dh), z(1, dh), z(1, dh),  z(1, dh)};
      s.layers.push_back(std::move(p));
    }
    s.lpa = LpaParams<Scalar>::zeros(cfg);
    s.msp_w = z(dh, de);
    s.msp_b = z(1, de);
    s.msp_ln_g = z(1, de);
    s.msp_ln_b = z(1, de);
    s.msp_out_b = z(1, v);
    s.sop_w = z(dh, 2);
    s.sop_b = z(1, 2);
    return s;
  }

  EncoderState zeros_like() const { return zeros(config); }

  // Every trainable tensor under its checkpoint name.
  std::vector<NamedTensor<Scalar>> tensors() {
    std::vector<NamedTensor<Scalar>> out{{"tok_emb", &tok_emb},
                                         {"emb_up", &emb_up},
                                         {"emb_up_b", &emb_up_b},
                                         {"emb_ln.g", &emb_ln_g},
                                         {"emb_ln.b", &emb_ln_b}};
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& p = layers[l];
      const auto pre = "layer." + std::to_string(l) + ".";
      for (auto [name, t] : std::initializer_list<std::pair<const char*, Matrix<Scalar>*>>{
               {"w_q", &p.w_q},     {"b_q", &p.b_q},     {"w_k", &p.w_k}, {"b_k", &p.b_k}, {"w_v", &p.w_v},
               {"b_v", &p.b_v},     {"w_o", &p.w_o},     {"b_o", &p.b_o}, {"ln1.g", &p.ln1_g}, {"ln1.b", &p.ln1_b},
               {"ffn.w1", &p.w_1},  {"ffn.b1", &p.b_1},  {"ffn.w2", &p.w_2}, {"ffn.b2", &p.b_2}, {"ln2.g", &p.ln2_g},
               {"ln2.b", &p.ln2_b}})
        out.push_back({pre + name, t});
    }
    for (auto& t : lpa.tensors()) out.push_back(t);
    out.push_back({"msp.w", &msp_w});
    out.push_back({"msp.b", &msp_b});
    out.push_back({"msp.ln.g", &msp_ln_g});
    out.push_back({"msp.ln.b", &msp_ln_b});
    out.push_back({"msp.out_b", &msp_out_b});
    out.push_back({"sop.w", &sop_w});
    out.push_back({"sop.b", &sop_b});
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& t : tensors()) n += static_cast<std::size_t>(t.tensor->size());
    return n;
  }

  void set_zero() {
    for (auto& t : tensors()) t.tensor->setZero();
  }
};

// Embedding path size with factorization: vocab * d_e + d_e * d_h.
inline std::size_t embedding_path_parameters(const EncoderConfig& cfg) {
  return static_cast<std::size_t>(cfg.vocab_size) * cfg.d_embed + static_cast<std::size_t>(cfg.d_embed) * cfg.d_hidden;
}

template <typename Scalar = double>
EncoderState<Scalar> init_encoder(const EncoderConfig& cfg, Rng& rng) {
  auto s = EncoderState<Scalar>::zeros(cfg);
  constexpr double std = 0.02;
  const int dh = cfg.d_hidden, df = cfg.d_ffn;
  s.tok_emb = gaussian<Scalar>(cfg.vocab_size, cfg.d_embed, std, rng);
  s.emb_up = gaussian<Scalar>(cfg.d_embed, dh, std, rng);
  s.emb_ln_g.setOnes();
  for (auto& p : s.layers) {
    p.w_q = gaussian<Scalar>(dh, dh, std, rng);
    p.w_k = gaussian<Scalar>(dh, dh, std, rng);
    p.w_v = gaussian<Scalar>(dh, dh, std, rng);
    p.w_o = gaussian<Scalar>(dh, dh, std, rng);
    p.w_1 = gaussian<Scalar>(dh, df, std, rng);
    p.w_2 = gaussian<Scalar>(df, dh, std, rng);
    p.ln1_g.setOnes();
    p.ln2_g.setOnes();
  }
  s.lpa = init_params<Scalar>(cfg, rng);
  s.msp_w = gaussian<Scalar>(dh, cfg.d_embed, std, rng);
  s.msp_ln_g.setOnes();
  s.sop_w = gaussian<Scalar>(dh, 2, std, rng);
  return s;
}

// Token ids with their spans; cls_index < 0 when the input has no [CLS].
struct EncoderInput {
  std::vector<TokenId> ids;
  std::vector<std::int32_t> starts;
  std::vector<std::int32_t> ends;
  int cls_index = -1;

  std::size_t size() const { return ids.size(); }
};

struct EncoderTargets {
  std::vector<MspTarget> msp;
  std::optional<SopLabel> sop;
};

inline EncoderInput encoder_input(const PretrainInstance& inst) {
  return {inst.token_ids, inst.starts, inst.ends, inst.token_ids.empty() ? -1 : 0};
}

inline EncoderTargets encoder_targets(const PretrainInstance& inst) { return {inst.msp_targets, inst.sop_label}; }

enum class Mode { eval, train };

template <typename Scalar>
struct LayerCache {
  Matrix<Scalar> input;
  Matrix<Scalar> q, k, v;
  std::vector<Matrix<Scalar>> probs;       // softmax output per head
  std::vector<Matrix<Scalar>> prob_masks;  // attention dropout per head
  Matrix<Scalar> ctx;
  Matrix<Scalar> attn_mask;
  LayerNormCache<Scalar> ln1;
  Matrix<Scalar> h1;
  Matrix<Scalar> f1;  // pre-activation
  Matrix<Scalar> g;   // GELU(f1)
  Matrix<Scalar> ffn_mask;
  LayerNormCache<Scalar> ln2;
};

template <typename Scalar>
struct ForwardCache {
  LatticeGeometry geometry;
  std::vector<Matrix<Scalar>> positional;  // per head, shared by all layers
  Matrix<Scalar> embedded;                 // rows of tok_emb
  LayerNormCache<Scalar> emb_ln;
  Matrix<Scalar> emb_mask;
  std::vector<LayerCache<Scalar>> layers;
  Matrix<Scalar> output;
};

template <typename Scalar>
struct ForwardResult {
  Matrix<Scalar> hidden;  // (n, d_h)
  ForwardCache<Scalar> cache;

  Matrix<Scalar> cls_vector() const {
    if (cache.geometry.cls_index < 0) throw ShapeError("input has no [CLS] token");
    return hidden.row(cache.geometry.cls_index);
  }
};

// Post-layer-norm encoder stack whose attention logits are content scores
// plus the shared lattice-position scores. Dropout is active only in train
// mode and then draws from rng.
template <typename Scalar>
ForwardResult<Scalar> forward(const EncoderState<Scalar>& state, const EncoderInput& input, Mode mode = Mode::eval,
                              Rng* rng = nullptr) {
  const auto& cfg = state.config;
  const auto n = static_cast<Eigen::Index>(input.size());
  if (n == 0) throw EmptyInput();
  if (input.starts.size() != input.ids.size() || input.ends.size() != input.ids.size())
    throw ShapeError("forward: ids and spans differ in length");
  if (n > cfg.l_max) throw PositionOverflow("forward: " + std::to_string(n) + " tokens exceed l_max");
  for (auto id : input.ids)
    if (id < 0 || id >= cfg.vocab_size) throw ShapeError("forward: token id " + std::to_string(id) + " outside vocabulary");
  if (mode == Mode::train && rng == nullptr) throw ShapeError("forward: train mode needs a generator");
  const double p_drop = mode == Mode::train ? cfg.dropout : 0.0;
  const double p_attn = mode == Mode::train ? cfg.attention_dropout : 0.0;

  ForwardResult<Scalar> result;
  auto& cache = result.cache;
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (input.starts[i] >= cfg.l_max || input.ends[i] >= cfg.l_max)
      throw PositionOverflow("forward: position beyond l_max");
  }
  cache.geometry = make_geometry(input.starts, input.ends, input.cls_index);
  for (int h = 0; h < cfg.n_heads; ++h) cache.positional.push_back(positional_scores(state.lpa, h, cache.geometry));

  cache.embedded.resize(n, cfg.d_embed);
  for (Eigen::Index i = 0; i < n; ++i) cache.embedded.row(i) = state.tok_emb.row(input.ids[i]);
  Matrix<Scalar> z0 = (cache.embedded * state.emb_up).rowwise() + state.emb_up_b.row(0);
  Matrix<Scalar> h = layer_norm(z0, state.emb_ln_g, state.emb_ln_b, &cache.emb_ln);
  if (p_drop > 0) cache.emb_mask = dropout_mask<Scalar>(n, cfg.d_hidden, p_drop, *rng);
  apply_mask(h, cache.emb_mask);

  const int dk = cfg.d_head();
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(2 * dk));
  for (const auto& p : state.layers) {
    LayerCache<Scalar> lc;
    lc.input = h;
    lc.q = (h * p.w_q).rowwise() + p.b_q.row(0);
    lc.k = (h * p.w_k).rowwise() + p.b_k.row(0);
    lc.v = (h * p.w_v).rowwise() + p.b_v.row(0);
    lc.ctx.resize(n, cfg.d_hidden);
    for (int hd = 0; hd < cfg.n_heads; ++hd) {
      const auto qh = lc.q.middleCols(hd * dk, dk);
      const auto kh = lc.k.middleCols(hd * dk, dk);
      Matrix<Scalar> logits = scale * qh * kh.transpose();
      logits += cache.positional[hd];
      Matrix<Scalar> probs = softmax_rows(logits);
      Matrix<Scalar> mask = p_attn > 0 ? dropout_mask<Scalar>(n, n, p_attn, *rng) : Matrix<Scalar>{};
      Matrix<Scalar> used = probs;
      apply_mask(used, mask);
      lc.ctx.middleCols(hd * dk, dk) = used * lc.v.middleCols(hd * dk, dk);
      lc.probs.push_back(std::move(probs));
      lc.prob_masks.push_back(std::move(mask));
    }
    Matrix<Scalar> attn = (lc.ctx * p.w_o).rowwise() + p.b_o.row(0);
    if (p_drop > 0) lc.attn_mask = dropout_mask<Scalar>(n, cfg.d_hidden, p_drop, *rng);
    apply_mask(attn, lc.attn_mask);
    lc.h1 = layer_norm<Scalar>(h + attn, p.ln1_g, p.ln1_b, &lc.ln1);
    lc.f1 = (lc.h1 * p.w_1).rowwise() + p.b_1.row(0);
    lc.g = gelu(lc.f1);
    Matrix<Scalar> f2 = (lc.g * p.w_2).rowwise() + p.b_2.row(0);
    if (p_drop > 0) lc.ffn_mask = dropout_mask<Scalar>(n, cfg.d_hidden, p_drop, *rng);
    apply_mask(f2, lc.ffn_mask);
    h = layer_norm<Scalar>(lc.h1 + f2, p.ln2_g, p.ln2_b, &lc.ln2);
    cache.layers.push_back(std::move(lc));
  }
  cache.output = h;
  result.hidden = std::move(h);
  return result;
}

// ---------------------------------------------------------------------------
// Losses

struct LossReport {
  double msp_loss = 0.0;
  double sop_loss = 0.0;
  std::size_t msp_count = 0;
  std::size_t msp_correct = 0;
  bool has_msp = false;  // false: no targets, msp_loss defined as 0
  bool has_sop = false;
  bool sop_correct = false;

  double total() const { return msp_loss + sop_loss; }
};

namespace detail {

template <typename Scalar>
struct MspHeadCache {
  Matrix<Scalar> rows;  // hidden rows of the targets
  Matrix<Scalar> t0;
  LayerNormCache<Scalar> ln;
  Matrix<Scalar> t2;
  Matrix<Scalar> probs;
};

template <typename Scalar>
Matrix<Scalar> msp_logits(const EncoderState<Scalar>& state, const Matrix<Scalar>& rows, MspHeadCache<Scalar>* cache) {
  Matrix<Scalar> t0 = (rows * state.msp_w).rowwise() + state.msp_b.row(0);
  LayerNormCache<Scalar> ln;
  Matrix<Scalar> t2 = layer_norm<Scalar>(gelu(t0), state.msp_ln_g, state.msp_ln_b, &ln);
  Matrix<Scalar> logits = (t2 * state.tok_emb.transpose()).rowwise() + state.msp_out_b.row(0);
  if (cache) {
    cache->rows = rows;
    cache->t0 = std::move(t0);
    cache->ln = std::move(ln);
    cache->t2 = std::move(t2);
  }
  return logits;
}

}  // namespace detail

// Mean cross-entropy of the original ids at the target rows, through the
// tied factorized output head. Zero targets give 0.
template <typename Scalar>
Scalar msp_loss(const EncoderState<Scalar>& state, const Matrix<Scalar>& hidden, std::span<const MspTarget> targets) {
  if (targets.empty()) return Scalar(0);
  Matrix<Scalar> rows(static_cast<Eigen::Index>(targets.size()), hidden.cols());
  for (std::size_t t = 0; t < targets.size(); ++t) rows.row(static_cast<Eigen::Index>(t)) = hidden.row(targets[t].index);
  const auto probs = softmax_rows(detail::msp_logits<Scalar>(state, rows, nullptr));
  Scalar loss = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) loss -= std::log(probs(static_cast<Eigen::Index>(t), targets[t].original));
  return loss / static_cast<Scalar>(targets.size());
}

template <typename Scalar>
Matrix<Scalar> sop_logits(const EncoderState<Scalar>& state, const Matrix<Scalar>& cls_vec) {
  return cls_vec * state.sop_w + state.sop_b;
}

// Two-way cross-entropy on the [CLS] vector.
template <typename Scalar>
Scalar sop_loss(const EncoderState<Scalar>& state, const Matrix<Scalar>& cls_vec, SopLabel label) {
  const auto probs = softmax_rows<Scalar>(sop_logits(state, cls_vec));
  return -std::log(probs(0, static_cast<Eigen::Index>(label)));
}

// Forward pass, both losses and (when grads is given) the full backward
// pass. Gradients are scaled by grad_scale and added to grads.
template <typename Scalar>
LossReport loss_and_gradients(const EncoderState<Scalar>& state, const EncoderInput& input, const EncoderTargets& targets,
                              EncoderState<Scalar>* grads = nullptr, Mode mode = Mode::eval, Rng* rng = nullptr,
                              Scalar grad_scale = Scalar(1)) {
  const auto& cfg = state.config;
  auto fwd = forward(state, input, mode, rng);
  const auto& hidden = fwd.hidden;
  const auto n = hidden.rows();
  LossReport report;
  Matrix<Scalar> d_hidden = Matrix<Scalar>::Zero(n, cfg.d_hidden);

  for (const auto& t : targets.msp) {
    if (t.index < 0 || t.index >= n) throw ShapeError("msp target index out of range");
    if (t.original < 0 || t.original >= cfg.vocab_size) throw ShapeError("msp target id outside vocabulary");
  }
  if (!targets.msp.empty()) {
    const auto m = static_cast<Eigen::Index>(targets.msp.size());
    Matrix<Scalar> rows(m, cfg.d_hidden);
    for (Eigen::Index t = 0; t < m; ++t) rows.row(t) = hidden.row(targets.msp[t].index);
    detail::MspHeadCache<Scalar> hc;
    const auto probs = softmax_rows(detail::msp_logits(state, rows, &hc));
    Scalar loss = 0;
    Matrix<Scalar> d_logits = probs;
    for (Eigen::Index t = 0; t < m; ++t) {
      const auto target = targets.msp[t].original;
      loss -= std::log(probs(t, target));
      Eigen::Index arg = 0;
      probs.row(t).maxCoeff(&arg);
      report.msp_correct += arg == target ? 1 : 0;
      d_logits(t, target) -= Scalar(1);
    }
    report.has_msp = true;
    report.msp_count = static_cast<std::size_t>(m);
    report.msp_loss = static_cast<double>(loss / static_cast<Scalar>(m));
    if (grads) {
      d_logits *= grad_scale / static_cast<Scalar>(m);
      grads->msp_out_b += d_logits.colwise().sum();
      grads->tok_emb += d_logits.transpose() * hc.t2;
      const Matrix<Scalar> d_t2 = d_logits * state.tok_emb;
      const Matrix<Scalar> d_t1 = layer_norm_backward(d_t2, state.msp_ln_g, hc.ln, &grads->msp_ln_g, &grads->msp_ln_b);
      const Matrix<Scalar> d_t0 = d_t1.array() * hc.t0.unaryExpr([](Scalar x) { return gelu_grad(x); }).array();
      grads->msp_w += hc.rows.transpose() * d_t0;
      grads->msp_b += d_t0.colwise().sum();
      const Matrix<Scalar> d_rows = d_t0 * state.msp_w.transpose();
      for (Eigen::Index t = 0; t < m; ++t) d_hidden.row(targets.msp[t].index) += d_rows.row(t);
    }
  }

  if (targets.sop && input.cls_index >= 0) {
    const Matrix<Scalar> cls = hidden.row(input.cls_index);
    const auto probs = softmax_rows<Scalar>(sop_logits(state, cls));
    const auto label = static_cast<Eigen::Index>(*targets.sop);
    report.has_sop = true;
    report.sop_loss = static_cast<double>(-std::log(probs(0, label)));
    Eigen::Index arg = 0;
    probs.row(0).maxCoeff(&arg);
    report.sop_correct = arg == label;
    if (grads) {
      Matrix<Scalar> d_logits = probs;
      d_logits(0, label) -= Scalar(1);
      d_logits *= grad_scale;
      grads->sop_w += cls.transpose() * d_logits;
      grads->sop_b += d_logits;
      d_hidden.row(input.cls_index) += d_logits * state.sop_w.transpose();
    }
  }

  if (!grads || (!report.has_msp && !report.has_sop)) return report;

  // Encoder stack, top to bottom.
  const auto& cache = fwd.cache;
  const int dk = cfg.d_head();
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(2 * dk));
  std::vector<Matrix<Scalar>> d_positional(cfg.n_heads, Matrix<Scalar>::Zero(n, n));
  Matrix<Scalar> dh = std::move(d_hidden);
  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const auto& p = state.layers[l];
    auto& gp = grads->layers[l];
    const auto& lc = cache.layers[l];

    Matrix<Scalar> d_s2 = layer_norm_backward(dh, p.ln2_g, lc.ln2, &gp.ln2_g, &gp.ln2_b);
    Matrix<Scalar> d_h1 = d_s2;
    Matrix<Scalar> d_f2 = d_s2;
    apply_mask(d_f2, lc.ffn_mask);
    gp.w_2 += lc.g.transpose() * d_f2;
    gp.b_2 += d_f2.colwise().sum();
    const Matrix<Scalar> d_f1 = (d_f2 * p.w_2.transpose()).array() *
                                lc.f1.unaryExpr([](Scalar x) { return gelu_grad(x); }).array();
    gp.w_1 += lc.h1.transpose() * d_f1;
    gp.b_1 += d_f1.colwise().sum();
    d_h1 += d_f1 * p.w_1.transpose();

    Matrix<Scalar> d_s1 = layer_norm_backward(d_h1, p.ln1_g, lc.ln1, &gp.ln1_g, &gp.ln1_b);
    Matrix<Scalar> d_in = d_s1;
    Matrix<Scalar> d_attn = d_s1;
    apply_mask(d_attn, lc.attn_mask);
    gp.w_o += lc.ctx.transpose() * d_attn;
    gp.b_o += d_attn.colwise().sum();
    const Matrix<Scalar> d_ctx = d_attn * p.w_o.transpose();

    Matrix<Scalar> d_q(n, cfg.d_hidden), d_k(n, cfg.d_hidden), d_v(n, cfg.d_hidden);
    for (int hd = 0; hd < cfg.n_heads; ++hd) {
      const auto& probs = lc.probs[hd];
      Matrix<Scalar> used = probs;
      apply_mask(used, lc.prob_masks[hd]);
      const auto d_ctx_h = d_ctx.middleCols(hd * dk, dk);
      Matrix<Scalar> d_used = d_ctx_h * lc.v.middleCols(hd * dk, dk).transpose();
      d_v.middleCols(hd * dk, dk) = used.transpose() * d_ctx_h;
      apply_mask(d_used, lc.prob_masks[hd]);
      const Matrix<Scalar> d_logits = softmax_rows_backward(probs, d_used);
      d_positional[hd] += d_logits;
      d_q.middleCols(hd * dk, dk) = scale * d_logits * lc.k.middleCols(hd * dk, dk);
      d_k.middleCols(hd * dk, dk) = scale * d_logits.transpose() * lc.q.middleCols(hd * dk, dk);
    }
    gp.w_q += lc.input.transpose() * d_q;
    gp.b_q += d_q.colwise().sum();
    gp.w_k += lc.input.transpose() * d_k;
    gp.b_k += d_k.colwise().sum();
    gp.w_v += lc.input.transpose() * d_v;
    gp.b_v += d_v.colwise().sum();
    d_in += d_q * p.w_q.transpose() + d_k * p.w_k.transpose() + d_v * p.w_v.transpose();
    dh = std::move(d_in);
  }

  apply_mask(dh, cache.emb_mask);
  const Matrix<Scalar> d_z0 = layer_norm_backward(dh, state.emb_ln_g, cache.emb_ln, &grads->emb_ln_g, &grads->emb_ln_b);
  grads->emb_up += cache.embedded.transpose() * d_z0;
  grads->emb_up_b += d_z0.colwise().sum();
  const Matrix<Scalar> d_x = d_z0 * state.emb_up.transpose();
  for (Eigen::Index i = 0; i < n; ++i) grads->tok_emb.row(input.ids[i]) += d_x.row(i);

  for (int hd = 0; hd < cfg.n_heads; ++hd)
    positional_scores_backward(state.lpa, hd, cache.geometry, d_positional[hd], grads->lpa);
  return report;
}

// ---------------------------------------------------------------------------
// Downstream helpers

// Character-granularity tokens and word-pieces in position order; drops
// the word-level tokens so sequence labeling sees one unit per position.
inline std::vector<LatticeToken> extract_char_chain(const Lattice& lattice) {
  std::vector<LatticeToken> chain;
  for (const auto& t : lattice.tokens) {
    if (t.granularity == Granularity::character || t.granularity == Granularity::word_piece) chain.push_back(t);
  }
  return chain;
}

template <typename Scalar = double>
struct ClassifierHead {
  Matrix<Scalar> weight;  // (d_h, n_classes)
  Matrix<Scalar> bias;    // (1, n_classes)
};

// Logistic/softmax regression over the [CLS] vector.
template <typename Scalar>
Matrix<Scalar> classify_cls(const Matrix<Scalar>& cls_vec, const ClassifierHead<Scalar>& head) {
  if (cls_vec.cols() != head.weight.rows()) throw ShapeError("classify_cls: hidden size mismatch");
  return softmax_rows<Scalar>(cls_vec * head.weight + head.bias);
}

}  // namespace lattice_bert
