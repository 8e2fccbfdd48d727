#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "lattice_bert/checkpoint.hpp"
#include "lattice_bert/encoder.hpp"
#include "lattice_bert/trainer.hpp"
#include "test_support.hpp"

namespace {

using namespace lattice_bert;
using Mat = Matrix<double>;

EncoderConfig toy(int vocab = 20) {
  auto cfg = EncoderConfig::toy();
  cfg.vocab_size = vocab;
  cfg.dropout = 0.0;
  cfg.attention_dropout = 0.0;
  return cfg;
}

PretrainInstance research_instance(std::uint64_t seed = 2) {
  const auto vocab = lbt::research_vocab();
  const auto b = build_lattice(std::u32string_view(U"充实"), compile_matcher(vocab), vocab);
  Rng rng(seed);
  return build_pretrain_instance(lbt::research_lattice(), b, true, {}, rng, vocab.size());
}

TEST(EncoderConfig, Presets) {
  const auto base = EncoderConfig::preset("base");
  EXPECT_EQ(base.n_layers, 12);
  EXPECT_EQ(base.d_hidden, 768);
  EXPECT_EQ(base.d_embed, 128);
  EXPECT_EQ(base.d_ffn, 3072);
  EXPECT_EQ(base.n_heads, 12);
  EXPECT_EQ(base.d_head(), 64);
  const auto lite = EncoderConfig::preset("lite");
  EXPECT_EQ(lite.n_layers, 6);
  EXPECT_EQ(lite.d_hidden, 512);
  EXPECT_EQ(lite.n_heads, 8);
  const auto t = EncoderConfig::preset("toy");
  EXPECT_EQ(t.d_hidden, 64);
  EXPECT_EQ(t.d_embed, 16);
  EXPECT_EQ(t.l_max, 693);
  EXPECT_THROW(EncoderConfig::preset("huge"), ShapeError);
}

TEST(EncoderState, FactorizedEmbeddingIsSmaller) {
  for (const char* name : {"base", "lite", "toy"}) {
    auto cfg = EncoderConfig::preset(name);
    cfg.vocab_size = 21128;
    EXPECT_LT(embedding_path_parameters(cfg), static_cast<std::size_t>(cfg.vocab_size) * cfg.d_hidden) << name;
  }
  auto cfg = toy(50);
  auto state = EncoderState<double>::zeros(cfg);
  EXPECT_EQ(state.tok_emb.rows(), 50);
  EXPECT_EQ(state.tok_emb.cols(), 16);
  EXPECT_EQ(state.emb_up.rows(), 16);
  for (auto& t : state.tensors()) EXPECT_FALSE(t.tensor->rows() == 50 && t.tensor->cols() == 64) << t.name;
}

TEST(Forward, SingleTokenShape) {
  Rng rng(1);
  const auto state = init_encoder<double>(toy(), rng);
  const EncoderInput input{{7}, {1}, {1}, -1};
  const auto out = forward(state, input);
  EXPECT_EQ(out.hidden.rows(), 1);
  EXPECT_EQ(out.hidden.cols(), 64);
  EXPECT_THROW(out.cls_vector(), ShapeError);
}

TEST(Forward, ErrorsOnBadInput) {
  Rng rng(1);
  const auto state = init_encoder<double>(toy(), rng);
  EXPECT_THROW(forward(state, EncoderInput{{7}, {693}, {693}, -1}), PositionOverflow);
  EXPECT_THROW(forward(state, EncoderInput{{70}, {1}, {1}, -1}), ShapeError);
  EXPECT_THROW(forward(state, EncoderInput{{7}, {1, 2}, {1}, -1}), ShapeError);
  EXPECT_THROW(forward(state, EncoderInput{}), EmptyInput);
}

TEST(Forward, DeterministicInEvalMode) {
  Rng rng(3);
  const auto state = init_encoder<double>(toy(), rng);
  const auto input = encoder_input(research_instance());
  const auto a = forward(state, input).hidden;
  const auto b = forward(state, input).hidden;
  EXPECT_EQ(a, b);
}

TEST(Forward, RowsAreStochastic) {
  Rng rng(3);
  const auto state = init_encoder<double>(toy(), rng);
  const auto out = forward(state, encoder_input(research_instance()));
  for (const auto& layer : out.cache.layers)
    for (const auto& p : layer.probs)
      for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
}

// With the content path of every layer silenced, each layer's attention is
// softmax(positional) alone; the shared tables give identical maps.
TEST(Forward, PositionalLogitsSharedAcrossLayers) {
  Rng rng(4);
  auto state = init_encoder<double>(toy(), rng);
  for (auto& t : state.lpa.tensors()) *t.tensor += gaussian<double>(t.tensor->rows(), t.tensor->cols(), 0.3, rng);
  for (auto& l : state.layers) {
    l.w_q.setZero();
    l.b_q.setZero();
  }
  const auto input = encoder_input(research_instance());
  const auto out = forward(state, input);
  ASSERT_EQ(out.cache.layers.size(), 2u);
  for (int h = 0; h < 4; ++h) {
    EXPECT_EQ(out.cache.layers[0].probs[h], out.cache.layers[1].probs[h]);
    EXPECT_EQ(out.cache.positional[h], positional_scores(state.lpa, h, out.cache.geometry));
  }
}

TEST(Losses, UniformMspIsLogV) {
  const auto state = EncoderState<double>::zeros(toy(20));
  const Mat hidden = Mat::Zero(3, 64);
  const std::vector<MspTarget> targets{{0, 7}, {2, 11}};
  EXPECT_NEAR(msp_loss<double>(state, hidden, targets), std::log(20.0), 1e-12);
  EXPECT_EQ(msp_loss<double>(state, hidden, {}), 0.0);
}

TEST(Losses, MspHandCase) {
  auto state = EncoderState<double>::zeros(toy(3));
  state.msp_out_b << 1.0, 2.0, 3.0;
  const Mat hidden = Mat::Zero(1, 64);
  // -log(e^3 / (e + e^2 + e^3)) = log(1 + e^-1 + e^-2)
  const std::vector<MspTarget> t2{{0, 2}};
  EXPECT_NEAR(msp_loss<double>(state, hidden, t2), 0.40760596444438030, 1e-12);
  state.msp_out_b << 0.0, 0.0, 60.0;
  EXPECT_LT(msp_loss<double>(state, hidden, t2), 1e-20);
}

TEST(Losses, SopCases) {
  auto state = EncoderState<double>::zeros(toy());
  const Mat cls = Mat::Zero(1, 64);
  EXPECT_NEAR(sop_loss<double>(state, cls, SopLabel::in_order), std::log(2.0), 1e-15);
  state.sop_b << 0.0, 2.0;
  EXPECT_NEAR(sop_loss<double>(state, cls, SopLabel::swapped), 0.12692801104297263, 1e-12);  // log(1 + e^-2)
  EXPECT_LT(sop_loss<double>(state, cls, SopLabel::swapped), std::log(2.0));
}

TEST(Gradients, ZeroLossInstanceHasZeroGradients) {
  Rng rng(5);
  const auto state = init_encoder<double>(toy(), rng);
  const auto input = encoder_input(research_instance());
  const EncoderTargets none{{}, std::nullopt};
  auto grads = state.zeros_like();
  const auto report = loss_and_gradients(state, input, none, &grads);
  EXPECT_EQ(report.total(), 0.0);
  for (auto& t : grads.tensors()) EXPECT_LE(t.tensor->cwiseAbs().maxCoeff(), 1e-8) << t.name;
}

TEST(Gradients, DeadBucketLeavesLossUnchanged) {
  Rng rng(6);
  auto state = init_encoder<double>(toy(), rng);
  const auto inst = research_instance();
  const auto before = loss_and_gradients(state, encoder_input(inst), encoder_targets(inst)).total();
  state.lpa.b[0][0](0, 5) += 3.0;  // offset -123 never occurs in a 9-character instance
  const auto after = loss_and_gradients(state, encoder_input(inst), encoder_targets(inst)).total();
  EXPECT_EQ(before, after);
}

TEST(Gradients, CheckPassesOnToyPreset) {
  Rng rng(7);
  auto state = init_encoder<double>(toy(), rng);
  for (auto& t : state.tensors()) *t.tensor += gaussian<double>(t.tensor->rows(), t.tensor->cols(), 0.1, rng);
  const auto inst = research_instance();
  const auto report = grad_check(state, encoder_input(inst), encoder_targets(inst), 1e-5, 12);
  EXPECT_EQ(report.groups.size(), state.tensors().size());
  EXPECT_LT(report.max_rel_error(), 1e-4);
}

TEST(Downstream, CharChain) {
  const auto chain = extract_char_chain(lbt::research_lattice());
  std::u32string joined;
  for (const auto& t : chain) joined += t.surface;
  EXPECT_EQ(chain.size(), 7u);
  EXPECT_EQ(joined, lbt::kResearchText);

  auto vocab = lbt::research_vocab();
  vocab.add({U"gpu", 1, Granularity::word_piece});
  const auto lat = build_lattice(std::string_view("研究gpu"), compile_matcher(vocab), vocab);
  const auto mixed = extract_char_chain(lat);
  ASSERT_EQ(mixed.size(), 3u);
  EXPECT_EQ(mixed[2].surface, U"gpu");

  Vocabulary chars_only;
  const auto plain = build_lattice(std::u32string_view(U"天地"), compile_matcher(chars_only), chars_only);
  EXPECT_EQ(extract_char_chain(plain), plain.tokens);
}

TEST(Downstream, ClassifyCls) {
  ClassifierHead<double> head{Mat::Zero(2, 3), Mat::Zero(1, 3)};
  Mat cls(1, 2);
  cls << 1.0, 2.0;
  const auto uniform = classify_cls(cls, head);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(uniform(0, k), 1.0 / 3.0, 1e-15);

  ClassifierHead<double> two{Mat::Identity(2, 2), Mat::Zero(1, 2)};
  const auto p = classify_cls(cls, two);
  EXPECT_NEAR(p(0, 0), 0.2689414213699951, 1e-15);  // 1 / (1 + e)
  EXPECT_NEAR(p(0, 1), 0.7310585786300049, 1e-15);
  EXPECT_NEAR(p.sum(), 1.0, 1e-15);
  EXPECT_THROW(classify_cls(Mat(Mat::Zero(1, 3)), two), ShapeError);
}

TEST(Training, StepsReduceLossOnOneInstance) {
  Rng rng(8);
  auto state = init_encoder<double>(toy(), rng);
  AdamConfig opt;
  opt.learning_rate = 1e-2;
  opt.warmup_steps = 2;
  Adam<double> adam(state.config, opt);
  const std::vector<PretrainInstance> batch{research_instance()};
  const double start = evaluate(state, std::span<const PretrainInstance>(batch)).total();
  for (int s = 0; s < 30; ++s) train_step(state, adam, std::span<const PretrainInstance>(batch), rng);
  EXPECT_EQ(adam.steps_taken(), 30);
  EXPECT_LT(evaluate(state, std::span<const PretrainInstance>(batch)).total(), 0.5 * start);
}

TEST(Adam, Schedule) {
  AdamConfig opt;
  opt.warmup_steps = 10;
  opt.total_steps = 110;
  Adam<double> adam(toy(), opt);
  EXPECT_DOUBLE_EQ(adam.rate_at(0), 1e-4);
  EXPECT_DOUBLE_EQ(adam.rate_at(9), 1e-3);
  EXPECT_DOUBLE_EQ(adam.rate_at(60), 5e-4);
  EXPECT_DOUBLE_EQ(adam.rate_at(110), 0.0);
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(9);
  Checkpoint ckpt{init_encoder<double>(toy(), rng), 42, std::nullopt, std::nullopt};
  ckpt.adam_m = ckpt.state.zeros_like();
  ckpt.adam_v = ckpt.state.zeros_like();
  ckpt.adam_m->tok_emb(3, 4) = 0.5;
  std::stringstream ss;
  save_checkpoint(ss, ckpt);
  const auto back = load_checkpoint(ss);
  EXPECT_EQ(back.step, 42);
  EXPECT_EQ(back.state.config, ckpt.state.config);
  auto a = ckpt.state;
  auto b = back.state;
  auto ta = a.tensors();
  auto tb = b.tensors();
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_EQ(*ta[i].tensor, *tb[i].tensor) << ta[i].name;
  ASSERT_TRUE(back.adam_m);
  EXPECT_EQ(back.adam_m->tok_emb(3, 4), 0.5);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  std::istringstream bad_magic("NOTACKPT");
  EXPECT_THROW(load_checkpoint(bad_magic), FormatError);
  Rng rng(9);
  Checkpoint ckpt{init_encoder<double>(toy(), rng), 1, std::nullopt, std::nullopt};
  std::stringstream ss;
  save_checkpoint(ss, ckpt);
  auto bytes = ss.str();
  std::istringstream truncated(bytes.substr(0, bytes.size() - 8));
  EXPECT_THROW(load_checkpoint(truncated), FormatError);
}

}  // namespace
