#include <sstream>

#include <gtest/gtest.h>

#include "lattice_bert/instance.hpp"
#include "lattice_bert/packing.hpp"
#include "lattice_bert/segment.hpp"
#include "test_support.hpp"

namespace {

using namespace lattice_bert;

Segment make_segment(std::size_t first, std::size_t count) {
  Segment s;
  for (std::size_t i = 0; i < count; ++i) s.token_indices.push_back(first + i);
  return s;
}

std::vector<std::vector<std::size_t>> as_components(const std::vector<Segment>& segs) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& s : segs) {
    auto idx = s.token_indices;
    std::sort(idx.begin(), idx.end());
    out.push_back(idx);
  }
  return out;
}

TEST(DetectSegments, ResearchSentence) {
  const auto lat = lbt::research_lattice();
  const auto segs = detect_segments(lat);
  ASSERT_EQ(segs.size(), 3u);
  EXPECT_EQ(segs[0].char_span, (Span{1, 4}));
  EXPECT_EQ(segs[1].char_span, (Span{5, 5}));
  EXPECT_EQ(segs[2].char_span, (Span{6, 7}));
  EXPECT_EQ(segs[0].size(), 7u);
  EXPECT_EQ(segs[1].size(), 1u);
  EXPECT_EQ(segs[2].size(), 3u);
  EXPECT_EQ(as_components(segs), lbt::overlap_components(lat.tokens));
}

TEST(DetectSegments, CharactersOnly) {
  Vocabulary vocab;
  const auto lat = build_lattice(std::u32string_view(U"天地人"), compile_matcher(vocab), vocab);
  const auto segs = detect_segments(lat);
  ASSERT_EQ(segs.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(segs[i].size(), 1u);
}

TEST(DetectSegments, WholeTextWord) {
  Vocabulary vocab;
  vocab.add({U"天地人", 1, Granularity::word});
  const auto lat = build_lattice(std::u32string_view(U"天地人"), compile_matcher(vocab), vocab);
  const auto segs = detect_segments(lat);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].size(), 4u);
}

TEST(DetectSegments, MatchesConnectedComponents) {
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto rv = lbt::random_vocab(rng, 6, 20, 4, 6);
    const auto text = lbt::random_text(rng, 1, 24, 6);
    const auto lat = build_lattice(std::u32string_view(text), compile_matcher(rv.vocab), rv.vocab);
    const auto segs = detect_segments(lat);
    ASSERT_EQ(as_components(segs), lbt::overlap_components(lat.tokens)) << to_utf8(text);
    std::int32_t next = 1;
    for (const auto& s : segs) {
      EXPECT_EQ(s.char_span.start, next);
      next = s.char_span.end + 1;
    }
    EXPECT_EQ(next, lat.n_chars + 1);
  }
}

TEST(SelectMaskSegments, FirstCrossingStops) {
  const std::vector<Segment> segs{make_segment(0, 7), make_segment(7, 1), make_segment(8, 3)};
  // Budget 0.15 * 11 = 1.65: one segment unless the 1-token one comes first.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto picked = select_mask_segments(segs, 0.15, rng);
    ASSERT_FALSE(picked.empty());
    std::size_t before_last = 0;
    for (std::size_t i = 0; i + 1 < picked.size(); ++i) before_last += picked[i].size();
    EXPECT_LT(static_cast<double>(before_last), 1.65);
    EXPECT_GE(static_cast<double>(before_last + picked.back().size()), 1.65);
    EXPECT_EQ(picked.size(), picked.front().size() == 1 ? 2u : 1u);
  }
}

TEST(SelectMaskSegments, AtLeastOneAndEmpty) {
  const std::vector<Segment> segs{make_segment(0, 1), make_segment(1, 1)};
  Rng rng(1);
  EXPECT_EQ(select_mask_segments(segs, 0.01, rng).size(), 1u);
  EXPECT_TRUE(select_mask_segments({}, 0.15, rng).empty());
}

TEST(SelectMaskSegments, ReachesBudgetAndIsDeterministic) {
  std::vector<Segment> segs;
  for (std::size_t i = 0; i < 40; ++i) segs.push_back(make_segment(i, 1));
  Rng a(9), b(9);
  const auto x = select_mask_segments(segs, 0.15, a);
  const auto y = select_mask_segments(segs, 0.15, b);
  EXPECT_EQ(x, y);
  EXPECT_EQ(x.size(), 6u);  // ceil(0.15 * 40)
}

TEST(ApplyMspMask, AllMaskPolicy) {
  const auto lat = lbt::research_lattice();
  const auto segs = detect_segments(lat);
  std::vector<TokenId> ids;
  for (const auto& t : lat.tokens) ids.push_back(t.id);
  Rng rng(4);
  const std::vector<Segment> selected{segs[2]};
  const auto out = apply_msp_mask(ids, selected, rng, 20, MaskPolicy{1.0, 0.0});
  ASSERT_EQ(out.targets.size(), 3u);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const bool target = i >= 8;
    EXPECT_EQ(out.ids[i], target ? Vocabulary::kMask : ids[i]);
  }
  for (const auto& t : out.targets) EXPECT_EQ(t.original, ids[static_cast<std::size_t>(t.index)]);
}

TEST(ApplyMspMask, EmptySelectionLeavesIds) {
  const std::vector<TokenId> ids{7, 8, 9};
  Rng rng(1);
  const auto out = apply_msp_mask(ids, {}, rng, 20);
  EXPECT_EQ(out.ids, ids);
  EXPECT_TRUE(out.targets.empty());
}

TEST(ApplyMspMask, CorruptionSplit) {
  const std::vector<TokenId> ids(20000, 7);
  const std::vector<Segment> selected{make_segment(0, ids.size())};
  Rng rng(8);
  const auto out = apply_msp_mask(ids, selected, rng, 1000);
  std::size_t masked = 0, kept = 0, random = 0;
  for (auto id : out.ids) {
    if (id == Vocabulary::kMask) {
      ++masked;
    } else if (id == 7) {
      ++kept;
    } else {
      ++random;
      EXPECT_GE(id, Vocabulary::kNumSpecials);
      EXPECT_LT(id, 1000);
    }
  }
  EXPECT_NEAR(masked / 20000.0, 0.8, 0.015);
  EXPECT_NEAR((kept + random) / 20000.0, 0.2, 0.015);
  EXPECT_NEAR(random / 20000.0, 0.1, 0.01);
}

Lattice three_token_b() {
  const auto vocab = lbt::research_vocab();
  return build_lattice(std::u32string_view(U"充实"), compile_matcher(vocab), vocab);
}

TEST(BuildPretrainInstance, ResearchSentencePlusThreeTokens) {
  const auto a = lbt::research_lattice();
  const auto b = three_token_b();
  ASSERT_EQ(b.tokens.size(), 3u);
  Rng rng(2);
  const auto inst = build_pretrain_instance(a, b, false, {}, rng, 20);
  ASSERT_EQ(inst.size(), 17u);
  EXPECT_EQ(inst.sop_label, SopLabel::in_order);
  EXPECT_EQ(inst.n_chars, 9);
  EXPECT_EQ(inst.starts[0], 0);
  EXPECT_EQ(inst.ends[0], 0);
  EXPECT_EQ(first_separator(inst), 12u);
  EXPECT_EQ(inst.starts[12], 8);
  EXPECT_EQ(inst.starts[13], 9);  // B starts right after the separator position
  EXPECT_EQ(inst.ends[15], 10);
  EXPECT_EQ(inst.starts[16], 11);
  EXPECT_EQ(inst.token_ids[16], Vocabulary::kSep);
  EXPECT_FALSE(inst.msp_targets.empty());
  EXPECT_EQ(count_leaks(inst), 0u);
  for (std::size_t k = 0; k < inst.mask_positions.size(); ++k)
    EXPECT_EQ(inst.mask_positions[k], inst.msp_targets[k].index);
}

TEST(BuildPretrainInstance, SwapSetsLabel) {
  const auto a = three_token_b();
  Rng r1(5), r2(5);
  const auto plain = build_pretrain_instance(a, a, false, {}, r1, 20);
  const auto swapped = build_pretrain_instance(a, a, true, {}, r2, 20);
  EXPECT_EQ(swapped.sop_label, SopLabel::swapped);
  auto x = plain.token_ids, y = swapped.token_ids;
  EXPECT_EQ(x, y);
  EXPECT_NE(plain.sop_label, swapped.sop_label);
}

TEST(BuildPretrainInstance, TruncatesAtSegmentBoundaries) {
  const auto a = lbt::research_lattice();
  const auto b = lbt::research_lattice();
  InstanceConfig cfg;
  cfg.token_cap = 3 + 11 + 7;  // room for the first segment of B only
  Rng rng(1);
  const auto inst = build_pretrain_instance(a, b, false, cfg, rng, 20);
  EXPECT_EQ(inst.size(), 21u);
  EXPECT_EQ(inst.n_chars, 7 + 4);

  cfg.token_cap = 3 + 7 + 7;  // both trimmed to the first segment
  const auto tiny = build_pretrain_instance(a, b, false, cfg, rng, 20);
  EXPECT_EQ(tiny.size(), 17u);
  EXPECT_EQ(count_leaks(tiny), 0u);

  cfg.token_cap = 10;
  EXPECT_THROW(build_pretrain_instance(a, b, false, cfg, rng, 20), ShapeError);
}

TEST(InstanceSerialization, RoundTripsBothFormats) {
  Rng rng(3);
  std::vector<PretrainInstance> insts{build_pretrain_instance(lbt::research_lattice(), three_token_b(), true, {}, rng, 20),
                                      build_pretrain_instance(three_token_b(), three_token_b(), false, {}, rng, 20)};
  for (auto format : {InstanceFormat::text, InstanceFormat::binary}) {
    std::stringstream ss;
    InstanceWriter writer(ss, format);
    for (const auto& i : insts) writer.write(i);
    EXPECT_EQ(read_instances(ss), insts);
  }
  std::istringstream bad("{\"schema_version\":9}\n");
  EXPECT_THROW(read_instances(bad), FormatError);
}

TEST(Packing, PhasePresets) {
  EXPECT_EQ(phase_preset(1).char_budget, 128u);
  EXPECT_EQ(phase_preset(1).token_cap, 173u);
  EXPECT_EQ(phase_preset(2).char_budget, 512u);
  EXPECT_EQ(phase_preset(2).token_cap, 692u);
  EXPECT_THROW(phase_preset(3), ShapeError);
}

TEST(Packing, GreedyFill) {
  const std::vector<std::u32string> sentences(3, std::u32string(50, U'天'));
  const auto chunks = pack_sentences(sentences, 128);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].size(), 2u);
  EXPECT_EQ(chunks[1].size(), 1u);
}

TEST(Packing, SplitsOverlongSentence) {
  PackingStats stats;
  const auto chunks = pack_sentences({std::u32string(300, U'天')}, 128, &stats);
  EXPECT_EQ(stats.split_sentences, 1u);
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[2].front().size(), 44u);
}

TEST(Packing, RejectsBadMaskRatio) {
  const auto vocab = lbt::research_vocab();
  const auto matcher = compile_matcher(vocab);
  EXPECT_THROW(InstanceGenerator(vocab, matcher, {kPhase1, 0.0, {}}), ShapeError);
  EXPECT_THROW(InstanceGenerator(vocab, matcher, {kPhase1, 1.0, {}}), ShapeError);
}

TEST(Packing, InstancesRespectCapAndAreDeterministic) {
  Rng gen(12);
  const auto rv = lbt::random_vocab(gen, 20, 50, 4, 20);
  const auto matcher = compile_matcher(rv.vocab);
  std::vector<std::vector<std::u32string>> docs;
  for (int d = 0; d < 20; ++d) {
    std::vector<std::u32string> doc;
    for (int s = 0; s < 12; ++s) doc.push_back(lbt::random_text(gen, 5, 60, 20) + U"。");
    docs.push_back(doc);
  }
  for (int phase : {1, 2}) {
    const GeneratorConfig cfg{phase_preset(phase), 0.15, {}};
    const auto x = pack_to_budget(docs, rv.vocab, matcher, cfg, 99);
    const auto y = pack_to_budget(docs, rv.vocab, matcher, cfg, 99);
    EXPECT_EQ(x, y);
    for (const auto& inst : x) {
      EXPECT_LE(inst.size(), cfg.phase.token_cap);
      EXPECT_LE(static_cast<std::size_t>(inst.n_chars), cfg.phase.char_budget);
      EXPECT_EQ(count_leaks(inst), 0u);
    }
  }
}

}  // namespace
