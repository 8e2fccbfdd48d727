#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "instance.hpp"
#include "lattice.hpp"
#include "rng.hpp"
#include "segment.hpp"
#include "vocabulary.hpp"

namespace lattice_bert {

// Paired (character budget, token cap) presets. The cap is 35% above the
// character budget to make room for word-level lattice tokens.
struct PhasePreset {
  std::size_t char_budget;
  std::size_t token_cap;
};

inline constexpr PhasePreset kPhase1{128, 173};
inline constexpr PhasePreset kPhase2{512, 692};

inline PhasePreset phase_preset(int phase) {
  if (phase == 1) return kPhase1;
  if (phase == 2) return kPhase2;
  throw ShapeError("unknown phase " + std::to_string(phase) + " (expected 1 or 2)");
}

struct PackingStats {
  std::size_t sentences = 0;
  std::size_t split_sentences = 0;     // longer than the character budget
  std::size_t unsplittable_chunks = 0; // one sentence with a single segment
  std::size_t instances = 0;
  std::size_t tokens = 0;              // lattice tokens, specials excluded
  std::size_t targets = 0;

  PackingStats& operator+=(const PackingStats& o) {
    sentences += o.sentences;
    split_sentences += o.split_sentences;
    unsplittable_chunks += o.unsplittable_chunks;
    instances += o.instances;
    tokens += o.tokens;
    targets += o.targets;
    return *this;
  }
};

// Greedy packing of consecutive sentences of one document into chunks of at
// most char_budget characters. A sentence longer than the budget is cut into
// budget-sized pieces first.
inline std::vector<std::vector<std::u32string>> pack_sentences(const std::vector<std::u32string>& sentences,
                                                               std::size_t char_budget, PackingStats* stats = nullptr) {
  std::vector<std::vector<std::u32string>> chunks;
  std::vector<std::u32string> current;
  std::size_t chars = 0;
  auto flush = [&] {
    if (!current.empty()) chunks.push_back(std::move(current));
    current.clear();
    chars = 0;
  };
  for (const auto& sentence : sentences) {
    if (sentence.empty()) continue;
    if (stats) ++stats->sentences;
    std::vector<std::u32string> pieces;
    if (sentence.size() > char_budget) {
      if (stats) ++stats->split_sentences;
      for (std::size_t i = 0; i < sentence.size(); i += char_budget) pieces.push_back(sentence.substr(i, char_budget));
    } else {
      pieces.push_back(sentence);
    }
    for (auto& piece : pieces) {
      if (chars + piece.size() > char_budget) flush();
      chars += piece.size();
      current.push_back(std::move(piece));
    }
  }
  flush();
  return chunks;
}

struct GeneratorConfig {
  PhasePreset phase = kPhase1;
  double mask_ratio = 0.15;
  MaskPolicy policy{};
};

// Turns documents into pre-training instances. Each packed chunk is split
// into two parts: at a random sentence boundary when the chunk has several
// sentences, otherwise at the segment boundary nearest the middle. The
// order of the parts is swapped with probability 1/2.
class InstanceGenerator {
 public:
  InstanceGenerator(const Vocabulary& vocab, const PatternMatcher& matcher, GeneratorConfig cfg)
      : vocab_(vocab), matcher_(matcher), cfg_(cfg) {
    if (!(cfg_.mask_ratio > 0.0 && cfg_.mask_ratio < 1.0)) throw ShapeError("mask ratio must lie in (0, 1)");
  }

  template <typename Sink>
  void process_document(const std::vector<std::u32string>& sentences, Rng& rng, Sink&& sink) {
    for (const auto& chunk : pack_sentences(sentences, cfg_.phase.char_budget, &stats_)) {
      Lattice a;
      Lattice b;
      if (chunk.size() >= 2) {
        const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform_index(chunk.size() - 1));
        std::u32string left;
        std::u32string right;
        for (std::size_t i = 0; i < chunk.size(); ++i) (i < k ? left : right) += chunk[i];
        a = build_lattice(std::u32string_view(left), matcher_, vocab_);
        b = build_lattice(std::u32string_view(right), matcher_, vocab_);
      } else {
        const auto whole = build_lattice(std::u32string_view(chunk.front()), matcher_, vocab_);
        const auto segs = detect_segments(whole);
        if (segs.size() < 2) {
          ++stats_.unsplittable_chunks;
          continue;
        }
        std::size_t cut = 1;
        std::int32_t best = INT32_MAX;
        for (std::size_t i = 1; i < segs.size(); ++i) {
          const std::int32_t dist = std::abs(2 * segs[i - 1].char_span.end - whole.n_chars);
          if (dist < best) best = dist, cut = i;
        }
        a = slice_segments(whole, segs, 0, cut);
        b = slice_segments(whole, segs, cut, segs.size());
      }
      const bool swap = rng.bernoulli(0.5);
      InstanceConfig icfg{cfg_.phase.token_cap, cfg_.mask_ratio, cfg_.policy};
      auto inst = build_pretrain_instance(a, b, swap, icfg, rng, vocab_.size());
      ++stats_.instances;
      stats_.tokens += inst.size() - 3;
      stats_.targets += inst.msp_targets.size();
      sink(std::move(inst));
    }
  }

  const PackingStats& stats() const { return stats_; }

 private:
  const Vocabulary& vocab_;
  const PatternMatcher& matcher_;
  GeneratorConfig cfg_;
  PackingStats stats_;
};

// Convenience wrapper over a whole document stream.
template <typename DocumentRange>
std::vector<PretrainInstance> pack_to_budget(const DocumentRange& documents, const Vocabulary& vocab,
                                             const PatternMatcher& matcher, const GeneratorConfig& cfg,
                                             std::uint64_t seed, PackingStats* stats = nullptr) {
  InstanceGenerator gen(vocab, matcher, cfg);
  Rng rng(seed);
  std::vector<PretrainInstance> out;
  for (const auto& doc : documents) gen.process_document(doc, rng, [&out](PretrainInstance inst) { out.push_back(std::move(inst)); });
  if (stats) *stats = gen.stats();
  return out;
}

}  // namespace lattice_bert
