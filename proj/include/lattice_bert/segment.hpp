#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "lattice.hpp"
#include "rng.hpp"
#include "vocabulary.hpp"

namespace lattice_bert {

// Minimal group of lattice tokens that no outside token overlaps.
struct Segment {
  std::vector<std::size_t> token_indices;
  Span char_span;

  std::size_t size() const { return token_indices.size(); }
  friend bool operator==(const Segment&, const Segment&) = default;
};

// Walks the characters in order and closes a segment at character p when
// every token that started at or before p has ended by p. Requires tokens
// sorted by start and tiling the text, which build_lattice guarantees.
inline std::vector<Segment> detect_segments(const Lattice& lattice) {
  std::vector<Segment> segments;
  Segment current;
  std::int32_t reach = 0;
  std::size_t next = 0;
  const auto& tokens = lattice.tokens;
  for (std::int32_t p = 1; p <= lattice.n_chars; ++p) {
    for (; next < tokens.size() && tokens[next].span.start == p; ++next) {
      if (current.token_indices.empty()) current.char_span.start = p;
      current.token_indices.push_back(next);
      reach = std::max(reach, tokens[next].span.end);
    }
    if (reach == p && !current.token_indices.empty()) {
      current.char_span.end = p;
      segments.push_back(std::move(current));
      current = Segment{};
    }
  }
  return segments;
}

// Shuffles the segments and takes a prefix until the masked token count
// first reaches ratio * total tokens. At least one segment is taken.
inline std::vector<Segment> select_mask_segments(std::span<const Segment> segments, double ratio, Rng& rng) {
  std::vector<Segment> selected;
  if (segments.empty()) return selected;
  std::size_t total = 0;
  for (const auto& s : segments) total += s.size();
  const double budget = ratio * static_cast<double>(total);

  std::vector<std::size_t> order(segments.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::size_t taken = 0;
  for (auto idx : order) {
    selected.push_back(segments[idx]);
    taken += segments[idx].size();
    if (static_cast<double>(taken) >= budget) break;
  }
  return selected;
}

// Per-token corruption inside a selected segment: replace with [MASK] with
// probability mask_prob, with a random non-special id with probability
// random_prob, otherwise keep.
struct MaskPolicy {
  double mask_prob = 0.8;
  double random_prob = 0.1;
};

struct MspTarget {
  std::int32_t index = 0;
  TokenId original = 0;

  friend bool operator==(const MspTarget&, const MspTarget&) = default;
};

struct MaskedTokens {
  std::vector<TokenId> ids;
  std::vector<MspTarget> targets;  // ascending by index
};

// Segment token indices must already be positions in `ids`.
inline MaskedTokens apply_msp_mask(std::span<const TokenId> ids, std::span<const Segment> selected, Rng& rng,
                                   std::size_t vocab_size, const MaskPolicy& policy = {}) {
  MaskedTokens out{std::vector<TokenId>(ids.begin(), ids.end()), {}};
  std::vector<std::size_t> positions;
  for (const auto& seg : selected) positions.insert(positions.end(), seg.token_indices.begin(), seg.token_indices.end());
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()), positions.end());

  const auto n_regular = vocab_size > static_cast<std::size_t>(Vocabulary::kNumSpecials)
                             ? vocab_size - static_cast<std::size_t>(Vocabulary::kNumSpecials)
                             : 0;
  for (auto pos : positions) {
    out.targets.push_back({static_cast<std::int32_t>(pos), ids[pos]});
    const double u = rng.uniform();
    if (u < policy.mask_prob) {
      out.ids[pos] = Vocabulary::kMask;
    } else if (u < policy.mask_prob + policy.random_prob && n_regular > 0) {
      out.ids[pos] = static_cast<TokenId>(Vocabulary::kNumSpecials + rng.uniform_index(n_regular));
    }
  }
  return out;
}

}  // namespace lattice_bert
