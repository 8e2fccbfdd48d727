#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "lattice_bert/lattice.hpp"
#include "lattice_bert/rng.hpp"
#include "lattice_bert/segment.hpp"
#include "lattice_bert/vocabulary.hpp"

namespace lbt {

using namespace lattice_bert;

inline constexpr std::u32string_view kResearchText = U"研究生活很充实";

inline Vocabulary research_vocab() {
  Vocabulary vocab;
  for (char32_t c : kResearchText) vocab.add({std::u32string(1, c), 1, Granularity::character});
  for (auto w : {U"研究", U"研究生", U"生活", U"充实"}) vocab.add({w, 1, Granularity::word});
  return vocab;
}

inline Lattice research_lattice() {
  static const Vocabulary vocab = research_vocab();
  static const PatternMatcher matcher = compile_matcher(vocab);
  return build_lattice(kResearchText, matcher, vocab);
}

// Twenty CJK characters used by the random generators.
inline constexpr std::u32string_view kAlphabet = U"天地人和日月山水火木金土风云雨雪花草鸟鱼";

struct RandomVocab {
  Vocabulary vocab;
  std::vector<std::u32string> words;
};

// Characters alphabet[0, n_chars) plus up to max_words random words of
// length 1..max_len drawn over the same characters.
inline RandomVocab random_vocab(Rng& rng, std::size_t n_chars, std::size_t max_words, std::size_t max_len,
                                std::size_t alphabet = 8) {
  RandomVocab out;
  for (std::size_t i = 0; i < n_chars; ++i) out.vocab.add({std::u32string(1, kAlphabet[i]), 1, Granularity::character});
  const auto n_words = rng.uniform_index(max_words + 1);
  for (std::size_t w = 0; w < n_words; ++w) {
    const auto len = 1 + rng.uniform_index(max_len);
    std::u32string word;
    for (std::size_t k = 0; k < len; ++k) word.push_back(kAlphabet[rng.uniform_index(alphabet)]);
    out.vocab.add({word, 1, len == 1 ? Granularity::character : Granularity::word});
    out.words.push_back(word);
  }
  return out;
}

inline std::u32string random_text(Rng& rng, std::size_t min_len, std::size_t max_len, std::size_t alphabet = 8) {
  const auto len = min_len + rng.uniform_index(max_len - min_len + 1);
  std::u32string text;
  for (std::size_t k = 0; k < len; ++k) text.push_back(kAlphabet[rng.uniform_index(alphabet)]);
  return text;
}

// Brute force: every substring of length >= 2 that is a word entry, plus
// one token per character. Sorted by span.
inline std::vector<LatticeToken> brute_force_lattice(std::u32string_view text, const Vocabulary& vocab) {
  std::vector<LatticeToken> out;
  const auto n = static_cast<std::int32_t>(text.size());
  for (std::int32_t s = 1; s <= n; ++s) {
    for (std::int32_t e = s; e <= n; ++e) {
      const auto surface = std::u32string(text.substr(static_cast<std::size_t>(s - 1), static_cast<std::size_t>(e - s + 1)));
      if (s == e) {
        out.push_back({surface, {s, e}, Granularity::character, vocab.id_or_unk(surface)});
        continue;
      }
      const auto id = vocab.find(surface);
      if (id && vocab.entry(*id).flag == Granularity::word) out.push_back({surface, {s, e}, Granularity::word, *id});
    }
  }
  return out;
}

// Connected components of the "shares a character" graph, via union-find.
// Each component is returned as sorted token indices; components ordered by
// smallest index.
inline std::vector<std::vector<std::size_t>> overlap_components(const std::vector<LatticeToken>& tokens) {
  std::vector<std::size_t> parent(tokens.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (std::size_t j = i + 1; j < tokens.size(); ++j)
      if (tokens[i].span.start <= tokens[j].span.end && tokens[j].span.start <= tokens[i].span.end)
        parent[find(i)] = find(j);
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < tokens.size(); ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  std::sort(out.begin(), out.end());
  return out;
}

// All segmentation paths (token sequences tiling 1..n_chars), as index lists.
inline std::vector<std::vector<std::size_t>> segmentation_paths(const Lattice& lattice) {
  std::vector<std::vector<std::size_t>> paths;
  std::vector<std::size_t> current;
  std::function<void(std::int32_t)> walk = [&](std::int32_t pos) {
    if (pos > lattice.n_chars) {
      paths.push_back(current);
      return;
    }
    for (std::size_t i = 0; i < lattice.tokens.size(); ++i) {
      if (lattice.tokens[i].span.start != pos) continue;
      current.push_back(i);
      walk(lattice.tokens[i].span.end + 1);
      current.pop_back();
    }
  };
  walk(1);
  return paths;
}

}  // namespace lbt
