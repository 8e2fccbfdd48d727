#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aho_corasick.hpp"
#include "errors.hpp"
#include "utf8.hpp"
#include "vocabulary.hpp"

namespace lattice_bert {

// Closed character interval, 1-based: a token covering the first two
// characters has start 1 and end 2.
struct Span {
  std::int32_t start = 1;
  std::int32_t end = 1;

  constexpr std::int32_t length() const { return end - start + 1; }
  constexpr bool valid() const { return 1 <= start && start <= end; }
  friend constexpr auto operator<=>(const Span&, const Span&) = default;
};

struct LatticeToken {
  std::u32string surface;
  Span span;
  Granularity granularity = Granularity::character;
  TokenId id = Vocabulary::kUnk;

  friend bool operator==(const LatticeToken&, const LatticeToken&) = default;
};

struct Lattice {
  std::u32string text;
  std::vector<LatticeToken> tokens;  // sorted by (start, end), one token per span
  std::int32_t n_chars = 0;

  friend bool operator==(const Lattice&, const Lattice&) = default;
};

// Automaton over the multi-character word entries of a vocabulary. Single
// characters come from the backbone and word-pieces from the non-Chinese
// tokenizer, so neither is compiled in.
class PatternMatcher {
 public:
  PatternMatcher() { automaton_.finalize(); }
  explicit PatternMatcher(AhoCorasick automaton) : automaton_(std::move(automaton)) {}

  // Spans are 1-based closed intervals; value is the vocabulary id.
  template <typename Fn>
  void for_each_match(std::u32string_view text, Fn&& fn) const {
    automaton_.for_each_match(text, [&fn](const PatternMatch& m) {
      fn(Span{static_cast<std::int32_t>(m.start + 1), static_cast<std::int32_t>(m.start + m.length)},
         static_cast<TokenId>(m.value));
    });
  }

  std::size_t pattern_count() const { return automaton_.pattern_count(); }

 private:
  AhoCorasick automaton_;
};

inline PatternMatcher compile_matcher(const Vocabulary& vocab) {
  AhoCorasick automaton;
  const auto& entries = vocab.entries();
  for (std::size_t id = 0; id < entries.size(); ++id) {
    const auto& e = entries[id];
    if (e.flag == Granularity::word && e.surface.size() >= 2) automaton.add(e.surface, static_cast<TokenId>(id));
  }
  automaton.finalize();
  return PatternMatcher(std::move(automaton));
}

// Greedy longest-match tiling of a Latin/digit run. Positions without any
// covering entry fall back to single characters (UNK when unknown).
inline std::vector<LatticeToken> segment_non_chinese(std::u32string_view span, const Vocabulary& vocab) {
  std::vector<LatticeToken> out;
  const std::size_t max_len = std::max<std::size_t>(1, vocab.max_surface_length());
  std::size_t i = 0;
  while (i < span.size()) {
    std::size_t len = std::min(max_len, span.size() - i);
    std::optional<TokenId> hit;
    for (; len >= 2; --len) {
      hit = vocab.find(span.substr(i, len));
      if (hit && vocab.entry(*hit).flag != Granularity::special) break;
      hit.reset();
    }
    if (!hit) {
      len = 1;
      hit = vocab.id_or_unk(span.substr(i, 1));
    }
    LatticeToken token;
    token.surface = std::u32string(span.substr(i, len));
    token.span = {static_cast<std::int32_t>(i + 1), static_cast<std::int32_t>(i + len)};
    token.granularity = len == 1 ? Granularity::character : Granularity::word_piece;
    token.id = *hit;
    out.push_back(std::move(token));
    i += len;
  }
  return out;
}

// Every vocabulary word occurring in the text plus the character backbone,
// with Latin/digit runs tokenized by segment_non_chinese.
inline Lattice build_lattice(std::u32string_view text, const PatternMatcher& matcher, const Vocabulary& vocab) {
  if (text.empty()) throw EmptyInput();
  const auto n = static_cast<std::int32_t>(text.size());

  // run_id[p] > 0 marks membership of the p-th (0-based) character in a Latin/digit run.
  std::vector<std::int32_t> run_id(text.size(), 0);
  std::vector<LatticeToken> tokens;
  tokens.reserve(text.size() * 2);
  std::int32_t runs = 0;
  for (std::size_t p = 0; p < text.size();) {
    if (!is_latin_alnum(text[p])) {
      LatticeToken token;
      token.surface = std::u32string(1, text[p]);
      token.span = {static_cast<std::int32_t>(p + 1), static_cast<std::int32_t>(p + 1)};
      token.id = vocab.id_or_unk(token.surface);
      tokens.push_back(std::move(token));
      ++p;
      continue;
    }
    std::size_t q = p;
    ++runs;
    while (q < text.size() && is_latin_alnum(text[q])) run_id[q++] = runs;
    for (auto& piece : segment_non_chinese(text.substr(p, q - p), vocab)) {
      piece.span.start += static_cast<std::int32_t>(p);
      piece.span.end += static_cast<std::int32_t>(p);
      tokens.push_back(std::move(piece));
    }
    p = q;
  }

  std::set<std::pair<std::int32_t, std::int32_t>> seen;
  for (const auto& t : tokens) seen.emplace(t.span.start, t.span.end);

  auto inside_run = [&](std::int32_t a, std::int32_t b) {  // 1-based neighbours share one run
    return a >= 1 && b <= n && run_id[a - 1] != 0 && run_id[a - 1] == run_id[b - 1];
  };
  matcher.for_each_match(text, [&](Span span, TokenId id) {
    if (inside_run(span.start - 1, span.start) || inside_run(span.end, span.end + 1)) return;
    if (!seen.emplace(span.start, span.end).second) return;
    LatticeToken token;
    token.surface = std::u32string(text.substr(span.start - 1, span.length()));
    token.span = span;
    token.granularity = Granularity::word;
    token.id = id;
    tokens.push_back(std::move(token));
  });

  std::sort(tokens.begin(), tokens.end(), [](const LatticeToken& a, const LatticeToken& b) { return a.span < b.span; });
  return Lattice{std::u32string(text), std::move(tokens), n};
}

// Normalizes raw bytes first; EmptyInput when nothing survives.
inline Lattice build_lattice(std::string_view raw, const PatternMatcher& matcher, const Vocabulary& vocab) {
  return build_lattice(std::u32string_view(normalize_text(raw).text), matcher, vocab);
}

// {"text": ..., "tokens": [{"surface","s","e","gran","id"}, ...]} on one line.
inline std::string lattice_to_json(const Lattice& lattice) {
  nlohmann::ordered_json record;
  record["text"] = to_utf8(lattice.text);
  auto tokens = nlohmann::ordered_json::array();
  for (const auto& t : lattice.tokens) {
    nlohmann::ordered_json tok;
    tok["surface"] = to_utf8(t.surface);
    tok["s"] = t.span.start;
    tok["e"] = t.span.end;
    tok["gran"] = granularity_name(t.granularity);
    tok["id"] = t.id;
    tokens.push_back(std::move(tok));
  }
  record["tokens"] = std::move(tokens);
  return record.dump();
}

inline Lattice lattice_from_json(std::string_view line) {
  try {
    const auto record = nlohmann::json::parse(line);
    Lattice lattice;
    lattice.text = from_utf8(record.at("text").get<std::string>());
    lattice.n_chars = static_cast<std::int32_t>(lattice.text.size());
    for (const auto& tok : record.at("tokens")) {
      LatticeToken t;
      t.surface = from_utf8(tok.at("surface").get<std::string>());
      t.span = {tok.at("s").get<std::int32_t>(), tok.at("e").get<std::int32_t>()};
      auto gran = parse_granularity(tok.at("gran").get<std::string>());
      if (!gran) throw FormatError("lattice record: unknown granularity");
      t.granularity = *gran;
      t.id = tok.at("id").get<TokenId>();
      lattice.tokens.push_back(std::move(t));
    }
    return lattice;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("lattice record: ") + e.what());
  }
}

}  // namespace lattice_bert
