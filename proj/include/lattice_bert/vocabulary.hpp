#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "utf8.hpp"

namespace lattice_bert {

using TokenId = std::int32_t;

enum class Granularity : std::uint8_t { character, word, word_piece, special };

inline std::string_view granularity_name(Granularity g) {
  switch (g) {
    case Granularity::character: return "char";
    case Granularity::word: return "word";
    case Granularity::word_piece: return "piece";
    case Granularity::special: return "special";
  }
  return "?";
}

inline std::optional<Granularity> parse_granularity(std::string_view name) {
  if (name == "char") return Granularity::character;
  if (name == "word") return Granularity::word;
  if (name == "piece") return Granularity::word_piece;
  if (name == "special") return Granularity::special;
  return std::nullopt;
}

struct VocabEntry {
  std::u32string surface;
  std::uint64_t frequency = 0;
  Granularity flag = Granularity::character;
};

// Dense id table. Ids 0-4 are the reserved specials; the rest follow
// insertion order, which is also file line order.
class Vocabulary {
 public:
  static constexpr TokenId kCls = 0;
  static constexpr TokenId kSep = 1;
  static constexpr TokenId kMask = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kPad = 4;
  static constexpr TokenId kNumSpecials = 5;

  Vocabulary() {
    static constexpr std::array<std::u32string_view, kNumSpecials> names{U"[CLS]", U"[SEP]", U"[MASK]",
                                                                         U"[UNK]", U"[PAD]"};
    for (auto name : names) insert({std::u32string(name), 0, Granularity::special});
  }

  // Returns the existing id when the surface is already present.
  TokenId add(VocabEntry entry) {
    if (auto id = find(entry.surface)) return *id;
    return insert(std::move(entry));
  }

  std::optional<TokenId> find(std::u32string_view surface) const {
    auto it = index_.find(std::u32string(surface));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  TokenId id_or_unk(std::u32string_view surface) const { return find(surface).value_or(kUnk); }

  const VocabEntry& entry(TokenId id) const { return entries_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<VocabEntry>& entries() const { return entries_; }
  std::size_t max_surface_length() const { return max_surface_length_; }

  std::size_t count(Granularity flag) const {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [flag](const VocabEntry& e) { return e.flag == flag; }));
  }

  // One "surface<TAB>frequency<TAB>flag" line per non-special entry.
  void save(std::ostream& out) const {
    for (std::size_t i = kNumSpecials; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      out << to_utf8(e.surface) << '\t' << e.frequency << '\t' << granularity_name(e.flag) << '\n';
    }
  }

  static Vocabulary load(std::istream& in) {
    Vocabulary vocab;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto t1 = line.find('\t');
      const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
      if (t2 == std::string::npos) throw FormatError("vocabulary line " + std::to_string(line_no) + ": expected 3 fields");
      VocabEntry entry;
      auto decoded = decode_utf8(std::string_view(line).substr(0, t1));
      if (decoded.invalid_bytes != 0 || decoded.text.empty())
        throw FormatError("vocabulary line " + std::to_string(line_no) + ": bad surface");
      entry.surface = std::move(decoded.text);
      const char* first = line.data() + t1 + 1;
      const char* last = line.data() + t2;
      if (auto [ptr, ec] = std::from_chars(first, last, entry.frequency); ec != std::errc{} || ptr != last)
        throw FormatError("vocabulary line " + std::to_string(line_no) + ": bad frequency");
      auto flag = parse_granularity(std::string_view(line).substr(t2 + 1));
      if (!flag || *flag == Granularity::special)
        throw FormatError("vocabulary line " + std::to_string(line_no) + ": bad flag");
      entry.flag = *flag;
      if (vocab.find(entry.surface))
        throw FormatError("vocabulary line " + std::to_string(line_no) + ": duplicate surface");
      vocab.insert(std::move(entry));
    }
    return vocab;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      const auto& x = a.entries_[i];
      const auto& y = b.entries_[i];
      if (x.surface != y.surface || x.frequency != y.frequency || x.flag != y.flag) return false;
    }
    return true;
  }

 private:
  TokenId insert(VocabEntry entry) {
    const auto id = static_cast<TokenId>(entries_.size());
    index_.emplace(entry.surface, id);
    if (entry.flag != Granularity::special) max_surface_length_ = std::max(max_surface_length_, entry.surface.size());
    entries_.push_back(std::move(entry));
    return id;
  }

  std::vector<VocabEntry> entries_;
  std::unordered_map<std::u32string, TokenId> index_;
  std::size_t max_surface_length_ = 0;
};

// Word flag for surfaces containing Chinese, piece flag for pure Latin/digit
// surfaces, character flag for anything one character long.
inline Granularity classify_surface(std::u32string_view surface) {
  if (surface.size() == 1) return Granularity::character;
  if (std::all_of(surface.begin(), surface.end(), is_latin_alnum)) return Granularity::word_piece;
  return Granularity::word;
}

struct VocabularyDiagnostics {
  std::size_t records = 0;
  std::size_t rejected_records = 0;
};

// Character backbone from the corpus plus the max_words most frequent
// multi-character entries of word_frequencies. Both groups are ordered by
// (frequency desc, surface asc).
template <typename TextRange>
Vocabulary build_vocabulary(const TextRange& corpus, const std::map<std::u32string, std::uint64_t>& word_frequencies,
                            std::size_t max_words, VocabularyDiagnostics* diagnostics = nullptr) {
  VocabularyDiagnostics diag;
  std::map<std::u32string, std::uint64_t> char_counts;
  for (const auto& record : corpus) {
    ++diag.records;
    if (decode_utf8(std::string_view(record)).invalid_bytes != 0) {
      ++diag.rejected_records;
      continue;
    }
    for (char32_t c : normalize_text(record).text) {
      if (c == U' ') continue;
      ++char_counts[std::u32string(1, c)];
    }
  }

  using Item = std::pair<std::u32string, std::uint64_t>;
  auto by_frequency = [](const Item& a, const Item& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  };

  std::vector<Item> chars(char_counts.begin(), char_counts.end());
  std::sort(chars.begin(), chars.end(), by_frequency);

  std::vector<Item> words;
  for (const auto& [surface, freq] : word_frequencies) {
    if (surface.size() >= 2 && surface.find(U' ') == std::u32string::npos) words.emplace_back(surface, freq);
  }
  std::sort(words.begin(), words.end(), by_frequency);
  if (words.size() > max_words) words.resize(max_words);

  Vocabulary vocab;
  for (auto& [surface, freq] : chars) vocab.add({surface, freq, Granularity::character});
  for (auto& [surface, freq] : words) vocab.add({surface, freq, classify_surface(surface)});
  if (diagnostics) *diagnostics = diag;
  return vocab;
}

// Counts a word list. Lines of the form "word<TAB>count" add count; any other
// line is treated as pre-segmented text and each space-separated word adds 1.
inline std::map<std::u32string, std::uint64_t> read_word_frequencies(std::istream& in) {
  std::map<std::u32string, std::uint64_t> counts;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.find('\t');
    if (tab != std::string::npos) {
      const auto word = normalize_text(std::string_view(line).substr(0, tab)).text;
      std::uint64_t freq = 0;
      const char* first = line.data() + tab + 1;
      const char* last = line.data() + line.size();
      if (auto [ptr, ec] = std::from_chars(first, last, freq); ec != std::errc{} || ptr != last)
        throw FormatError("word list: bad frequency in line '" + line + "'");
      if (!word.empty()) counts[word] += freq;
      continue;
    }
    const auto text = normalize_text(line).text;
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find(U' ', start);
      if (end == std::u32string::npos) end = text.size();
      if (end > start) ++counts[text.substr(start, end - start)];
      start = end + 1;
    }
  }
  return counts;
}

}  // namespace lattice_bert
