#pragma once

#include <cstdint>
#include <deque>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lattice_bert {

// One occurrence of a pattern: zero-based offset of the first character,
// length in characters, and the caller-supplied pattern value.
struct PatternMatch {
  std::size_t start = 0;
  std::size_t length = 0;
  std::int32_t value = -1;
};

// Aho-Corasick automaton over code points. Scanning a text of length N
// costs O(N + number of matches). Immutable once built.
class AhoCorasick {
 public:
  AhoCorasick() { nodes_.emplace_back(); }

  // Builder-side insertion; call finalize() before matching.
  void add(std::u32string_view pattern, std::int32_t value) {
    if (pattern.empty()) return;
    std::uint32_t node = 0;
    for (char32_t c : pattern) {
      const auto key = edge_key(node, c);
      auto it = edges_.find(key);
      if (it == edges_.end()) {
        const auto child = static_cast<std::uint32_t>(nodes_.size());
        nodes_.emplace_back();
        nodes_.back().depth = nodes_[node].depth + 1;
        edges_.emplace(key, child);
        children_of(node).push_back({c, child});
        node = child;
      } else {
        node = it->second;
      }
    }
    if (nodes_[node].value < 0) ++pattern_count_;
    nodes_[node].value = value;
  }

  void finalize() {
    std::deque<std::uint32_t> queue;
    for (auto [c, child] : children_of(0)) {
      nodes_[child].fail = 0;
      queue.push_back(child);
    }
    while (!queue.empty()) {
      const auto node = queue.front();
      queue.pop_front();
      for (auto [c, child] : children_of(node)) {
        std::uint32_t f = nodes_[node].fail;
        while (true) {
          auto it = edges_.find(edge_key(f, c));
          if (it != edges_.end()) {
            nodes_[child].fail = it->second;
            break;
          }
          if (f == 0) {
            nodes_[child].fail = 0;
            break;
          }
          f = nodes_[f].fail;
        }
        const auto fail = nodes_[child].fail;
        nodes_[child].output = nodes_[fail].value >= 0 ? fail : nodes_[fail].output;
        queue.push_back(child);
      }
    }
    children_.clear();
    children_.shrink_to_fit();
  }

  // Invokes fn(PatternMatch) for every occurrence, ordered by end position,
  // longest first among matches ending at the same character.
  template <typename Fn>
  void for_each_match(std::u32string_view text, Fn&& fn) const {
    std::uint32_t node = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      const char32_t c = text[i];
      while (true) {
        auto it = edges_.find(edge_key(node, c));
        if (it != edges_.end()) {
          node = it->second;
          break;
        }
        if (node == 0) break;
        node = nodes_[node].fail;
      }
      for (std::uint32_t out = nodes_[node].value >= 0 ? node : nodes_[node].output; out != 0;
           out = nodes_[out].output) {
        const auto& hit = nodes_[out];
        fn(PatternMatch{i + 1 - hit.depth, hit.depth, hit.value});
      }
    }
  }

  std::vector<PatternMatch> find_all(std::u32string_view text) const {
    std::vector<PatternMatch> out;
    for_each_match(text, [&out](const PatternMatch& m) { out.push_back(m); });
    return out;
  }

  std::size_t pattern_count() const { return pattern_count_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::uint32_t fail = 0;
    std::uint32_t output = 0;  // nearest terminal proper suffix; 0 when none
    std::uint32_t depth = 0;
    std::int32_t value = -1;
  };
  struct Child {
    char32_t c;
    std::uint32_t node;
  };

  static std::uint64_t edge_key(std::uint32_t node, char32_t c) {
    return (static_cast<std::uint64_t>(node) << 21) | static_cast<std::uint64_t>(c & 0x1FFFFF);
  }

  std::vector<Child>& children_of(std::uint32_t node) {
    if (children_.size() <= node) children_.resize(node + 1);
    return children_[node];
  }

  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, std::uint32_t> edges_;
  std::vector<std::vector<Child>> children_;  // only needed while building
  std::size_t pattern_count_ = 0;
};

}  // namespace lattice_bert
