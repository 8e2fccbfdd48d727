#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "lattice.hpp"
#include "rng.hpp"
#include "segment.hpp"
#include "vocabulary.hpp"

namespace lattice_bert {

enum class SopLabel : std::uint8_t { in_order = 0, swapped = 1 };

// Layout: [CLS] part-1 [SEP] part-2 [SEP]. [CLS] sits at position 0, text
// characters continue across both parts and each [SEP] takes one position.
struct PretrainInstance {
  std::vector<TokenId> token_ids;
  std::vector<std::int32_t> starts;
  std::vector<std::int32_t> ends;
  std::vector<std::int32_t> mask_positions;
  std::vector<MspTarget> msp_targets;
  SopLabel sop_label = SopLabel::in_order;
  std::int32_t n_chars = 0;

  std::size_t size() const { return token_ids.size(); }
  friend bool operator==(const PretrainInstance&, const PretrainInstance&) = default;
};

struct InstanceConfig {
  std::size_t token_cap = 173;
  double mask_ratio = 0.15;
  MaskPolicy policy{};
};

// Sub-lattice made of whole segments [first, last), rebased to position 1.
inline Lattice slice_segments(const Lattice& lattice, std::span<const Segment> segments, std::size_t first,
                              std::size_t last) {
  Lattice out;
  if (first >= last) return out;
  const auto begin = segments[first].char_span.start;
  const auto end = segments[last - 1].char_span.end;
  out.text = lattice.text.substr(static_cast<std::size_t>(begin - 1), static_cast<std::size_t>(end - begin + 1));
  out.n_chars = end - begin + 1;
  for (std::size_t s = first; s < last; ++s) {
    for (auto idx : segments[s].token_indices) {
      auto token = lattice.tokens[idx];
      token.span.start -= begin - 1;
      token.span.end -= begin - 1;
      out.tokens.push_back(std::move(token));
    }
  }
  std::sort(out.tokens.begin(), out.tokens.end(),
            [](const LatticeToken& a, const LatticeToken& b) { return a.span < b.span; });
  return out;
}

// Packs two lattices into one instance and applies segment masking. When
// the instance would exceed the token cap, whole trailing segments are
// dropped from sent_b, then from sent_a, keeping at least one segment each.
inline PretrainInstance build_pretrain_instance(const Lattice& sent_a, const Lattice& sent_b, bool swap,
                                                const InstanceConfig& cfg, Rng& rng, std::size_t vocab_size) {
  if (sent_a.tokens.empty() || sent_b.tokens.empty()) throw EmptyInput();
  auto segs_a = detect_segments(sent_a);
  auto segs_b = detect_segments(sent_b);
  std::size_t keep_a = segs_a.size();
  std::size_t keep_b = segs_b.size();
  auto count = [](const std::vector<Segment>& segs, std::size_t keep) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < keep; ++i) n += segs[i].size();
    return n;
  };
  std::size_t total = 3 + count(segs_a, keep_a) + count(segs_b, keep_b);
  while (total > cfg.token_cap) {
    if (keep_b > 1) {
      total -= segs_b[--keep_b].size();
    } else if (keep_a > 1) {
      total -= segs_a[--keep_a].size();
    } else {
      throw ShapeError("instance: a single segment pair exceeds the token cap");
    }
  }
  const Lattice a = keep_a == segs_a.size() ? sent_a : slice_segments(sent_a, segs_a, 0, keep_a);
  const Lattice b = keep_b == segs_b.size() ? sent_b : slice_segments(sent_b, segs_b, 0, keep_b);
  if (keep_a != segs_a.size()) segs_a = detect_segments(a);
  if (keep_b != segs_b.size()) segs_b = detect_segments(b);

  const Lattice& first = swap ? b : a;
  const Lattice& second = swap ? a : b;
  const auto& first_segs = swap ? segs_b : segs_a;
  const auto& second_segs = swap ? segs_a : segs_b;

  PretrainInstance inst;
  inst.sop_label = swap ? SopLabel::swapped : SopLabel::in_order;
  inst.n_chars = first.n_chars + second.n_chars;
  auto push = [&inst](TokenId id, std::int32_t s, std::int32_t e) {
    inst.token_ids.push_back(id);
    inst.starts.push_back(s);
    inst.ends.push_back(e);
  };

  std::vector<Segment> segments;
  auto append_part = [&](const Lattice& part, const std::vector<Segment>& segs, std::int32_t offset) {
    const std::size_t base = inst.token_ids.size();
    for (const auto& t : part.tokens) push(t.id, t.span.start + offset, t.span.end + offset);
    for (auto seg : segs) {
      for (auto& idx : seg.token_indices) idx += base;
      seg.char_span.start += offset;
      seg.char_span.end += offset;
      segments.push_back(std::move(seg));
    }
  };

  push(Vocabulary::kCls, 0, 0);
  append_part(first, first_segs, 0);
  push(Vocabulary::kSep, first.n_chars + 1, first.n_chars + 1);
  append_part(second, second_segs, first.n_chars + 1);
  push(Vocabulary::kSep, inst.n_chars + 2, inst.n_chars + 2);

  const auto selected = select_mask_segments(segments, cfg.mask_ratio, rng);
  auto masked = apply_msp_mask(inst.token_ids, selected, rng, vocab_size, cfg.policy);
  inst.token_ids = std::move(masked.ids);
  inst.msp_targets = std::move(masked.targets);
  for (const auto& t : inst.msp_targets) inst.mask_positions.push_back(t.index);
  return inst;
}

// Index of the [SEP] closing the first part, or size() when absent.
inline std::size_t first_separator(const PretrainInstance& inst) {
  for (std::size_t i = 1; i < inst.token_ids.size(); ++i) {
    if (inst.token_ids[i] == Vocabulary::kSep) return i;
  }
  return inst.token_ids.size();
}

// Counts (unmasked, target) token pairs inside one part whose spans share a
// character. Zero for every instance the generator produces.
inline std::size_t count_leaks(const PretrainInstance& inst) {
  const std::size_t sep = first_separator(inst);
  std::vector<bool> masked(inst.size(), false);
  for (const auto& t : inst.msp_targets) masked[static_cast<std::size_t>(t.index)] = true;
  std::size_t leaks = 0;
  for (const auto& t : inst.msp_targets) {
    const auto i = static_cast<std::size_t>(t.index);
    const bool part_i = i > sep;
    for (std::size_t j = 1; j < inst.size(); ++j) {
      if (masked[j] || j == sep || j + 1 == inst.size()) continue;
      if ((j > sep) != part_i) continue;
      if (inst.starts[j] <= inst.ends[i] && inst.starts[i] <= inst.ends[j]) ++leaks;
    }
  }
  return leaks;
}

// ---------------------------------------------------------------------------
// Serialization. Text files start with a JSON header line carrying
// "schema_version"; binary files start with the version byte followed by
// length-prefixed little-endian records.

inline constexpr std::uint8_t kInstanceSchemaVersion = 1;

enum class InstanceFormat { text, binary };

inline std::string instance_to_json(const PretrainInstance& inst) {
  nlohmann::ordered_json r;
  r["token_ids"] = inst.token_ids;
  r["s"] = inst.starts;
  r["e"] = inst.ends;
  r["mask_positions"] = inst.mask_positions;
  auto targets = nlohmann::ordered_json::array();
  for (const auto& t : inst.msp_targets) targets.push_back({t.index, t.original});
  r["msp_targets"] = std::move(targets);
  r["sop_label"] = static_cast<int>(inst.sop_label);
  r["n_chars"] = inst.n_chars;
  return r.dump();
}

inline PretrainInstance instance_from_json(std::string_view line) {
  try {
    const auto r = nlohmann::json::parse(line);
    PretrainInstance inst;
    inst.token_ids = r.at("token_ids").get<std::vector<TokenId>>();
    inst.starts = r.at("s").get<std::vector<std::int32_t>>();
    inst.ends = r.at("e").get<std::vector<std::int32_t>>();
    inst.mask_positions = r.at("mask_positions").get<std::vector<std::int32_t>>();
    for (const auto& t : r.at("msp_targets")) inst.msp_targets.push_back({t.at(0).get<std::int32_t>(), t.at(1).get<TokenId>()});
    const int label = r.at("sop_label").get<int>();
    if (label != 0 && label != 1) throw FormatError("instance record: bad sop_label");
    inst.sop_label = static_cast<SopLabel>(label);
    inst.n_chars = r.at("n_chars").get<std::int32_t>();
    if (inst.starts.size() != inst.token_ids.size() || inst.ends.size() != inst.token_ids.size())
      throw FormatError("instance record: misaligned span arrays");
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("instance record: ") + e.what());
  }
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}
inline void put_i32(std::string& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}
  std::uint32_t u32() {
    if (pos_ + 4 > bytes_.size()) throw FormatError("instance record: truncated");
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
    pos_ += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::uint8_t u8() {
    if (pos_ >= bytes_.size()) throw FormatError("instance record: truncated");
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string instance_to_bytes(const PretrainInstance& inst) {
  std::string payload;
  auto put_vec = [&payload](const std::vector<std::int32_t>& v) {
    detail::put_u32(payload, static_cast<std::uint32_t>(v.size()));
    for (auto x : v) detail::put_i32(payload, x);
  };
  put_vec(inst.token_ids);
  for (auto x : inst.starts) detail::put_i32(payload, x);
  for (auto x : inst.ends) detail::put_i32(payload, x);
  put_vec(inst.mask_positions);
  detail::put_u32(payload, static_cast<std::uint32_t>(inst.msp_targets.size()));
  for (const auto& t : inst.msp_targets) {
    detail::put_i32(payload, t.index);
    detail::put_i32(payload, t.original);
  }
  payload.push_back(static_cast<char>(inst.sop_label));
  detail::put_i32(payload, inst.n_chars);
  std::string record;
  detail::put_u32(record, static_cast<std::uint32_t>(payload.size()));
  record += payload;
  return record;
}

inline PretrainInstance instance_from_bytes(std::string_view payload) {
  detail::ByteReader in(payload);
  PretrainInstance inst;
  auto read_vec = [&in](std::size_t n) {
    std::vector<std::int32_t> v(n);
    for (auto& x : v) x = in.i32();
    return v;
  };
  const std::size_t n = in.u32();
  inst.token_ids = read_vec(n);
  inst.starts = read_vec(n);
  inst.ends = read_vec(n);
  inst.mask_positions = read_vec(in.u32());
  const std::size_t n_targets = in.u32();
  for (std::size_t i = 0; i < n_targets; ++i) {
    const auto index = in.i32();
    inst.msp_targets.push_back({index, in.i32()});
  }
  const auto label = in.u8();
  if (label > 1) throw FormatError("instance record: bad sop_label");
  inst.sop_label = static_cast<SopLabel>(label);
  inst.n_chars = in.i32();
  if (!in.done()) throw FormatError("instance record: trailing bytes");
  return inst;
}

class InstanceWriter {
 public:
  InstanceWriter(std::ostream& out, InstanceFormat format) : out_(out), format_(format) {
    if (format_ == InstanceFormat::text) {
      out_ << R"({"schema_version":1,"kind":"pretrain_instances"})" << '\n';
    } else {
      out_.put(static_cast<char>(kInstanceSchemaVersion));
    }
  }

  void write(const PretrainInstance& inst) {
    if (format_ == InstanceFormat::text) {
      out_ << instance_to_json(inst) << '\n';
    } else {
      const auto bytes = instance_to_bytes(inst);
      out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
  }

 private:
  std::ostream& out_;
  InstanceFormat format_;
};

// Detects the format from the first byte.
inline std::vector<PretrainInstance> read_instances(std::istream& in) {
  std::vector<PretrainInstance> out;
  const int first = in.peek();
  if (first == std::char_traits<char>::eof()) throw FormatError("instance file: empty");
  if (first == '{') {
    std::string line;
    std::getline(in, line);
    const auto header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("schema_version", 0) != kInstanceSchemaVersion)
      throw FormatError("instance file: unsupported schema header");
    while (std::getline(in, line)) {
      if (!line.empty()) out.push_back(instance_from_json(line));
    }
    return out;
  }
  if (in.get() != kInstanceSchemaVersion) throw FormatError("instance file: unsupported schema version");
  char len_bytes[4];
  while (in.read(len_bytes, 4)) {
    std::uint32_t len = 0;
    for (int k = 0; k < 4; ++k) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(len_bytes[k])) << (8 * k);
    std::string payload(len, '\0');
    if (!in.read(payload.data(), len)) throw FormatError("instance file: truncated record");
    out.push_back(instance_from_bytes(payload));
  }
  if (in.gcount() != 0) throw FormatError("instance file: truncated length prefix");
  return out;
}

}  // namespace lattice_bert
