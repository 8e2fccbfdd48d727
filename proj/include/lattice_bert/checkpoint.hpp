#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "encoder.hpp"
#include "errors.hpp"
#include "trainer.hpp"

namespace lattice_bert {

// Checkpoint layout:
//   8-byte magic "LBERTCK1"
//   u64 little-endian length of the JSON header
//   JSON header {"config": {...}, "step": n, "tensors": [{"name", "shape": [rows, cols]}, ...]}
//   float64 little-endian payload of every tensor, row-major, in header order
// Encoder tensors use EncoderState::tensors() names; Adam moments, when
// present, are stored as "adam.m.<name>" and "adam.v.<name>".
inline constexpr char kCheckpointMagic[8] = {'L', 'B', 'E', 'R', 'T', 'C', 'K', '1'};

inline nlohmann::ordered_json config_to_json(const EncoderConfig& cfg) {
  nlohmann::ordered_json j;
  j["preset"] = cfg.name;
  j["n_layers"] = cfg.n_layers;
  j["d_hidden"] = cfg.d_hidden;
  j["d_embed"] = cfg.d_embed;
  j["d_ffn"] = cfg.d_ffn;
  j["n_heads"] = cfg.n_heads;
  j["dropout"] = cfg.dropout;
  j["attention_dropout"] = cfg.attention_dropout;
  j["l_max"] = cfg.l_max;
  j["vocab_size"] = cfg.vocab_size;
  return j;
}

inline EncoderConfig config_from_json(const nlohmann::json& j) {
  EncoderConfig cfg;
  cfg.name = j.at("preset").get<std::string>();
  cfg.n_layers = j.at("n_layers").get<int>();
  cfg.d_hidden = j.at("d_hidden").get<int>();
  cfg.d_embed = j.at("d_embed").get<int>();
  cfg.d_ffn = j.at("d_ffn").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.attention_dropout = j.at("attention_dropout").get<double>();
  cfg.l_max = j.at("l_max").get<int>();
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.validate();
  return cfg;
}

struct Checkpoint {
  EncoderState<double> state;
  std::int64_t step = 0;
  std::optional<EncoderState<double>> adam_m;
  std::optional<EncoderState<double>> adam_v;
};

inline void save_checkpoint(std::ostream& out, Checkpoint& ckpt) {
  std::vector<NamedTensor<double>> tensors = ckpt.state.tensors();
  auto add_prefixed = [&tensors](EncoderState<double>& s, const std::string& prefix) {
    for (auto& t : s.tensors()) tensors.push_back({prefix + t.name, t.tensor});
  };
  if (ckpt.adam_m && ckpt.adam_v) {
    add_prefixed(*ckpt.adam_m, "adam.m.");
    add_prefixed(*ckpt.adam_v, "adam.v.");
  }
  nlohmann::ordered_json header;
  header["config"] = config_to_json(ckpt.state.config);
  header["step"] = ckpt.step;
  auto manifest = nlohmann::ordered_json::array();
  for (const auto& t : tensors) manifest.push_back({{"name", t.name}, {"shape", {t.tensor->rows(), t.tensor->cols()}}});
  header["tensors"] = std::move(manifest);
  const std::string text = header.dump();

  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  std::uint64_t len = text.size();
  for (int k = 0; k < 8; ++k) out.put(static_cast<char>((len >> (8 * k)) & 0xFF));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  static_assert(sizeof(double) == 8);
  for (const auto& t : tensors) {
    for (Eigen::Index i = 0; i < t.tensor->size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, t.tensor->data() + i, 8);
      char buf[8];
      for (int k = 0; k < 8; ++k) buf[k] = static_cast<char>((bits >> (8 * k)) & 0xFF);
      out.write(buf, 8);
    }
  }
  if (!out) throw FormatError("checkpoint: write failed");
}

// Throws FormatError on a malformed file and ShapeError when a tensor does
// not match the shape implied by the stored config.
inline Checkpoint load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw FormatError("checkpoint: bad magic");
  unsigned char len_bytes[8];
  if (!in.read(reinterpret_cast<char*>(len_bytes), 8)) throw FormatError("checkpoint: truncated header length");
  std::uint64_t len = 0;
  for (int k = 0; k < 8; ++k) len |= static_cast<std::uint64_t>(len_bytes[k]) << (8 * k);
  if (len > (1u << 26)) throw FormatError("checkpoint: header too large");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError("checkpoint: truncated header");
  const auto header = nlohmann::json::parse(text, nullptr, false);
  if (header.is_discarded()) throw FormatError("checkpoint: header is not JSON");

  Checkpoint ckpt;
  try {
    ckpt.state = EncoderState<double>::zeros(config_from_json(header.at("config")));
    ckpt.step = header.at("step").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }

  std::map<std::string, Matrix<double>*> by_name;
  for (auto& t : ckpt.state.tensors()) by_name[t.name] = t.tensor;
  bool has_adam = false;
  for (const auto& t : header.at("tensors"))
    if (t.at("name").get<std::string>().rfind("adam.", 0) == 0) has_adam = true;
  if (has_adam) {
    ckpt.adam_m = ckpt.state.zeros_like();
    ckpt.adam_v = ckpt.state.zeros_like();
    for (auto& t : ckpt.adam_m->tensors()) by_name["adam.m." + t.name] = t.tensor;
    for (auto& t : ckpt.adam_v->tensors()) by_name["adam.v." + t.name] = t.tensor;
  }

  std::size_t filled = 0;
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
    const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ShapeError("checkpoint: unexpected tensor '" + name + "'");
    auto& m = *it->second;
    if (m.rows() != rows || m.cols() != cols) throw ShapeError("checkpoint: shape mismatch for '" + name + "'");
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      unsigned char buf[8];
      if (!in.read(reinterpret_cast<char*>(buf), 8)) throw FormatError("checkpoint: truncated payload");
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(buf[k]) << (8 * k);
      std::memcpy(m.data() + i, &bits, 8);
    }
    ++filled;
  }
  if (filled != by_name.size()) throw ShapeError("checkpoint: missing tensors");
  return ckpt;
}

}  // namespace lattice_bert
