#pragma once

#include <string>
#include <string_view>

#include "errors.hpp"

namespace lattice_bert {

struct EncoderConfig {
  std::string name = "toy";
  int n_layers = 2;
  int d_hidden = 64;
  int d_embed = 16;
  int d_ffn = 128;
  int n_heads = 4;
  double dropout = 0.1;
  double attention_dropout = 0.1;
  int l_max = 693;  // phase-2 cap of 692 tokens plus [CLS] at position 0
  int vocab_size = 0;

  int d_head() const { return d_hidden / n_heads; }

  void validate() const {
    if (n_layers <= 0 || d_hidden <= 0 || d_embed <= 0 || d_ffn <= 0 || n_heads <= 0 || l_max <= 0)
      throw ShapeError("encoder config: sizes must be positive");
    if (d_hidden % n_heads != 0) throw ShapeError("encoder config: hidden size must be a multiple of the head count");
    if (vocab_size <= 0) throw ShapeError("encoder config: vocab_size must be positive");
    if (dropout < 0.0 || dropout >= 1.0 || attention_dropout < 0.0 || attention_dropout >= 1.0)
      throw ShapeError("encoder config: dropout must lie in [0, 1)");
  }

  static EncoderConfig base() { return {"base", 12, 768, 128, 3072, 12, 0.1, 0.1, 693, 0}; }
  static EncoderConfig lite() { return {"lite", 6, 512, 128, 2048, 8, 0.1, 0.1, 693, 0}; }
  static EncoderConfig toy() { return {"toy", 2, 64, 16, 128, 4, 0.1, 0.1, 693, 0}; }

  static EncoderConfig preset(std::string_view name) {
    if (name == "base") return base();
    if (name == "lite") return lite();
    if (name == "toy") return toy();
    throw ShapeError("unknown preset '" + std::string(name) + "'");
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

}  // namespace lattice_bert
