// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>

#include <json.hpp>

#include "rosetta/error.hpp"
#include "rosetta/tokenizer.hpp"

namespace rosetta::model {

/// paired: context and query images fused patch-by-patch (the full model).
/// single: query image only, static 26-letter vocabulary (OCR baseline).
enum class Fusion { paired, single };

/// Numeric mode a configuration is meant to run in. Tests and gradient
/// checks use f64; training defaults to f32.
enum class Precision { f32, f64 };

struct ModelConfig {
  int patch_size = 14;
  int vit_layers = 2;
  int vit_dim = 64;
  int vit_heads = 4;
  int dec_layers = 2;
  int dec_dim = 96;
  int dec_heads = 4;
  int label_tokens = static_cast<int>(kDefaultLabelTokens);
  int vocab_size = static_cast<int>(kDefaultLabelTokens + kSpecialTokenCount);
  int max_seq_len = 1024;
  int mlp_ratio = 4;
  /// Greedy decoding stops after this many emitted tokens (15 symbols + <eos>).
  int max_decode_len = 16;
  double rope_base = 10000.0;
  double norm_eps = 1e-5;
  Fusion fusion = Fusion::paired;
  Precision precision = Precision::f32;

  /// Context-free OCR baseline at the same dimensions.
  static ModelConfig baseline(ModelConfig c) {
    c.fusion = Fusion::single;
    c.vocab_size = static_cast<int>(StaticTokenizer::kSize);
    return c;
  }

  static ModelConfig baseline();

  int vit_head_dim() const { return vit_dim / vit_heads; }
  int dec_head_dim() const { return dec_dim / dec_heads; }
  int patch_inputs() const { return (fusion == Fusion::paired ? 2 : 1) * patch_size * patch_size; }

  void validate() const {
    auto positive = [](int v, const char* what) {
      if (v <= 0) throw ValidationError(std::string(what) + " must be positive");
    };
    positive(patch_size, "patch_size");
    positive(vit_layers, "vit_layers");
    positive(vit_dim, "vit_dim");
    positive(vit_heads, "vit_heads");
    positive(dec_layers, "dec_layers");
    positive(dec_dim, "dec_dim");
    positive(dec_heads, "dec_heads");
    positive(max_seq_len, "max_seq_len");
    positive(mlp_ratio, "mlp_ratio");
    positive(max_decode_len, "max_decode_len");
    if (vit_dim % vit_heads != 0) throw ValidationError("vit_dim must be divisible by vit_heads");
    if (dec_dim % dec_heads != 0) throw ValidationError("dec_dim must be divisible by dec_heads");
    // 2D rotary: half of the pairs follow the row, half the column.
    if (vit_head_dim() % 4 != 0) throw ValidationError("vit head dim must be a multiple of 4");
    if (dec_head_dim() % 2 != 0) throw ValidationError("decoder head dim must be even");
    if (fusion == Fusion::paired) {
      if (label_tokens <= 0) throw ValidationError("label_tokens must be positive");
      if (vocab_size != label_tokens + static_cast<int>(kSpecialTokenCount))
        throw ValidationError("vocab_size must equal label_tokens + 13");
    } else if (vocab_size != static_cast<int>(StaticTokenizer::kSize)) {
      throw ValidationError("baseline vocab_size must be 29");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline ModelConfig ModelConfig::baseline() { return baseline(ModelConfig{}); }

NLOHMANN_JSON_SERIALIZE_ENUM(Fusion, {{Fusion::paired, "paired"}, {Fusion::single, "single"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Precision, {{Precision::f32, "f32"}, {Precision::f64, "f64"}})

inline void to_json(nlohmann::ordered_json& j, const ModelConfig& c) {
  j = nlohmann::ordered_json{
      {"patch_size", c.patch_size},     {"vit_layers", c.vit_layers},
      {"vit_dim", c.vit_dim},           {"vit_heads", c.vit_heads},
      {"dec_layers", c.dec_layers},     {"dec_dim", c.dec_dim},
      {"dec_heads", c.dec_heads},       {"label_tokens", c.label_tokens},
      {"vocab_size", c.vocab_size},     {"max_seq_len", c.max_seq_len},
      {"mlp_ratio", c.mlp_ratio},       {"max_decode_len", c.max_decode_len},
      {"rope_base", c.rope_base},       {"norm_eps", c.norm_eps},
      {"fusion", c.fusion},             {"precision", c.precision},
  };
}

inline void from_json(const nlohmann::ordered_json& j, ModelConfig& c) {
  ModelConfig d;
  c.patch_size = j.value("patch_size", d.patch_size);
  c.vit_layers = j.value("vit_layers", d.vit_layers);
  c.vit_dim = j.value("vit_dim", d.vit_dim);
  c.vit_heads = j.value("vit_heads", d.vit_heads);
  c.dec_layers = j.value("dec_layers", d.dec_layers);
  c.dec_dim = j.value("dec_dim", d.dec_dim);
  c.dec_heads = j.value("dec_heads", d.dec_heads);
  c.label_tokens = j.value("label_tokens", d.label_tokens);
  c.fusion = j.value("fusion", d.fusion);
  c.vocab_size = j.value("vocab_size", c.fusion == Fusion::single ? static_cast<int>(StaticTokenizer::kSize)
                                                                  : c.label_tokens + static_cast<int>(kSpecialTokenCount));
  c.max_seq_len = j.value("max_seq_len", d.max_seq_len);
  c.mlp_ratio = j.value("mlp_ratio", d.mlp_ratio);
  c.max_decode_len = j.value("max_decode_len", d.max_decode_len);
  c.rope_base = j.value("rope_base", d.rope_base);
  c.norm_eps = j.value("norm_eps", d.norm_eps);
  c.precision = j.value("precision", d.precision);
}

/// Canonical JSON text (fixed key order, no whitespace).
inline std::string canonical_json(const ModelConfig& c) { return nlohmann::ordered_json(c).dump(); }

}  // namespace rosetta::model
