// src/acoustic.h
// Acoustic encoder: strided 1D-conv front-end with GLU activations, a stack
// of post-norm Transformer blocks, and a linear head projecting to the word
// embedding dimension with an L2-ball constraint per output frame.
//
// Feature file format: u32 T, u32 F, then T*F float32 values (row-major,
// little-endian). Manifest format: one utterance per line,
//   <utt-id>\t<feature-path>\t<transcript words...>
// Relative feature paths are resolved against the manifest directory.
#pragma once

#include <string>
#include <vector>

#include "tensor.h"

namespace l2w {

struct ConvSpec {
  int out_channels = 0;  // pre-GLU; the GLU halves this
  int stride = 1;
};

struct AcousticConfig {
  int feature_dim = 16;  // F
  int kernel = 3;
  std::vector<ConvSpec> frontend;
  int overall_stride = 8;  // must equal the product of front-end strides
  int blocks = 2;          // L_e
  int heads = 4;
  int model_dim = 64;
  int ffn_dim = 128;
  Real dropout = 0.0;
  Real layer_drop = 0.0;
  int embed_dim = 64;  // d
  Real rho = 5.0;

  // Six kernel-3 GLU convolutions, every other one striding by 2 (the first
  // also strides for s=16).
  static AcousticConfig desk_default(int stride = 8);
  void validate() const;
};

struct FeatureSequence {
  int frames = 0;
  int dim = 0;
  std::vector<Real> values;  // frames x dim
  int frame_period_ms = 10;

  const Real* frame(int t) const {
    return values.data() + static_cast<int64_t>(t) * dim;
  }
};

void write_features(const std::string& path, const FeatureSequence& f);
FeatureSequence read_features(const std::string& path);

struct ManifestEntry {
  std::string utt_id;
  std::string feature_path;
  std::vector<std::string> words;
};

void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& path);

class AcousticEncoder {
 public:
  AcousticEncoder(const AcousticConfig& cfg, ParamStore& params, Rng& rng);

  // Final hidden states H^{L_e}: {T', model_dim}. dropout_rng enables
  // dropout / layer drop; pass nullptr for evaluation.
  Var encode_hidden(const FeatureSequence& feats,
                    Rng* dropout_rng = nullptr) const;
  // Frame embeddings f_t: {T', embed_dim}, every row norm-capped at rho.
  Var encode(const FeatureSequence& feats, Rng* dropout_rng = nullptr) const;

  // One full block: H' = Norm(FFN(Z) + Z), Z = Norm(SelfAttention(H) + H).
  Var self_attention_block(const Var& h, int block,
                           Rng* dropout_rng = nullptr) const;
  // Attention probabilities for one head: {T', T'} rows summing to 1.
  Var attention_matrix(const Var& h, int block, int head) const;

  // Closed-form output length: T' = ceil(T / overall_stride).
  static int output_length(int frames, int stride);
  int min_input_length() const { return cfg_.overall_stride; }
  const AcousticConfig& config() const { return cfg_; }

 private:
  struct Block {
    std::vector<Var> q, k, v;  // per head {model_dim, head_dim}
    Var attn_w, attn_b;
    Var ln1_g, ln1_b;
    Var ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Var ln2_g, ln2_b;
  };

  AcousticConfig cfg_;
  std::vector<Var> conv_w_, conv_b_;
  std::vector<Block> blocks_;
  Var head_w_, head_b_;
};

}  // namespace l2w
