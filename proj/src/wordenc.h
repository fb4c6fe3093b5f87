// src/wordenc.h
// Letter-to-word embedding network: letter embeddings, stacked 1D
// convolutions with ReLU, masked max-pooling over time, a linear head and an
// L2-ball projection on the output.
//
// Batching uses <pad> letter tokens, but pad rows are zeroed at lookup and
// the convolutions carry no bias, so frames derived purely from padding stay
// exactly zero at every depth and are masked out of the pooling. This makes
// a word's embedding bit-identical for every pad width.
#pragma once

#include "lexicon.h"
#include "tensor.h"

namespace l2w {

struct WordEncoderConfig {
  int letter_embed_dim = 32;
  int conv_channels = 128;
  int kernel = 3;
  std::vector<int> strides = {1, 2, 2};
  int embed_dim = 64;  // d
  Real rho = 5.0;      // L2-ball bound

  void validate() const;
};

struct EmbeddingTable {
  int dim = 0;
  int num_rows = 0;
  bool projected = false;
  std::vector<Real> data;  // num_rows x dim

  const Real* row(int i) const {
    L2W_CHECK(i >= 0 && i < num_rows,
              "EmbeddingTable: row " << i << " out of range");
    return data.data() + static_cast<int64_t>(i) * dim;
  }
  Real* mutable_row(int i) {
    return data.data() + static_cast<int64_t>(i) * dim;
  }
};

// Rescales any row with norm > rho back onto the ball surface (plain-array
// variant of the in-graph project_l2ball_rows op).
void project_l2ball(std::vector<Real>& flat, int dim, Real rho);
Real row_l2_norm(const Real* v, int dim);

class WordEncoder {
 public:
  WordEncoder(const WordEncoderConfig& cfg, ParamStore& params, Rng& rng);

  // Graph path over one (possibly padded) letter row. valid_len counts the
  // real letters; rows beyond it must hold <pad>. Output: {d} vector node.
  Var embed_word_var(const int* letter_ids, int padded_len,
                     int valid_len) const;
  Var embed_word_var(const std::vector<int>& letter_ids) const;

  // Shared-parameter batch over a subset of lexicon entries -> {n, d} node
  // whose row order follows word_ids. Used for the sampled dictionary.
  Var embed_words_var(const Lexicon& lex,
                      const std::vector<int>& word_ids) const;

  // Plain evaluation (no gradients kept).
  std::vector<Real> embed_word(const std::vector<int>& letter_ids) const;

  // Row i = embedding of lexicon id i, pseudo-words included.
  EmbeddingTable embed_lexicon(const Lexicon& lex, int threads = 1) const;

  const WordEncoderConfig& config() const { return cfg_; }

 private:
  WordEncoderConfig cfg_;
  Var letter_table_;             // {Alphabet::kSize, letter_embed_dim}
  std::vector<Var> conv_w_;      // per layer {K, Cin, Cout}
  Var zero_bias_;                // shared no-grad conv bias
  Var head_w_, head_b_;          // {C, d}, {d}
};

// Embeds a whole new word list with the given encoder; reserved pseudo-word
// ids stay fixed, shared words get identical embeddings by construction.
struct SwappedLexicon {
  Lexicon lexicon;
  EmbeddingTable table;
};
SwappedLexicon swap_lexicon(const WordEncoder& enc,
                            const std::vector<std::string>& new_words,
                            int threads = 1);

}  // namespace l2w
