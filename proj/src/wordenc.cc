// src/wordenc.cc
#include "wordenc.h"

#include <cmath>

namespace l2w {

void WordEncoderConfig::validate() const {
  L2W_CHECK(letter_embed_dim > 0 && conv_channels > 0 && embed_dim > 0,
            "wordenc config: dimensions must be positive");
  L2W_CHECK(kernel >= 1, "wordenc config: kernel must be >= 1");
  L2W_CHECK(!strides.empty(), "wordenc config: need at least one conv layer");
  for (int s : strides)
    L2W_CHECK(s >= 1, "wordenc config: stride " << s << " invalid");
  L2W_CHECK(rho > 0, "wordenc config: rho must be positive");
}

Real row_l2_norm(const Real* v, int dim) {
  Real sq = 0;
  for (int i = 0; i < dim; ++i) sq += v[i] * v[i];
  return std::sqrt(sq);
}

void project_l2ball(std::vector<Real>& flat, int dim, Real rho) {
  L2W_CHECK(rho > 0, "project_l2ball: rho must be positive");
  L2W_CHECK(dim > 0 && flat.size() % dim == 0,
            "project_l2ball: flat size not a multiple of dim");
  const Real limit = rho * (1.0 + 1e-12);
  for (size_t off = 0; off < flat.size(); off += dim) {
    Real nrm = row_l2_norm(flat.data() + off, dim);
    if (nrm > limit) {
      Real s = rho / nrm;
      for (int i = 0; i < dim; ++i) flat[off + i] *= s;
    }
  }
}

WordEncoder::WordEncoder(const WordEncoderConfig& cfg, ParamStore& params,
                         Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  letter_table_ = params.create("wordenc/letters",
                                {Alphabet::kSize, cfg_.letter_embed_dim}, 0.5,
                                rng);
  int cin = cfg_.letter_embed_dim;
  for (size_t l = 0; l < cfg_.strides.size(); ++l) {
    Real scl = 1.0 / std::sqrt(static_cast<Real>(cfg_.kernel * cin));
    conv_w_.push_back(params.create("wordenc/conv" + std::to_string(l) + "/w",
                                    {cfg_.kernel, cin, cfg_.conv_channels},
                                    scl, rng));
    cin = cfg_.conv_channels;
  }
  zero_bias_ = constant({cfg_.conv_channels},
                        std::vector<Real>(cfg_.conv_channels, 0.0));
  Real scl = 1.0 / std::sqrt(static_cast<Real>(cfg_.conv_channels));
  head_w_ = params.create("wordenc/head/w", {cfg_.conv_channels, cfg_.embed_dim},
                          scl, rng);
  head_b_ = params.create("wordenc/head/b", {cfg_.embed_dim}, scl, rng);
}

Var WordEncoder::embed_word_var(const int* letter_ids, int padded_len,
                                int valid_len) const {
  L2W_CHECK(valid_len >= 1, "embed_word: need at least one valid letter");
  L2W_CHECK(padded_len >= valid_len, "embed_word: padded length "
                                         << padded_len << " < valid length "
                                         << valid_len);
  std::vector<int> ids(letter_ids, letter_ids + padded_len);
  // Pad rows come out zero; full zero-padding in the convolutions then makes
  // every frame that overlaps a real letter independent of the pad width.
  Var h = embedding_lookup(letter_table_, ids, valid_len);
  const int K = cfg_.kernel;
  const int pad = K - 1;
  int len = padded_len, valid = valid_len;
  for (size_t l = 0; l < cfg_.strides.size(); ++l) {
    int s = cfg_.strides[l];
    h = relu(conv1d(h, conv_w_[l], zero_bias_, s, pad));
    len = (len + 2 * pad - K) / s + 1;
    valid = std::min(len, (valid + K - 2) / s + 1);
  }
  std::vector<uint8_t> mask(len, 0);
  for (int i = 0; i < valid; ++i) mask[i] = 1;
  Var pooled = maxpool1d_masked(h, mask);             // {C}
  Var pooled_mat = stack_rows({pooled});              // {1, C}
  Var out = linear(pooled_mat, head_w_, head_b_);     // {1, d}
  return row(project_l2ball_rows(out, cfg_.rho), 0);  // {d}
}

Var WordEncoder::embed_word_var(const std::vector<int>& letter_ids) const {
  return embed_word_var(letter_ids.data(),
                        static_cast<int>(letter_ids.size()),
                        static_cast<int>(letter_ids.size()));
}

Var WordEncoder::embed_words_var(const Lexicon& lex,
                                 const std::vector<int>& word_ids) const {
  L2W_CHECK(!word_ids.empty(), "embed_words: empty word set");
  std::vector<Var> rows;
  rows.reserve(word_ids.size());
  for (int id : word_ids) rows.push_back(embed_word_var(lex.letters(id)));
  return stack_rows(rows);
}

std::vector<Real> WordEncoder::embed_word(
    const std::vector<int>& letter_ids) const {
  return embed_word_var(letter_ids)->value;
}

EmbeddingTable WordEncoder::embed_lexicon(const Lexicon& lex,
                                          int threads) const {
  EmbeddingTable table;
  table.dim = cfg_.embed_dim;
  table.num_rows = lex.size();
  table.projected = true;
  table.data.assign(static_cast<int64_t>(table.num_rows) * table.dim, 0.0);
  parallel_for(lex.size(), threads, [&](int id) {
    std::vector<Real> v = embed_word(lex.letters(id));
    std::copy(v.begin(), v.end(), table.mutable_row(id));
  });
  return table;
}

SwappedLexicon swap_lexicon(const WordEncoder& enc,
                            const std::vector<std::string>& new_words,
                            int threads) {
  // Validate everything first so the error can list all offenders.
  std::string bad;
  for (const auto& w : new_words) {
    try {
      letterize(w);
    } catch (const Error&) {
      bad += bad.empty() ? w : (", " + w);
    }
  }
  L2W_CHECK(bad.empty(), "swap_lexicon: unlexicalizable words: " << bad);
  SwappedLexicon out{Lexicon::from_words(new_words), {}};
  out.table = enc.embed_lexicon(out.lexicon, threads);
  return out;
}

}  // namespace l2w
