// src/scorer.h
// Joint acoustic-word scoring: dot products of frame embeddings against word
// embeddings followed by a log-softmax over the scored word set, plus the
// sampled-dictionary construction used to keep training cost independent of
// the full lexicon size.
#pragma once

#include <unordered_map>
#include <vector>

#include "lexicon.h"
#include "tensor.h"
#include "wordenc.h"

namespace l2w {

enum class Criterion { kCtc, kSeq2Seq };

// Word set a batch is scored over. Column 0 always holds the criterion's
// pseudo-word (<blank> for CTC, <eos> for seq2seq), then the batch targets
// in ascending id order, then the uniform negatives in draw order.
struct SampledDictionary {
  std::vector<int> word_ids;            // column -> lexicon id
  std::unordered_map<int, int> to_col;  // lexicon id -> column
  int requested = 0;

  int size() const { return static_cast<int>(word_ids.size()); }
  int col_of(int lexicon_id) const {
    auto it = to_col.find(lexicon_id);
    return it == to_col.end() ? -1 : it->second;
  }
  static constexpr int kModeCol = 0;
};

// Negatives are drawn uniformly without replacement from the real words not
// in batch_targets. size counts the whole sampled dictionary including the
// mandatory set; it is capped at (all real words + the mode token).
SampledDictionary sample_dictionary(const std::vector<int>& batch_targets,
                                    const Lexicon& lex, int size,
                                    Criterion mode, Rng& rng);

// Training path: frames {T,d} x table {V,d} -> normalized log-probs {T,V}.
Var log_probs_var(const Var& frames, const Var& table);

// Inference emissions: per-frame log-probabilities over a fixed word set.
struct EmissionMatrix {
  int frames = 0;
  int vocab = 0;
  std::vector<Real> logp;     // frames x vocab
  std::vector<int> col2word;  // column -> lexicon id

  Real at(int t, int c) const {
    return logp[static_cast<int64_t>(t) * vocab + c];
  }
  const Real* prow(int t) const {
    return logp.data() + static_cast<int64_t>(t) * vocab;
  }
  int col_of(int word_id) const {
    for (int c = 0; c < vocab; ++c)
      if (col2word[c] == word_id) return c;
    return -1;
  }
};

// cols lists the lexicon ids to score (the inference dictionary).
EmissionMatrix compute_emissions(const std::vector<Real>& frame_embeds,
                                 int frames, int dim,
                                 const EmbeddingTable& table,
                                 const std::vector<int>& cols);

// Inference column set: every real word plus <blank> (CTC) or <eos>
// (seq2seq), in ascending lexicon-id order (so the pseudo-word is first).
std::vector<int> inference_columns(const Lexicon& lex, Criterion mode);

}  // namespace l2w
