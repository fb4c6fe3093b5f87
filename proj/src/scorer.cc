// src/scorer.cc
#include "scorer.h"

#include <algorithm>
#include <cmath>
#include <set>

namespace l2w {

SampledDictionary sample_dictionary(const std::vector<int>& batch_targets,
                                    const Lexicon& lex, int size,
                                    Criterion mode, Rng& rng) {
  const int mode_id =
      mode == Criterion::kCtc ? Lexicon::kBlankId : Lexicon::kEosId;
  std::set<int> targets;
  for (int id : batch_targets) {
    L2W_CHECK(id >= Lexicon::kNumReserved && id < lex.size(),
              "sample_dictionary: target id " << id
                                              << " is not an ordinary word");
    targets.insert(id);
  }
  const int mandatory = static_cast<int>(targets.size()) + 1;
  L2W_CHECK(size >= mandatory, "sample_dictionary: size "
                                   << size << " smaller than mandatory set of "
                                   << mandatory);
  SampledDictionary dict;
  dict.requested = size;
  dict.word_ids.push_back(mode_id);
  for (int id : targets) dict.word_ids.push_back(id);

  std::vector<int> candidates;
  candidates.reserve(lex.num_real_words());
  for (int id = Lexicon::kNumReserved; id < lex.size(); ++id)
    if (!targets.count(id)) candidates.push_back(id);

  int need = std::min(size - mandatory, static_cast<int>(candidates.size()));
  for (int i = 0; i < need; ++i) {
    int j = i + rng.uniform_int(static_cast<int>(candidates.size()) - i);
    std::swap(candidates[i], candidates[j]);
    dict.word_ids.push_back(candidates[i]);
  }
  for (int c = 0; c < dict.size(); ++c) dict.to_col[dict.word_ids[c]] = c;
  return dict;
}

Var log_probs_var(const Var& frames, const Var& table) {
  L2W_CHECK(frames->shape.size() == 2 && table->shape.size() == 2 &&
                frames->cols() == table->cols(),
            "log_probs: embedding dim mismatch");
  return log_softmax_rows(matmul(frames, table, /*transpose_b=*/true));
}

EmissionMatrix compute_emissions(const std::vector<Real>& frame_embeds,
                                 int frames, int dim,
                                 const EmbeddingTable& table,
                                 const std::vector<int>& cols) {
  L2W_CHECK(static_cast<int64_t>(frame_embeds.size()) ==
                static_cast<int64_t>(frames) * dim,
            "compute_emissions: frame buffer size mismatch");
  L2W_CHECK(dim == table.dim, "compute_emissions: embedding dim "
                                  << dim << " != table dim " << table.dim);
  L2W_CHECK(!cols.empty(), "compute_emissions: empty column set");
  EmissionMatrix em;
  em.frames = frames;
  em.vocab = static_cast<int>(cols.size());
  em.col2word = cols;
  em.logp.resize(static_cast<int64_t>(frames) * em.vocab);
  for (int t = 0; t < frames; ++t) {
    const Real* f = frame_embeds.data() + static_cast<int64_t>(t) * dim;
    Real* out = em.logp.data() + static_cast<int64_t>(t) * em.vocab;
    Real mx = -std::numeric_limits<Real>::infinity();
    for (int c = 0; c < em.vocab; ++c) {
      const Real* w = table.row(cols[c]);
      Real s = 0;
      for (int i = 0; i < dim; ++i) s += w[i] * f[i];
      out[c] = s;
      mx = std::max(mx, s);
    }
    Real z = 0;
    for (int c = 0; c < em.vocab; ++c) z += std::exp(out[c] - mx);
    Real lz = mx + std::log(z);
    for (int c = 0; c < em.vocab; ++c) out[c] -= lz;
  }
  return em;
}

std::vector<int> inference_columns(const Lexicon& lex, Criterion mode) {
  std::vector<int> cols;
  cols.reserve(lex.num_real_words() + 1);
  cols.push_back(mode == Criterion::kCtc ? Lexicon::kBlankId
                                         : Lexicon::kEosId);
  for (int id = Lexicon::kNumReserved; id < lex.size(); ++id)
    cols.push_back(id);
  return cols;
}

}  // namespace l2w
