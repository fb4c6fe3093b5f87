// tests/test_wordenc.cc
#include <cmath>

#include "doctest.h"
#include "src/wordenc.h"

using namespace l2w;

namespace {

struct Fixture {
  ParamStore params;
  Rng rng{4242};
  WordEncoderConfig cfg;
  std::unique_ptr<WordEncoder> enc;

  explicit Fixture(int d = 16, int channels = 24, int letter_dim = 8) {
    cfg.embed_dim = d;
    cfg.conv_channels = channels;
    cfg.letter_embed_dim = letter_dim;
    enc = std::make_unique<WordEncoder>(cfg, params, rng);
  }
};

Real l2_diff(const std::vector<Real>& a, const std::vector<Real>& b) {
  Real s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("wordenc") {

TEST_CASE("embed_word is deterministic") {
  Fixture f;
  auto a = f.enc->embed_word(letterize("cat"));
  auto b = f.enc->embed_word(letterize("cat"));
  CHECK(a == b);
  CHECK(static_cast<int>(a.size()) == f.cfg.embed_dim);
}

TEST_CASE("padding invariance across batch widths") {
  Fixture f;
  auto ids = letterize("cat");
  std::vector<int> w3(ids), w10(ids);
  w10.resize(10, Alphabet::kPad);
  Var a = f.enc->embed_word_var(w3.data(), 3, 3);
  Var b = f.enc->embed_word_var(w10.data(), 10, 3);
  CHECK(l2_diff(a->value, b->value) <= 1e-6);

  // 100 random words, random widths, must agree within 1e-6 (bitwise here)
  Rng rng(7);
  for (int n = 0; n < 100; ++n) {
    int len = 1 + rng.uniform_int(8);
    std::vector<int> w;
    for (int i = 0; i < len; ++i) w.push_back(rng.uniform_int(27));
    std::vector<int> wide(w);
    wide.resize(len + 1 + rng.uniform_int(9), Alphabet::kPad);
    Var x = f.enc->embed_word_var(w.data(), len, len);
    Var y = f.enc->embed_word_var(wide.data(),
                                  static_cast<int>(wide.size()), len);
    CHECK(l2_diff(x->value, y->value) <= 1e-6);
  }
}

TEST_CASE("all-padding input is rejected") {
  Fixture f;
  std::vector<int> pads(4, Alphabet::kPad);
  CHECK_THROWS_AS(f.enc->embed_word_var(pads.data(), 4, 0), Error);
}

TEST_CASE("single-letter words embed fine") {
  Fixture f;
  auto v = f.enc->embed_word(letterize("a"));
  CHECK(static_cast<int>(v.size()) == f.cfg.embed_dim);
  for (Real x : v) CHECK(std::isfinite(x));
}

TEST_CASE("embed_lexicon rows match standalone embeddings") {
  Fixture f;
  Lexicon lex = Lexicon::from_words({"cat", "a", "mouse", "be", "deer"});
  EmbeddingTable table = f.enc->embed_lexicon(lex);
  CHECK(table.num_rows == 7);  // 5 words + <blank> + <eos>
  CHECK(table.projected);
  auto solo = f.enc->embed_word(letterize("cat"));
  Real d = 0;
  const Real* r = table.row(lex.id_of("cat"));
  for (int i = 0; i < table.dim; ++i) d += (solo[i] - r[i]) * (solo[i] - r[i]);
  CHECK(std::sqrt(d) <= 1e-6);

  // pseudo-word rows come from their single-token inputs
  auto blank = f.enc->embed_word({Alphabet::kBlank});
  const Real* br = table.row(Lexicon::kBlankId);
  for (int i = 0; i < table.dim; ++i)
    CHECK(br[i] == doctest::Approx(blank[i]).epsilon(1e-12));
}

TEST_CASE("embed_lexicon is threading-invariant") {
  Fixture f;
  Lexicon lex = Lexicon::from_words({"cat", "mouse", "horse", "bee", "ant"});
  EmbeddingTable t1 = f.enc->embed_lexicon(lex, 1);
  EmbeddingTable t2 = f.enc->embed_lexicon(lex, 4);
  CHECK(t1.data == t2.data);
}

TEST_CASE("parameter updates change embeddings") {
  Fixture f;
  auto before = f.enc->embed_word(letterize("cat"));
  Var w = f.params.get("wordenc/conv0/w");
  w->value[0] += 0.05;
  auto after = f.enc->embed_word(letterize("cat"));
  CHECK(l2_diff(before, after) > 0);
}

TEST_CASE("projection clamps norms and keeps direction") {
  std::vector<Real> v = {6.0, 8.0};  // norm 10
  project_l2ball(v, 2, 5.0);
  CHECK(row_l2_norm(v.data(), 2) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(v[0] / v[1] == doctest::Approx(6.0 / 8.0).epsilon(1e-12));

  std::vector<Real> zero = {0.0, 0.0, 0.0};
  project_l2ball(zero, 3, 5.0);
  CHECK(zero == std::vector<Real>{0.0, 0.0, 0.0});

  std::vector<Real> small = {4.9, 0.0};
  auto saved = small;
  project_l2ball(small, 2, 5.0);
  CHECK(small == saved);
}

TEST_CASE("projection is exactly idempotent") {
  Rng rng(5);
  std::vector<Real> v(40);
  for (auto& x : v) x = rng.uniform(-3, 3);
  project_l2ball(v, 8, 1.5);
  auto once = v;
  project_l2ball(v, 8, 1.5);
  CHECK(v == once);
}

TEST_CASE("word embeddings respect the ball bound") {
  Fixture f;
  // inflate head weights so raw outputs overshoot the ball
  Var w = f.params.get("wordenc/head/w");
  for (auto& x : w->value) x *= 40.0;
  auto v = f.enc->embed_word(letterize("overshoot"));
  CHECK(row_l2_norm(v.data(), f.cfg.embed_dim) <= f.cfg.rho + 1e-6);
}

TEST_CASE("gradient flows to letter embeddings through the whole encoder") {
  Fixture f(8, 10, 6);
  Rng rng(11);
  auto ids = letterize("cab");
  std::vector<Real> probe(f.cfg.embed_dim);
  for (auto& x : probe) x = rng.uniform(-1, 1);
  Var pv = constant({f.cfg.embed_dim}, probe);
  auto fn = [&] { return dot(f.enc->embed_word_var(ids), pv); };
  double err = finite_difference_check(fn, f.params.all(), 1e-6, 60);
  CHECK(err <= 1e-5);
}

TEST_CASE("swap_lexicon keeps shared-word embeddings identical") {
  Fixture f;
  Lexicon train = Lexicon::from_words({"cat", "dog", "bird"});
  EmbeddingTable t0 = f.enc->embed_lexicon(train);
  auto swapped = swap_lexicon(*f.enc, {"cat", "dog", "bird", "caterpillar"});
  CHECK(swapped.lexicon.size() == 6);
  CHECK(swapped.lexicon.id_of("<blank>") == Lexicon::kBlankId);
  for (const auto& w : {"cat", "dog", "bird"}) {
    const Real* a = t0.row(train.id_of(w));
    const Real* b = swapped.table.row(swapped.lexicon.id_of(w));
    Real d = 0;
    for (int i = 0; i < t0.dim; ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(std::sqrt(d) <= 1e-6);
  }
}

TEST_CASE("swap_lexicon lists every unlexicalizable word") {
  Fixture f;
  CHECK_THROWS_WITH_AS(swap_lexicon(*f.enc, {"ok", "no-good", "bad2"}),
                       doctest::Contains("no-good"), Error);
}

}  // TEST_SUITE
