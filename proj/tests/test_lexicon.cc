// tests/test_lexicon.cc
#include <fstream>

#include "doctest.h"
#include "src/lexicon.h"

using namespace l2w;

TEST_SUITE("lexicon") {

TEST_CASE("letterize maps characters to ids") {
  auto ids = letterize("cat");
  CHECK(ids == std::vector<int>{2, 0, 19});
  CHECK(render(ids) == "cat");
}

TEST_CASE("letterize handles apostrophes") {
  auto ids = letterize("cinderella's");
  CHECK(ids.size() == 12);
  CHECK(ids[10] == Alphabet::kApostrophe);
  CHECK(render(ids) == "cinderella's");
}

TEST_CASE("letterize rejects out-of-alphabet characters") {
  CHECK_THROWS_WITH_AS(letterize("\xc3\xbc" "ber"), doctest::Contains("ber"),
                       Error);
  CHECK_THROWS_AS(letterize("a-b"), Error);
  CHECK_THROWS_AS(letterize(""), Error);
}

TEST_CASE("letterize then render is identity on random words") {
  Rng rng(99);
  for (int n = 0; n < 50; ++n) {
    std::string w;
    int len = 1 + rng.uniform_int(10);
    for (int i = 0; i < len; ++i) {
      int id = rng.uniform_int(27);
      w += id == 26 ? '\'' : static_cast<char>('a' + id);
    }
    CHECK(render(letterize(w)) == w);
  }
}

TEST_CASE("pad_batch pads to the max length") {
  PaddedBatch b = pad_batch({"cat", "a"});
  CHECK(b.width == 3);
  CHECK(b.lengths == std::vector<int>{3, 1});
  CHECK(b.prow(0)[0] == 2);
  CHECK(b.prow(1)[0] == 0);
  CHECK(b.prow(1)[1] == Alphabet::kPad);
  CHECK(b.prow(1)[2] == Alphabet::kPad);
}

TEST_CASE("pad_batch accepts pseudo-words") {
  PaddedBatch b = pad_batch({"<blank>"});
  CHECK(b.width == 1);
  CHECK(b.lengths == std::vector<int>{1});
  CHECK(b.prow(0)[0] == Alphabet::kBlank);
}

TEST_CASE("pad_batch with equal lengths adds no padding") {
  PaddedBatch b = pad_batch({"ab", "cd"});
  CHECK(b.width == 2);
  for (int v : b.letter_ids) CHECK(v != Alphabet::kPad);
}

TEST_CASE("pad_batch is order-equivariant") {
  PaddedBatch a = pad_batch({"cat", "horse", "be"});
  PaddedBatch b = pad_batch({"be", "cat", "horse"});
  CHECK(a.width == b.width);
  for (int i = 0; i < 3; ++i) {
    int j = (i + 1) % 3;  // permutation applied above
    for (int c = 0; c < a.width; ++c) CHECK(a.prow(i)[c] == b.prow(j)[c]);
  }
}

TEST_CASE("pad_batch rejects an empty batch") {
  CHECK_THROWS_AS(pad_batch({}), Error);
}

TEST_CASE("lexicon ids are dense with reserved pseudo-words") {
  Lexicon lex = Lexicon::from_words({"cat", "sat", "mat"});
  CHECK(lex.size() == 5);
  CHECK(lex.num_real_words() == 3);
  CHECK(lex.id_of("<blank>") == Lexicon::kBlankId);
  CHECK(lex.id_of("<eos>") == Lexicon::kEosId);
  CHECK(lex.id_of("cat") == 2);
  CHECK(lex.id_of("dog") == -1);
  CHECK(lex.word(3) == "sat");
  CHECK(lex.letters(Lexicon::kBlankId) ==
        std::vector<int>{Alphabet::kBlank});
}

TEST_CASE("lexicon rejects duplicates and case-folds") {
  CHECK_THROWS_AS(Lexicon::from_words({"cat", "CAT"}), Error);
  Lexicon lex = Lexicon::from_words({"CaT"});
  CHECK(lex.word(2) == "cat");
  CHECK(lex.id_of("CAT") == 2);
}

TEST_CASE("lexicon file round-trip with comments") {
  std::string path = "lex_roundtrip.txt";
  {
    std::ofstream os(path);
    os << "# tiny lexicon\n"
       << "cat\n"
       << "\n"
       << "sat   # trailing comment\n";
  }
  Lexicon lex = Lexicon::from_file(path);
  CHECK(lex.num_real_words() == 2);
  CHECK(lex.id_of("sat") == 3);
  lex.save("lex_roundtrip2.txt");
  Lexicon lex2 = Lexicon::from_file("lex_roundtrip2.txt");
  CHECK(lex2.size() == lex.size());
  for (int i = 0; i < lex.size(); ++i) CHECK(lex2.word(i) == lex.word(i));
}

TEST_CASE("extended_with preserves existing ids") {
  Lexicon lex = Lexicon::from_words({"cat", "sat"});
  Lexicon big = lex.extended_with({"dog"});
  CHECK(big.id_of("cat") == lex.id_of("cat"));
  CHECK(big.id_of("<blank>") == Lexicon::kBlankId);
  CHECK(big.id_of("dog") == 4);
  CHECK_THROWS_AS(lex.extended_with({"cat"}), Error);
}

}  // TEST_SUITE
