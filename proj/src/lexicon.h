// src/lexicon.h
// Letter alphabet, word letterization, special tokens, padded batching and
// the lexicon file format (UTF-8 text, one word per line, '#' comments).
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "common.h"

namespace l2w {

// Letter ids: 0..25 = 'a'..'z', 26 = apostrophe, then the special input
// tokens <pad>, <blank>, <eos>. Special tokens never occur inside words.
class Alphabet {
 public:
  static constexpr int kApostrophe = 26;
  static constexpr int kPad = 27;
  static constexpr int kBlank = 28;
  static constexpr int kEos = 29;
  static constexpr int kSize = 30;

  // -1 when the character is not a letter or apostrophe.
  static int id_of(char c) {
    if (c >= 'a' && c <= 'z') return c - 'a';
    if (c == '\'') return kApostrophe;
    return -1;
  }
  static char char_of(int id) {
    if (id >= 0 && id < 26) return static_cast<char>('a' + id);
    if (id == kApostrophe) return '\'';
    L2W_RAISE("Alphabet: id " << id << " is not a printable letter");
  }
  static std::string symbol_name(int id);
};

// Lowercases, then maps to letter ids. Throws naming the character and word
// on anything outside a-z and apostrophe.
std::vector<int> letterize(const std::string& word);
// Inverse of letterize on ordinary words.
std::string render(const std::vector<int>& letter_ids);

struct PaddedBatch {
  int width = 0;                 // max word length
  std::vector<int> letter_ids;   // row-major, rows padded with Alphabet::kPad
  std::vector<int> lengths;      // true length per word
  const int* prow(int i) const { return letter_ids.data() + i * width; }
};

// Accepts ordinary words plus the pseudo-words "<blank>" and "<eos>" (which
// letterize to their single special token).
PaddedBatch pad_batch(const std::vector<std::string>& words);

// Ordered word set. Ids are dense; <blank> and <eos> occupy fixed reserved
// ids so they survive lexicon swaps.
class Lexicon {
 public:
  static constexpr int kBlankId = 0;
  static constexpr int kEosId = 1;
  static constexpr int kNumReserved = 2;

  Lexicon();  // only the pseudo-words
  static Lexicon from_words(const std::vector<std::string>& words);
  static Lexicon from_file(const std::string& path);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(words_.size()); }
  int num_real_words() const { return size() - kNumReserved; }
  const std::string& word(int id) const;
  const std::vector<int>& letters(int id) const;
  int id_of(const std::string& w) const;  // -1 when absent
  bool contains(const std::string& w) const { return id_of(w) >= 0; }
  // Real words in id order (without pseudo-words).
  std::vector<std::string> real_words() const;

  // New lexicon containing this one's words plus extra; preserves existing
  // ids and rejects duplicates within extra.
  Lexicon extended_with(const std::vector<std::string>& extra) const;

 private:
  std::vector<std::string> words_;
  std::vector<std::vector<int>> letters_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace l2w
