// src/lexicon.cc
#include "lexicon.h"

#include <fstream>

namespace l2w {

std::string Alphabet::symbol_name(int id) {
  switch (id) {
    case kPad:
      return "<pad>";
    case kBlank:
      return "<blank>";
    case kEos:
      return "<eos>";
    default:
      return std::string(1, char_of(id));
  }
}

std::vector<int> letterize(const std::string& word) {
  L2W_CHECK(!word.empty(), "letterize: empty word");
  std::string w = lowercase(word);
  std::vector<int> ids;
  ids.reserve(w.size());
  for (char c : w) {
    int id = Alphabet::id_of(c);
    if (id < 0)
      L2W_RAISE("letterize: character '" << c << "' in word \"" << word
                                         << "\" is not in the alphabet");
    ids.push_back(id);
  }
  return ids;
}

std::string render(const std::vector<int>& letter_ids) {
  std::string out;
  out.reserve(letter_ids.size());
  for (int id : letter_ids) out += Alphabet::char_of(id);
  return out;
}

namespace {

std::vector<int> letterize_entry(const std::string& w) {
  if (w == "<blank>") return {Alphabet::kBlank};
  if (w == "<eos>") return {Alphabet::kEos};
  return letterize(w);
}

}  // namespace

PaddedBatch pad_batch(const std::vector<std::string>& words) {
  L2W_CHECK(!words.empty(), "pad_batch: empty batch");
  PaddedBatch out;
  std::vector<std::vector<int>> seqs;
  seqs.reserve(words.size());
  for (const auto& w : words) {
    seqs.push_back(letterize_entry(w));
    out.width = std::max(out.width, static_cast<int>(seqs.back().size()));
    out.lengths.push_back(static_cast<int>(seqs.back().size()));
  }
  out.letter_ids.assign(words.size() * out.width, Alphabet::kPad);
  for (size_t i = 0; i < seqs.size(); ++i)
    std::copy(seqs[i].begin(), seqs[i].end(),
              out.letter_ids.begin() + i * out.width);
  return out;
}

Lexicon::Lexicon() {
  words_ = {"<blank>", "<eos>"};
  letters_ = {{Alphabet::kBlank}, {Alphabet::kEos}};
  index_["<blank>"] = kBlankId;
  index_["<eos>"] = kEosId;
}

Lexicon Lexicon::from_words(const std::vector<std::string>& words) {
  Lexicon lex;
  return lex.extended_with(words);
}

Lexicon Lexicon::extended_with(const std::vector<std::string>& extra) const {
  Lexicon out = *this;
  for (const auto& raw : extra) {
    std::string w = lowercase(raw);
    L2W_CHECK(out.index_.find(w) == out.index_.end(),
              "lexicon: duplicate word \"" << w << "\"");
    std::vector<int> ids = letterize(w);  // validates the alphabet
    out.index_[w] = static_cast<int>(out.words_.size());
    out.words_.push_back(w);
    out.letters_.push_back(std::move(ids));
  }
  return out;
}

Lexicon Lexicon::from_file(const std::string& path) {
  std::ifstream is(path);
  L2W_CHECK(is.good(), "lexicon: cannot open " << path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(is, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    L2W_CHECK(toks.size() == 1, "lexicon: expected one word per line in "
                                    << path << ", got \"" << line << "\"");
    words.push_back(toks[0]);
  }
  return from_words(words);
}

void Lexicon::save(const std::string& path) const {
  std::ofstream os(path);
  L2W_CHECK(os.good(), "lexicon: cannot open " << path << " for writing");
  for (int i = kNumReserved; i < size(); ++i) os << words_[i] << "\n";
  L2W_CHECK(os.good(), "lexicon: write failed for " << path);
}

const std::string& Lexicon::word(int id) const {
  L2W_CHECK(id >= 0 && id < size(),
            "lexicon: word id " << id << " out of range [0," << size() << ")");
  return words_[id];
}

const std::vector<int>& Lexicon::letters(int id) const {
  L2W_CHECK(id >= 0 && id < size(),
            "lexicon: word id " << id << " out of range [0," << size() << ")");
  return letters_[id];
}

int Lexicon::id_of(const std::string& w) const {
  auto it = index_.find(lowercase(w));
  return it == index_.end() ? -1 : it->second;
}

std::vector<std::string> Lexicon::real_words() const {
  return std::vector<std::string>(words_.begin() + kNumReserved, words_.end());
}

}  // namespace l2w
