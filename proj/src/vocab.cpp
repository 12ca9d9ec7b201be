#include "pcc/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "pcc/io_util.hpp"

namespace pcc {

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

std::vector<std::string> Vocabulary::fixed_prefix() {
  std::vector<std::string> tokens = {"<PAD>",    "<BOS>",     "<EOS>",    "<SEP>",    "<UNK>",
                                     "<PROT_S>", "</PROT_S>", "<PROT_X>", "</PROT_X>"};
  for (char letter : kAminoAcidLetters) tokens.push_back(std::string("<AA_") + letter + ">");
  for (int code = 0; code < kNumStructCodes; ++code)
    tokens.push_back("<STR_" + std::to_string(code) + ">");
  return tokens;
}

void Vocabulary::finish_index() {
  index_.clear();
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<int>(i));
    if (!inserted)
      throw std::runtime_error("vocabulary: duplicate token '" + tokens_[i] + "'");
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus, int min_count) {
  // std::map keeps word iteration ordered, making the count pass deterministic.
  std::map<std::string, long long> counts;
  for (const std::string& line : corpus)
    for (const std::string& word : split_whitespace(line)) ++counts[word];

  std::vector<std::pair<std::string, long long>> kept;
  for (const auto& [word, count] : counts)
    if (count >= min_count) kept.emplace_back(word, count);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.tokens_ = fixed_prefix();
  for (const auto& [word, count] : kept) {
    (void)count;
    v.tokens_.push_back(word);
  }
  v.finish_index();
  return v;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range [0, " +
                            std::to_string(size()) + ")");
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

TokenClass Vocabulary::class_of(int id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range [0, " +
                            std::to_string(size()) + ")");
  if (id < kNumSpecials) return TokenClass::Special;
  if (id < kAaEndId) return TokenClass::AminoAcid;
  if (id < kStrEndId) return TokenClass::Structure;
  return TokenClass::Text;
}

std::vector<int> Vocabulary::encode_text(const std::string& text) const {
  std::vector<int> ids;
  for (const std::string& word : split_whitespace(text)) {
    const int id = id_of(word);
    ids.push_back(id >= 0 ? id : kUnkId);
  }
  return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token_of(ids[i]);
  }
  return out;
}

int Vocabulary::aa_id(char letter) const {
  const std::size_t pos = kAminoAcidLetters.find(letter);
  if (pos == std::string_view::npos)
    throw std::invalid_argument(std::string("vocabulary: unknown amino-acid letter '") + letter +
                                "'");
  return kAaBeginId + static_cast<int>(pos);
}

int Vocabulary::str_id(int code) const {
  if (code < 0 || code >= kNumStructCodes)
    throw std::out_of_range("vocabulary: structure code " + std::to_string(code) +
                            " out of range [0, " + std::to_string(kNumStructCodes) + ")");
  return kStrBeginId + code;
}

int Vocabulary::str_code(int id) {
  if (!is_structure_id(id))
    throw std::out_of_range("vocabulary: id " + std::to_string(id) +
                            " is not a structure token");
  return id - kStrBeginId;
}

void Vocabulary::save(const std::string& path) const {
  nlohmann::json tokens = nlohmann::json::object();
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    tokens[tokens_[i]] = static_cast<int>(i);
  nlohmann::json doc = {
      {"tokens", tokens},
      {"ranges",
       {{"specials", {0, kNumSpecials}},
        {"amino_acids", {kAaBeginId, kAaEndId}},
        {"structure", {kStrBeginId, kStrEndId}},
        {"text", {kTextBeginId, size()}}}},
  };
  write_text_file(path, doc.dump(2) + "\n");
}

Vocabulary Vocabulary::load(const std::string& path) {
  nlohmann::json doc = nlohmann::json::parse(read_text_file(path));
  const auto& tokens = doc.at("tokens");
  Vocabulary v;
  v.tokens_.resize(tokens.size());
  for (auto it = tokens.begin(); it != tokens.end(); ++it) {
    const int id = it.value().get<int>();
    if (id < 0 || id >= static_cast<int>(v.tokens_.size()))
      throw std::runtime_error("vocabulary file: id " + std::to_string(id) +
                               " outside [0, " + std::to_string(v.tokens_.size()) + ")");
    if (!v.tokens_[static_cast<std::size_t>(id)].empty())
      throw std::runtime_error("vocabulary file: duplicate id " + std::to_string(id));
    v.tokens_[static_cast<std::size_t>(id)] = it.key();
  }
  const auto prefix = fixed_prefix();
  if (v.tokens_.size() < prefix.size())
    throw std::runtime_error("vocabulary file: missing protein/special tokens");
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (v.tokens_[i] != prefix[i])
      throw std::runtime_error("vocabulary file: id " + std::to_string(i) + " should be '" +
                               prefix[i] + "', found '" + v.tokens_[i] + "'");
  v.finish_index();
  return v;
}

}  // namespace pcc
