#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pcc {

// Unified token-id layout. Ids are assigned in fixed blocks so the class of
// any id is a range test and two builds over the same corpus agree exactly:
//   [0, 9)            specials, in the order below
//   [9, 29)           amino acids <AA_A>.. in the order of kAminoAcidLetters
//   [29, 541)         structure codes <STR_0>..<STR_511>
//   [541, size)       text words, sorted by (count desc, lexicographic asc)
enum SpecialToken : int {
  kPadId = 0,
  kBosId = 1,
  kEosId = 2,
  kSepId = 3,
  kUnkId = 4,
  kProtSeqOpenId = 5,
  kProtSeqCloseId = 6,
  kProtStructOpenId = 7,
  kProtStructCloseId = 8,
};

inline constexpr int kNumSpecials = 9;
inline constexpr int kNumAminoAcids = 20;
inline constexpr int kNumStructCodes = 512;
inline constexpr int kAaBeginId = kNumSpecials;
inline constexpr int kAaEndId = kAaBeginId + kNumAminoAcids;
inline constexpr int kStrBeginId = kAaEndId;
inline constexpr int kStrEndId = kStrBeginId + kNumStructCodes;
inline constexpr int kTextBeginId = kStrEndId;
inline constexpr std::string_view kAminoAcidLetters = "ACDEFGHIKLMNPQRSTVWY";

enum class TokenClass { Special, AminoAcid, Structure, Text };

class Vocabulary {
public:
  // Word-level build: whitespace-split every corpus line, keep words with
  // count >= min_count. Deterministic for a given corpus.
  static Vocabulary build(const std::vector<std::string>& corpus, int min_count);

  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token_of(int id) const;
  // -1 when the string is not a token.
  int id_of(const std::string& token) const;
  TokenClass class_of(int id) const;

  // Whitespace-split; out-of-vocabulary words map to <UNK>.
  std::vector<int> encode_text(const std::string& text) const;
  // Joins token strings with single spaces (inverse of encode_text on
  // in-vocabulary, space-normalized text).
  std::string decode(const std::vector<int>& ids) const;

  int aa_id(char letter) const;  // throws on a letter outside the 20
  int str_id(int code) const;    // code in [0, 512)
  static bool is_structure_id(int id) { return id >= kStrBeginId && id < kStrEndId; }
  static int str_code(int id);   // inverse of str_id

private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;

  void finish_index();
  static std::vector<std::string> fixed_prefix();
};

std::vector<std::string> split_whitespace(const std::string& text);

}  // namespace pcc
