#pragma once

#include <span>
#include <string>
#include <vector>

#include "pcc/vocab.hpp"

namespace pcc {

// VQ codebook used at tokenization time only; structure tokens then live in
// the vocabulary like any other id.
struct Codebook {
  int dim = 0;
  std::vector<float> codes;  // [512 x dim], row-major

  std::span<const float> code(int j) const;
  void validate() const;  // 512 finite rows

  static Codebook load(const std::string& path);
  void save(const std::string& path) const;
};

struct ProteinRecord {
  std::string id;
  std::string sequence;                   // one letter per residue
  std::vector<float> structure_features;  // [N_res x d_c]; empty if codes given
  std::vector<int> structure_codes;       // pre-quantized, in [0, 512); may be empty
};

// Nearest code index per feature row (squared Euclidean, ties to the lowest
// index). features is [n_rows x codebook.dim].
std::vector<int> quantize_structure(std::span<const float> features, int n_rows,
                                    const Codebook& codebook);

struct EncodedProtein {
  std::vector<int> t_s;  // amino-acid ids, length N_res
  std::vector<int> t_x;  // structure ids, length N_res
};

EncodedProtein encode_protein(const ProteinRecord& record, const Codebook& codebook,
                              const Vocabulary& vocab);

// ---- prompt assembly ----------------------------------------------------

struct TokenRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
};

enum class PromptItemKind {
  Token,         // ordinary vocabulary id
  FusedResidue,  // one residue slot: embedding(aa_id) + embedding(str_id)
  DemoVector,    // one compressed demonstration vector, supplied externally
};

struct PromptItem {
  PromptItemKind kind = PromptItemKind::Token;
  int token_id = -1;
  int aa_id = -1;
  int str_id = -1;
  int demo_row = -1;  // row into the stacked demo-vector matrix

  static PromptItem token(int id) { return {PromptItemKind::Token, id, -1, -1, -1}; }
  static PromptItem fused(int aa, int str) {
    return {PromptItemKind::FusedResidue, -1, aa, str, -1};
  }
  static PromptItem demo(int row) { return {PromptItemKind::DemoVector, -1, -1, -1, row}; }
};

enum class PromptLayout { Separate, Joint };

// The question is repeated on both sides of the protein span; segment ranges
// partition [0, size) and drive loss masking and attention reporting.
struct PromptPlan {
  std::vector<PromptItem> items;
  TokenRange demos;        // compressed demonstration vectors (often empty)
  TokenRange text_before;  // first copy of the question
  TokenRange protein;      // delimiters plus residue positions
  TokenRange text_after;   // second copy of the question
  TokenRange answer;       // supervision span (often empty at inference)

  int size() const { return static_cast<int>(items.size()); }
  std::vector<int> token_ids() const;  // throws if any item is not a Token
};

PromptPlan assemble_prompt(const std::vector<int>& question_ids, const std::vector<int>& t_s,
                           const std::vector<int>& t_x, PromptLayout layout,
                           const std::vector<int>& answer_ids, int max_context);

// Inserts n_rows compressed-demo slots at the front, shifting every range.
void prepend_demo_rows(PromptPlan& plan, int n_rows);

}  // namespace pcc
