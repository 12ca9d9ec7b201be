#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pcc/compress.hpp"
#include "pcc/dataset.hpp"
#include "pcc/model.hpp"

namespace pcc {

double cosine_similarity(std::span<const float> a, std::span<const float> b);

// Mean pool over final-layer hidden states of a forward pass on
// [question, <PROT_S>, fused residues, </PROT_S>].
std::vector<float> query_embedding(const QARecord& record, const Model& model,
                                   const Codebook& codebook, const Vocabulary& vocab);

// Exhaustive scan; sorted by similarity desc, ties by lower id.
std::vector<std::string> retrieve_top_k(std::span<const float> query, const DemoBank& bank,
                                        int k, const std::set<std::string>& exclude_ids);

// Okapi BM25 over question + answer words plus amino-acid letter unigrams.
class Bm25Index {
public:
  static Bm25Index build(const std::vector<QARecord>& records, double k1 = 1.5,
                         double b = 0.75);

  // Query terms: question words + the query protein's AA letters.
  std::vector<std::string> rank(const std::string& question, const std::string& sequence,
                                int k) const;
  double score(const std::string& doc_id, const std::vector<std::string>& query_terms) const;
  std::size_t size() const { return doc_ids_.size(); }

private:
  double k1_ = 1.5;
  double b_ = 0.75;
  double avg_doc_len_ = 0.0;
  std::vector<std::string> doc_ids_;
  std::vector<std::map<std::string, int>> term_freqs_;
  std::vector<int> doc_lens_;
  std::map<std::string, double> idf_;
  std::map<std::string, std::size_t> id_to_index_;
};

// Uniform without replacement, reproducible per seed; returned in draw order.
std::vector<std::string> random_select(const DemoBank& bank, int k, std::uint64_t seed);

// Order for prompt assembly: most relevant demo last (adjacent to the query).
std::vector<std::string> prompt_order(std::vector<std::string> ranked_desc);

}  // namespace pcc
