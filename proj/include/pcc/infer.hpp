#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcc/compress.hpp"
#include "pcc/dataset.hpp"
#include "pcc/model.hpp"
#include "pcc/retrieval.hpp"

namespace pcc {

// Greedy decoding from an assembled prompt (answer span must be empty):
// argmax at every step with ties broken toward the lowest id, stopping at
// <EOS> (never returned) or after max_new_tokens.
std::vector<int> generate_greedy(const Model& model, const PromptPlan& plan,
                                 const Tensor* demo_rows, int max_new_tokens = 64);

// Demo ids in retrieval order (most relevant first). scores carries cosine
// similarities for the dense strategy and stays empty otherwise.
struct DemoSelection {
  std::vector<std::string> ids;
  std::vector<double> scores;
};

DemoSelection select_demos(const QARecord& query, const Model& model, const DemoBank& bank,
                           const Bm25Index* bm25, const Codebook& codebook,
                           const Vocabulary& vocab, const std::string& strategy, int n,
                           std::uint64_t seed);

struct InferTrace {
  std::string id;
  std::string strategy;
  int n = 0;
  int x = 0;
  std::vector<std::string> selected_demos;  // retrieval order, most relevant first
  std::vector<double> similarity_scores;    // dense strategy only, aligned with selected_demos
  std::string answer;
  int prompt_tokens = 0;
  int generated_tokens = 0;
};

// Joint-layout query prompt with n compressed demos in front (most relevant
// adjacent to the query), then greedy decoding. n = 0 is plain zero-shot.
// strategy is one of random | bm25 | dense; bm25 needs an index, n > 0 needs
// a bank, and seed only matters for random.
InferTrace run_icl_inference(const QARecord& query, const Model& model, const DemoBank* bank,
                             const Bm25Index* bm25, const Codebook& codebook,
                             const Vocabulary& vocab, const std::string& strategy, int n,
                             std::uint64_t seed, int max_new_tokens = 64);

// One JSON object per line with integer and string fields only, so equal
// traces serialize to identical bytes.
void write_infer_jsonl(const std::vector<InferTrace>& traces, const std::string& path);

}  // namespace pcc
