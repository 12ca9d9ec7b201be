#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcc/compress.hpp"
#include "pcc/dataset.hpp"
#include "pcc/metrics.hpp"
#include "pcc/model.hpp"

namespace pcc {

// Token accounting for an N-shot prompt: verbatim demonstrations versus
// x compressed vectors per demonstration, query text unchanged.
struct BudgetReport {
  int n = 0;
  int x = 0;
  double query_tokens = 0.0;
  double mean_demo_tokens = 0.0;
  double uncompressed_tokens = 0.0;  // n * mean_demo_tokens + query_tokens
  double compressed_tokens = 0.0;    // n * x + query_tokens
  double saved_tokens = 0.0;
  double compression_ratio = 0.0;    // 1 - compressed / uncompressed
  int per_demo_compressed = 0;       // always x
};

// per_demo_tokens may list each of the n demos or be any sample whose mean
// stands in for them (fractional averages are fine).
BudgetReport budget_report(const std::vector<double>& per_demo_tokens, double query_tokens,
                           int x, int n);
std::string budget_json(const BudgetReport& report);

// Verbatim token count of one stored demonstration in the uncompressed
// (separate sequence + structure) layout, from bank metadata.
double demo_token_count(const CompressedDemo& demo);

struct EvalReport {
  int n = 0;
  int empty_predictions = 0;
  double emji = 0.0;
  double bleu2 = 0.0;
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rouge_l = 0.0;
};

EvalReport evaluate_answers(const std::vector<std::string>& predictions,
                            const std::vector<std::string>& references,
                            const KeywordLexicon& lexicon);
std::string eval_json(const EvalReport& report);

// Mean last-layer attention split over zero-shot joint prompts, segmented as
// question / fused protein span / repeated question. Percentages sum to 100.
std::vector<SegmentScore> attention_report(const Model& model,
                                           const std::vector<QARecord>& queries,
                                           const Codebook& codebook, const Vocabulary& vocab,
                                           int limit = 0);

struct SweepRow {
  int x = 0;
  int n = 0;
  EvalReport metrics;
  double top1_emji = 0.0;     // baseline: emit the top dense demo's stored answer
  double top1_rouge_l = 0.0;
};

struct SweepOptions {
  std::vector<int> x_values = {4, 8, 16};
  std::vector<int> n_values = {0, 1, 2, 4};
  std::string strategy = "dense";
  std::uint64_t seed = 0;
  int limit = 0;  // cap on evaluation queries, 0 = all
  int max_new_tokens = 64;
};

// Rebuilds the demo bank for every x, then scores every (x, n) cell on the
// query split; the top-1 copy baseline is n-independent within an x.
std::vector<SweepRow> run_sweep(const Model& model, const Projection& proj,
                                const std::vector<QARecord>& demos,
                                const std::vector<QARecord>& queries, const Codebook& codebook,
                                const Vocabulary& vocab, const KeywordLexicon& lexicon,
                                const SweepOptions& options);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace pcc
