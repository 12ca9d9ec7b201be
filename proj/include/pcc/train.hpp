#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pcc/compress.hpp"
#include "pcc/dataset.hpp"
#include "pcc/model.hpp"

namespace pcc {

// True exactly where the next-token target is an answer token; mask is over
// logit rows, so it covers [answer.begin - 1, answer.end - 1).
Mask answer_mask(const PromptPlan& plan);
// targets[t] = token id at position t + 1 (0 where unsupervised).
std::vector<int> shifted_targets(const PromptPlan& plan);

struct Stage1Config {
  double lr = 1e-3;
  int batch_size = 4;
  int epochs = 1;
  std::uint64_t seed = 0;
  int lora_rank = 8;
  double lora_alpha = 16.0;
  double grad_clip = 1.0;
};

struct Stage2Config {
  double lr = 3e-3;
  int batch_size = 4;
  int epochs = 3;
  std::uint64_t seed = 0;
  int x = 16;
  std::vector<int> n_range = {1, 2, 4, 8, 16};
  double grad_clip = 1.0;
  double max_skip_fraction = 0.1;
};

struct TrainResult {
  std::vector<std::pair<int, double>> loss_curve;  // (step, batch mean loss)
  std::vector<double> epoch_mean;
  int skipped = 0;  // stage 2: ICL prompts over max_context
  int total = 0;
};

// Trains LoRA (all attention projections) plus the protein-token embedding
// rows on the joint-layout answer loss; merges adapters before returning, so
// the model comes back frozen and serializable.
TrainResult train_stage1(Model& model, const std::vector<QARecord>& train,
                         const Codebook& codebook, const Vocabulary& vocab,
                         const Stage1Config& config);

// Mean answer cross-entropy without any weight update (limit 0 = all).
double eval_answer_loss(const Model& model, const std::vector<QARecord>& records,
                        const Codebook& codebook, const Vocabulary& vocab, int limit = 0);

// Projection-independent cache for stage 2: raw last-x hidden rows and raw
// retrieval keys per compressible demo (the backbone never reruns on them).
struct Stage2Pool {
  int x = 0;
  int d_f = 0;
  std::vector<int> record_index;  // pool slot -> index into the source records
  std::vector<std::string> ids;
  std::vector<std::vector<float>> raw;   // [x * d_f] each
  std::vector<std::vector<float>> keys;  // [d_f] each
  std::vector<std::pair<std::string, std::string>> skipped_demos;  // (id, reason)
};

Stage2Pool prepare_stage2_pool(const Model& model, const std::vector<QARecord>& records,
                               const Codebook& codebook, const Vocabulary& vocab, int x);

// Ranks pool slots for one query embedding: similarity desc, ties by id,
// excluding exclude_slot (-1 for none); at most max_shots entries.
std::vector<int> rank_pool(const Stage2Pool& pool, const std::vector<float>& query_emb,
                           int exclude_slot, int max_shots);

// Trains only the projection; demos are selected per query by dense
// retrieval excluding the query itself, N drawn per batch from n_range.
// pool, when given, must come from prepare_stage2_pool over the same records
// with the same x (passing it avoids recompressing for surrounding evals).
TrainResult train_stage2(const Model& model, Projection& proj,
                         const std::vector<QARecord>& train, const Codebook& codebook,
                         const Vocabulary& vocab, const Stage2Config& config,
                         const Stage2Pool* pool = nullptr);

// Mean ICL answer loss with n_shots demos retrieved densely from the pool;
// used for before/after comparisons of stage-2 training.
double eval_stage2_loss(const Model& model, const Projection& proj, const Stage2Pool& pool,
                        const std::vector<QARecord>& queries, const Codebook& codebook,
                        const Vocabulary& vocab, int n_shots, int limit = 0);

void write_loss_csv(const TrainResult& result, const std::string& path);

}  // namespace pcc
