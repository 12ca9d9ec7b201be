#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pcc/protein.hpp"
#include "pcc/tensor.hpp"

namespace pcc {

struct ModelConfig {
  int vocab_size = 0;
  int hidden_dim = 64;
  int n_layers = 4;
  int n_heads = 4;
  int max_context = 1024;
  int mlp_ratio = 4;

  int head_dim() const { return hidden_dim / n_heads; }
  void validate() const;
};

inline constexpr float kLayerNormEps = 1e-5f;
inline constexpr float kCausalMaskValue = -1e9f;

// Low-rank adapter on one weight matrix W [in x out]:
//   effective W = W + (alpha/rank) * a * b,  a: [in x rank], b: [rank x out].
// b starts at zero, so a fresh adapter is exactly inert.
template <typename S>
struct LoraPairT {
  TensorT<S> a;
  TensorT<S> b;
  int rank = 0;
  double alpha = 0.0;
};

template <typename S>
struct BlockT {
  TensorT<S> wq, wk, wv, wo;                      // [d x d]
  TensorT<S> mlp_w1, mlp_b1, mlp_w2, mlp_b2;      // [d x 4d], [4d], [4d x d], [d]
  TensorT<S> ln1_g, ln1_b, ln2_g, ln2_b;          // [d]
  std::optional<LoraPairT<S>> lora_q, lora_k, lora_v, lora_o;
};

// Softmaxed attention probabilities, captured on request.
template <typename S>
struct AttentionRecordT {
  int t = 0;
  int n_heads = 0;
  std::vector<std::vector<std::vector<S>>> probs;  // [layer][head] -> row-major [t x t]
};

using AttentionRecord = AttentionRecordT<float>;

template <typename S>
struct ForwardResultT {
  TensorT<S> hidden;  // [T x d], after the final layer norm
  TensorT<S> logits;  // [T x vocab], tied to the embedding table
  std::optional<AttentionRecordT<S>> attention;
};

// Decoder-only causal transformer: learned absolute positions, pre-norm
// residual blocks, GELU MLP, logits tied to the token-embedding table.
// Parameters default to requires_grad = false; training code opts tensors in.
template <typename S>
class ModelT {
public:
  ModelT() = default;

  static ModelT init(const ModelConfig& config, Rng& rng);

  const ModelConfig& config() const { return config_; }

  TensorT<S>& tok_emb() { return tok_emb_; }
  const TensorT<S>& tok_emb() const { return tok_emb_; }
  TensorT<S>& pos_emb() { return pos_emb_; }
  const TensorT<S>& pos_emb() const { return pos_emb_; }
  std::vector<BlockT<S>>& blocks() { return blocks_; }
  const std::vector<BlockT<S>>& blocks() const { return blocks_; }
  TensorT<S>& lnf_g() { return lnf_g_; }
  TensorT<S>& lnf_b() { return lnf_b_; }

  // Stable names (tok_emb, pos_emb, block00.wq, ..., lnf_g) used by the
  // checkpoint format and the optimizer.
  std::vector<std::pair<std::string, TensorT<S>>> named_params();
  std::int64_t param_count() const;

  // LoRA on every attention projection (Q, K, V, O) of every layer.
  void attach_lora(int rank, double alpha, Rng& rng);
  bool has_lora() const;
  std::vector<std::pair<std::string, TensorT<S>>> lora_params();
  std::int64_t lora_param_count() const;
  void merge_lora();  // folds (alpha/rank)*a*b into each W and drops adapters

  // Token + position embeddings for a plain id sequence.
  TensorT<S> embed_tokens(const std::vector<int>& ids) const;

  // Embedding matrix for an assembled prompt. Fused residue slots sum the
  // amino-acid and structure embeddings; demo slots copy rows of demo_rows
  // (required when the plan contains any, row count must cover the slots).
  TensorT<S> assemble_embeddings(const PromptPlan& plan, const TensorT<S>* demo_rows) const;

  ForwardResultT<S> forward_embeddings(const TensorT<S>& embs, bool capture_attention) const;
  ForwardResultT<S> forward_tokens(const std::vector<int>& ids, bool capture_attention) const;

private:
  ModelConfig config_;
  TensorT<S> tok_emb_;  // [vocab x d]
  TensorT<S> pos_emb_;  // [max_context x d]
  std::vector<BlockT<S>> blocks_;
  TensorT<S> lnf_g_, lnf_b_;

  TensorT<S> effective_weight(const TensorT<S>& w,
                              const std::optional<LoraPairT<S>>& adapter) const;
};

using Model = ModelT<float>;

// Copies every parameter (and any attached adapters) into a double-precision
// model for finite-difference gradient checks.
ModelT<double> widen_model(const ModelT<float>& model);

struct SegmentScore {
  std::string label;
  double avg_score = 0.0;   // mean attention mass into the segment, in [0, 1]
  double percentage = 0.0;  // 100 * avg_score
};

// Mean over last-layer heads and query rows of the attention mass landing in
// each segment. Segments must partition [0, t).
template <typename S>
std::vector<SegmentScore> attention_summary(
    const AttentionRecordT<S>& record,
    const std::vector<std::pair<std::string, TokenRange>>& segments);

}  // namespace pcc
