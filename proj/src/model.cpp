#include "pcc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace pcc {

void ModelConfig::validate() const {
  if (vocab_size <= 0) throw std::invalid_argument("model config: vocab_size must be positive");
  if (hidden_dim <= 0 || n_layers <= 0 || n_heads <= 0 || max_context <= 0 || mlp_ratio <= 0)
    throw std::invalid_argument("model config: all dimensions must be positive");
  if (hidden_dim % n_heads != 0)
    throw std::invalid_argument("model config: hidden_dim " + std::to_string(hidden_dim) +
                                " not divisible by n_heads " + std::to_string(n_heads));
}

static std::string block_prefix(int layer) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "block%02d.", layer);
  return buf;
}

template <typename S>
ModelT<S> ModelT<S>::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  const int d = config.hidden_dim;
  const int m = d * config.mlp_ratio;
  constexpr double kInitStd = 0.02;

  ModelT<S> model;
  model.config_ = config;
  model.tok_emb_ = TensorT<S>::randn({config.vocab_size, d}, rng, kInitStd);
  model.pos_emb_ = TensorT<S>::randn({config.max_context, d}, rng, kInitStd);
  model.blocks_.resize(static_cast<std::size_t>(config.n_layers));
  for (auto& block : model.blocks_) {
    block.wq = TensorT<S>::randn({d, d}, rng, kInitStd);
    block.wk = TensorT<S>::randn({d, d}, rng, kInitStd);
    block.wv = TensorT<S>::randn({d, d}, rng, kInitStd);
    block.wo = TensorT<S>::randn({d, d}, rng, kInitStd);
    block.mlp_w1 = TensorT<S>::randn({d, m}, rng, kInitStd);
    block.mlp_b1 = TensorT<S>::zeros({m});
    block.mlp_w2 = TensorT<S>::randn({m, d}, rng, kInitStd);
    block.mlp_b2 = TensorT<S>::zeros({d});
    block.ln1_g = TensorT<S>::full({d}, S(1));
    block.ln1_b = TensorT<S>::zeros({d});
    block.ln2_g = TensorT<S>::full({d}, S(1));
    block.ln2_b = TensorT<S>::zeros({d});
  }
  model.lnf_g_ = TensorT<S>::full({d}, S(1));
  model.lnf_b_ = TensorT<S>::zeros({d});
  return model;
}

template <typename S>
std::vector<std::pair<std::string, TensorT<S>>> ModelT<S>::named_params() {
  std::vector<std::pair<std::string, TensorT<S>>> out;
  out.emplace_back("tok_emb", tok_emb_);
  out.emplace_back("pos_emb", pos_emb_);
  for (int l = 0; l < config_.n_layers; ++l) {
    BlockT<S>& block = blocks_[static_cast<std::size_t>(l)];
    const std::string p = block_prefix(l);
    out.emplace_back(p + "wq", block.wq);
    out.emplace_back(p + "wk", block.wk);
    out.emplace_back(p + "wv", block.wv);
    out.emplace_back(p + "wo", block.wo);
    out.emplace_back(p + "mlp_w1", block.mlp_w1);
    out.emplace_back(p + "mlp_b1", block.mlp_b1);
    out.emplace_back(p + "mlp_w2", block.mlp_w2);
    out.emplace_back(p + "mlp_b2", block.mlp_b2);
    out.emplace_back(p + "ln1_g", block.ln1_g);
    out.emplace_back(p + "ln1_b", block.ln1_b);
    out.emplace_back(p + "ln2_g", block.ln2_g);
    out.emplace_back(p + "ln2_b", block.ln2_b);
  }
  out.emplace_back("lnf_g", lnf_g_);
  out.emplace_back("lnf_b", lnf_b_);
  return out;
}

template <typename S>
std::int64_t ModelT<S>::param_count() const {
  std::int64_t n = 0;
  n += static_cast<std::int64_t>(tok_emb_.numel()) + static_cast<std::int64_t>(pos_emb_.numel());
  for (const auto& block : blocks_) {
    n += static_cast<std::int64_t>(block.wq.numel()) + block.wk.numel() + block.wv.numel() +
         block.wo.numel() + block.mlp_w1.numel() + block.mlp_b1.numel() + block.mlp_w2.numel() +
         block.mlp_b2.numel() + block.ln1_g.numel() + block.ln1_b.numel() +
         block.ln2_g.numel() + block.ln2_b.numel();
  }
  n += static_cast<std::int64_t>(lnf_g_.numel()) + static_cast<std::int64_t>(lnf_b_.numel());
  return n;
}

template <typename S>
void ModelT<S>::attach_lora(int rank, double alpha, Rng& rng) {
  if (rank <= 0) throw std::invalid_argument("attach_lora: rank must be positive");
  if (has_lora()) throw std::logic_error("attach_lora: adapters already attached");
  const int d = config_.hidden_dim;
  constexpr double kInitStd = 0.02;
  for (auto& block : blocks_) {
    for (auto* slot : {&block.lora_q, &block.lora_k, &block.lora_v, &block.lora_o}) {
      LoraPairT<S> adapter;
      adapter.rank = rank;
      adapter.alpha = alpha;
      adapter.a = TensorT<S>::randn({d, rank}, rng, kInitStd, /*requires_grad=*/true);
      adapter.b = TensorT<S>::zeros({rank, d}, /*requires_grad=*/true);
      *slot = std::move(adapter);
    }
  }
}

template <typename S>
bool ModelT<S>::has_lora() const {
  for (const auto& block : blocks_)
    if (block.lora_q || block.lora_k || block.lora_v || block.lora_o) return true;
  return false;
}

template <typename S>
std::vector<std::pair<std::string, TensorT<S>>> ModelT<S>::lora_params() {
  std::vector<std::pair<std::string, TensorT<S>>> out;
  for (int l = 0; l < config_.n_layers; ++l) {
    BlockT<S>& block = blocks_[static_cast<std::size_t>(l)];
    const std::string p = block_prefix(l);
    const std::pair<const char*, std::optional<LoraPairT<S>>*> slots[] = {
        {"wq", &block.lora_q}, {"wk", &block.lora_k}, {"wv", &block.lora_v}, {"wo", &block.lora_o}};
    for (const auto& [name, slot] : slots) {
      if (!*slot) continue;
      out.emplace_back(p + name + ".lora_a", (*slot)->a);
      out.emplace_back(p + name + ".lora_b", (*slot)->b);
    }
  }
  return out;
}

template <typename S>
std::int64_t ModelT<S>::lora_param_count() const {
  std::int64_t n = 0;
  for (const auto& block : blocks_)
    for (const auto* slot : {&block.lora_q, &block.lora_k, &block.lora_v, &block.lora_o})
      if (*slot) n += static_cast<std::int64_t>((**slot).a.numel()) + (**slot).b.numel();
  return n;
}

template <typename S>
void ModelT<S>::merge_lora() {
  for (auto& block : blocks_) {
    const std::pair<TensorT<S>*, std::optional<LoraPairT<S>>*> slots[] = {
        {&block.wq, &block.lora_q},
        {&block.wk, &block.lora_k},
        {&block.wv, &block.lora_v},
        {&block.wo, &block.lora_o}};
    for (const auto& [w, slot] : slots) {
      if (!*slot) continue;
      const LoraPairT<S>& adapter = **slot;
      const int in = w->dim(0), out = w->dim(1);
      std::vector<S> delta(static_cast<std::size_t>(in) * out, S(0));
      mm_acc(adapter.a.values().data(), adapter.b.values().data(), delta.data(), in,
             adapter.rank, out);
      const S s = static_cast<S>(adapter.alpha / adapter.rank);
      auto wv = w->values();
      for (std::size_t i = 0; i < delta.size(); ++i) wv[i] += s * delta[i];
      slot->reset();
    }
  }
}

template <typename S>
TensorT<S> ModelT<S>::effective_weight(const TensorT<S>& w,
                                       const std::optional<LoraPairT<S>>& adapter) const {
  if (!adapter) return w;
  const S s = static_cast<S>(adapter->alpha / adapter->rank);
  return add(w, scale(matmul(adapter->a, adapter->b), s));
}

template <typename S>
TensorT<S> ModelT<S>::embed_tokens(const std::vector<int>& ids) const {
  const int t = static_cast<int>(ids.size());
  if (t > config_.max_context)
    throw std::length_error("embed_tokens: context overflow, " + std::to_string(t) +
                            " tokens > max_context " + std::to_string(config_.max_context));
  for (int i = 0; i < t; ++i)
    if (ids[static_cast<std::size_t>(i)] < 0 ||
        ids[static_cast<std::size_t>(i)] >= config_.vocab_size)
      throw std::out_of_range("embed_tokens: id " +
                              std::to_string(ids[static_cast<std::size_t>(i)]) +
                              " out of range at position " + std::to_string(i));
  if (t == 0) return TensorT<S>::zeros({0, config_.hidden_dim});
  return add(embedding_rows(tok_emb_, ids), slice_rows(pos_emb_, 0, t));
}

template <typename S>
TensorT<S> ModelT<S>::assemble_embeddings(const PromptPlan& plan,
                                          const TensorT<S>* demo_rows) const {
  const int t = plan.size();
  if (t > config_.max_context)
    throw std::length_error("assemble_embeddings: context overflow, " + std::to_string(t) +
                            " positions > max_context " + std::to_string(config_.max_context));
  if (t == 0) return TensorT<S>::zeros({0, config_.hidden_dim});

  // Group contiguous runs of one kind so each run is a single gather.
  std::vector<TensorT<S>> parts;
  int i = 0;
  while (i < t) {
    const PromptItemKind kind = plan.items[static_cast<std::size_t>(i)].kind;
    int j = i;
    while (j < t && plan.items[static_cast<std::size_t>(j)].kind == kind) ++j;
    switch (kind) {
      case PromptItemKind::Token: {
        std::vector<int> ids;
        ids.reserve(static_cast<std::size_t>(j - i));
        for (int k = i; k < j; ++k) ids.push_back(plan.items[static_cast<std::size_t>(k)].token_id);
        parts.push_back(embedding_rows(tok_emb_, ids));
        break;
      }
      case PromptItemKind::FusedResidue: {
        std::vector<int> aa, str;
        for (int k = i; k < j; ++k) {
          aa.push_back(plan.items[static_cast<std::size_t>(k)].aa_id);
          str.push_back(plan.items[static_cast<std::size_t>(k)].str_id);
        }
        parts.push_back(add(embedding_rows(tok_emb_, aa), embedding_rows(tok_emb_, str)));
        break;
      }
      case PromptItemKind::DemoVector: {
        if (!demo_rows)
          throw std::invalid_argument("assemble_embeddings: plan has demo slots but no rows");
        const int first = plan.items[static_cast<std::size_t>(i)].demo_row;
        for (int k = i; k < j; ++k)
          if (plan.items[static_cast<std::size_t>(k)].demo_row != first + (k - i))
            throw std::invalid_argument("assemble_embeddings: demo rows not consecutive");
        if (first + (j - i) > demo_rows->dim(0))
          throw std::invalid_argument("assemble_embeddings: demo matrix has " +
                                      std::to_string(demo_rows->dim(0)) + " rows, need " +
                                      std::to_string(first + (j - i)));
        parts.push_back(slice_rows(*demo_rows, first, j - i));
        break;
      }
    }
    i = j;
  }
  TensorT<S> stacked = parts.size() == 1
                           ? parts[0]
                           : concat_rows(std::span<const TensorT<S>>(parts.data(), parts.size()));
  return add(stacked, slice_rows(pos_emb_, 0, t));
}

template <typename S>
ForwardResultT<S> ModelT<S>::forward_embeddings(const TensorT<S>& embs,
                                                bool capture_attention) const {
  if (embs.rank() != 2 || embs.dim(1) != config_.hidden_dim)
    throw std::invalid_argument("forward: expected [T x " + std::to_string(config_.hidden_dim) +
                                "] embeddings, got " + shape_str(embs.shape()));
  const int t = embs.dim(0);
  if (t > config_.max_context)
    throw std::length_error("forward: context overflow, " + std::to_string(t) +
                            " positions > max_context " + std::to_string(config_.max_context));

  const int hd = config_.head_dim();
  const S inv_sqrt_hd = static_cast<S>(1.0 / std::sqrt(static_cast<double>(hd)));

  // Additive causal mask: 0 at or below the diagonal, a large negative
  // constant strictly above it.
  TensorT<S> mask = TensorT<S>::zeros({t, t});
  {
    auto mv = mask.values();
    for (int r = 0; r < t; ++r)
      for (int c = r + 1; c < t; ++c)
        mv[static_cast<std::size_t>(r) * t + c] = static_cast<S>(kCausalMaskValue);
  }

  ForwardResultT<S> result;
  if (capture_attention) {
    AttentionRecordT<S> record;
    record.t = t;
    record.n_heads = config_.n_heads;
    record.probs.resize(static_cast<std::size_t>(config_.n_layers));
    result.attention = std::move(record);
  }

  TensorT<S> x = embs;
  for (int l = 0; l < config_.n_layers; ++l) {
    const BlockT<S>& block = blocks_[static_cast<std::size_t>(l)];
    TensorT<S> h = layer_norm(x, block.ln1_g, block.ln1_b, static_cast<S>(kLayerNormEps));
    TensorT<S> q = matmul(h, effective_weight(block.wq, block.lora_q));
    TensorT<S> k = matmul(h, effective_weight(block.wk, block.lora_k));
    TensorT<S> v = matmul(h, effective_weight(block.wv, block.lora_v));

    std::vector<TensorT<S>> head_ctx;
    head_ctx.reserve(static_cast<std::size_t>(config_.n_heads));
    for (int head = 0; head < config_.n_heads; ++head) {
      TensorT<S> qh = slice_cols(q, head * hd, hd);
      TensorT<S> kh = slice_cols(k, head * hd, hd);
      TensorT<S> vh = slice_cols(v, head * hd, hd);
      TensorT<S> scores = add(scale(matmul_bt(qh, kh), inv_sqrt_hd), mask);
      TensorT<S> probs = softmax(scores, 1);
      if (result.attention) {
        auto pv = probs.values();
        result.attention->probs[static_cast<std::size_t>(l)].emplace_back(pv.begin(), pv.end());
      }
      head_ctx.push_back(matmul(probs, vh));
    }
    TensorT<S> ctx = config_.n_heads == 1
                         ? head_ctx[0]
                         : concat_cols(std::span<const TensorT<S>>(head_ctx.data(),
                                                                   head_ctx.size()));
    x = add(x, matmul(ctx, effective_weight(block.wo, block.lora_o)));

    TensorT<S> h2 = layer_norm(x, block.ln2_g, block.ln2_b, static_cast<S>(kLayerNormEps));
    TensorT<S> mid = gelu(add_row_broadcast(matmul(h2, block.mlp_w1), block.mlp_b1));
    x = add(x, add_row_broadcast(matmul(mid, block.mlp_w2), block.mlp_b2));
  }

  result.hidden = layer_norm(x, lnf_g_, lnf_b_, static_cast<S>(kLayerNormEps));
  result.logits = matmul_bt(result.hidden, tok_emb_);
  return result;
}

template <typename S>
ForwardResultT<S> ModelT<S>::forward_tokens(const std::vector<int>& ids,
                                            bool capture_attention) const {
  return forward_embeddings(embed_tokens(ids), capture_attention);
}

// ---- conversion ---------------------------------------------------------

static Tensor64 widen_tensor(const Tensor& t) {
  std::vector<double> data(t.values().begin(), t.values().end());
  auto out = Tensor64::from_data(t.shape(), std::move(data));
  out.set_requires_grad(t.requires_grad());
  return out;
}

ModelT<double> widen_model(const ModelT<float>& model) {
  Rng scratch(0);
  ModelT<double> wide = ModelT<double>::init(model.config(), scratch);
  auto src = const_cast<ModelT<float>&>(model).named_params();
  auto dst = wide.named_params();
  for (std::size_t i = 0; i < src.size(); ++i) {
    Tensor64 w = widen_tensor(src[i].second);
    std::copy(w.values().begin(), w.values().end(), dst[i].second.values().begin());
    dst[i].second.set_requires_grad(src[i].second.requires_grad());
  }
  for (std::size_t l = 0; l < model.blocks().size(); ++l) {
    const BlockT<float>& sb = model.blocks()[l];
    BlockT<double>& db = wide.blocks()[l];
    const std::pair<const std::optional<LoraPairT<float>>*, std::optional<LoraPairT<double>>*>
        slots[] = {{&sb.lora_q, &db.lora_q},
                   {&sb.lora_k, &db.lora_k},
                   {&sb.lora_v, &db.lora_v},
                   {&sb.lora_o, &db.lora_o}};
    for (const auto& [s_slot, d_slot] : slots) {
      if (!*s_slot) continue;
      LoraPairT<double> adapter;
      adapter.rank = (*s_slot)->rank;
      adapter.alpha = (*s_slot)->alpha;
      adapter.a = widen_tensor((*s_slot)->a);
      adapter.b = widen_tensor((*s_slot)->b);
      *d_slot = std::move(adapter);
    }
  }
  return wide;
}

// ---- attention summary --------------------------------------------------

template <typename S>
std::vector<SegmentScore> attention_summary(
    const AttentionRecordT<S>& record,
    const std::vector<std::pair<std::string, TokenRange>>& segments) {
  if (record.probs.empty()) throw std::invalid_argument("attention_summary: empty record");
  const int t = record.t;
  if (segments.empty()) throw std::invalid_argument("attention_summary: no segments");

  std::vector<TokenRange> sorted;
  for (const auto& [label, range] : segments) {
    (void)label;
    if (range.begin < 0 || range.end > t || range.begin > range.end)
      throw std::invalid_argument("attention_summary: segment [" + std::to_string(range.begin) +
                                  ", " + std::to_string(range.end) + ") outside [0, " +
                                  std::to_string(t) + ")");
    sorted.push_back(range);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const TokenRange& a, const TokenRange& b) { return a.begin < b.begin; });
  int cursor = 0;
  for (const auto& range : sorted) {
    if (range.begin != cursor)
      throw std::invalid_argument("attention_summary: segments do not partition [0, " +
                                  std::to_string(t) + ") — gap or overlap at position " +
                                  std::to_string(cursor));
    cursor = range.end;
  }
  if (cursor != t)
    throw std::invalid_argument("attention_summary: segments do not cover [0, " +
                                std::to_string(t) + ")");

  const auto& last_layer = record.probs.back();
  std::vector<SegmentScore> out;
  for (const auto& [label, range] : segments) {
    double total = 0.0;
    for (const auto& head : last_layer) {
      for (int row = 0; row < t; ++row) {
        double mass = 0.0;
        for (int col = range.begin; col < range.end; ++col)
          mass += static_cast<double>(head[static_cast<std::size_t>(row) * t + col]);
        total += mass;
      }
    }
    const double denom = static_cast<double>(last_layer.size()) * t;
    SegmentScore score;
    score.label = label;
    score.avg_score = total / denom;
    score.percentage = 100.0 * score.avg_score;
    out.push_back(std::move(score));
  }
  return out;
}

template class ModelT<float>;
template class ModelT<double>;
template std::vector<SegmentScore> attention_summary<float>(
    const AttentionRecordT<float>&, const std::vector<std::pair<std::string, TokenRange>>&);
template std::vector<SegmentScore> attention_summary<double>(
    const AttentionRecordT<double>&, const std::vector<std::pair<std::string, TokenRange>>&);

}  // namespace pcc
