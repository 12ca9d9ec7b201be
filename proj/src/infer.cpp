#include "pcc/infer.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "pcc/vocab.hpp"

namespace pcc {

std::vector<int> generate_greedy(const Model& model, const PromptPlan& plan,
                                 const Tensor* demo_rows, int max_new_tokens) {
  if (max_new_tokens < 0) throw std::invalid_argument("generate_greedy: negative max_new_tokens");
  if (plan.answer.size() > 0)
    throw std::invalid_argument("generate_greedy: plan already contains an answer span");
  const ModelConfig& cfg = model.config();
  if (plan.size() + 1 > cfg.max_context)
    throw std::length_error("generate_greedy: no room left in the context window");

  const int d = cfg.hidden_dim;
  const int v = cfg.vocab_size;
  Tensor prompt_embs = model.assemble_embeddings(plan, demo_rows);
  std::vector<float> buf(prompt_embs.values().begin(), prompt_embs.values().end());
  const std::span<const float> tok = model.tok_emb().values();
  const std::span<const float> pos = model.pos_emb().values();

  std::vector<int> out;
  int t = plan.size();
  while (static_cast<int>(out.size()) < max_new_tokens && t < cfg.max_context) {
    const ForwardResultT<float> fwd =
        model.forward_embeddings(Tensor::from_data({t, d}, buf), false);
    const std::span<const float> row =
        fwd.logits.values().subspan(static_cast<std::size_t>(t - 1) * v, v);
    int best = 0;
    float best_val = row[0];
    for (int i = 1; i < v; ++i) {
      if (row[i] > best_val) {
        best_val = row[i];
        best = i;
      }
    }
    if (best == kEosId) break;
    out.push_back(best);
    for (int c = 0; c < d; ++c)
      buf.push_back(tok[static_cast<std::size_t>(best) * d + c] +
                    pos[static_cast<std::size_t>(t) * d + c]);
    ++t;
  }
  return out;
}

DemoSelection select_demos(const QARecord& query, const Model& model, const DemoBank& bank,
                           const Bm25Index* bm25, const Codebook& codebook,
                           const Vocabulary& vocab, const std::string& strategy, int n,
                           std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("select_demos: negative n");
  if (strategy != "random" && strategy != "bm25" && strategy != "dense")
    throw std::invalid_argument("select_demos: unknown strategy '" + strategy + "'");

  DemoSelection sel;
  if (n == 0) return sel;
  if (strategy == "dense") {
    const std::vector<float> qe = query_embedding(query, model, codebook, vocab);
    sel.ids = retrieve_top_k(qe, bank, n, {query.id});
    for (const std::string& id : sel.ids)
      sel.scores.push_back(cosine_similarity(qe, bank.find(id)->key));
  } else if (strategy == "bm25") {
    if (bm25 == nullptr)
      throw std::invalid_argument("select_demos: bm25 strategy requires an index");
    // Full ranking, then the top n that exist in the bank and are not the
    // query itself.
    const std::vector<std::string> full =
        bm25->rank(query.question, query.sequence, static_cast<int>(bm25->size()));
    for (const std::string& id : full) {
      if (static_cast<int>(sel.ids.size()) >= n) break;
      if (id != query.id && bank.find(id) != nullptr) sel.ids.push_back(id);
    }
  } else {
    sel.ids = random_select(bank, std::min<int>(n, static_cast<int>(bank.demos.size())), seed);
  }
  return sel;
}

InferTrace run_icl_inference(const QARecord& query, const Model& model, const DemoBank* bank,
                             const Bm25Index* bm25, const Codebook& codebook,
                             const Vocabulary& vocab, const std::string& strategy, int n,
                             std::uint64_t seed, int max_new_tokens) {
  if (n < 0) throw std::invalid_argument("run_icl_inference: negative n");
  if (strategy != "random" && strategy != "bm25" && strategy != "dense")
    throw std::invalid_argument("run_icl_inference: unknown strategy '" + strategy + "'");

  InferTrace trace;
  trace.id = query.id;
  trace.strategy = strategy;
  trace.n = n;
  trace.x = bank != nullptr ? bank->x : 0;

  std::vector<const CompressedDemo*> ordered;
  Tensor demo_rows;
  if (n > 0) {
    if (bank == nullptr)
      throw std::invalid_argument("run_icl_inference: n > 0 requires a demo bank");
    if (bank->d_f != model.config().hidden_dim)
      throw std::invalid_argument("run_icl_inference: bank width does not match the model");

    const DemoSelection sel =
        select_demos(query, model, *bank, bm25, codebook, vocab, strategy, n, seed);
    trace.selected_demos = sel.ids;
    trace.similarity_scores = sel.scores;

    for (const std::string& id : prompt_order(sel.ids)) {
      const CompressedDemo* demo = bank->find(id);
      if (demo == nullptr)
        throw std::runtime_error("run_icl_inference: demo '" + id + "' missing from the bank");
      ordered.push_back(demo);
    }
    if (!ordered.empty()) demo_rows = concat_demos(ordered, bank->x, bank->d_f);
  }

  const EncodedProtein enc = encode_protein(to_protein_record(query), codebook, vocab);
  PromptPlan plan = assemble_prompt(vocab.encode_text(query.question), enc.t_s, enc.t_x,
                                    PromptLayout::Joint, {}, model.config().max_context);
  if (bank != nullptr) prepend_demo_rows(plan, static_cast<int>(ordered.size()) * bank->x);
  trace.prompt_tokens = plan.size();

  const std::vector<int> ids =
      generate_greedy(model, plan, ordered.empty() ? nullptr : &demo_rows, max_new_tokens);
  trace.generated_tokens = static_cast<int>(ids.size());
  trace.answer = vocab.decode(ids);
  return trace;
}

void write_infer_jsonl(const std::vector<InferTrace>& traces, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_infer_jsonl: cannot open " + path);
  for (const InferTrace& trace : traces) {
    nlohmann::json j;
    j["id"] = trace.id;
    j["strategy"] = trace.strategy;
    j["N"] = trace.n;
    j["x"] = trace.x;
    j["selected_demos"] = trace.selected_demos;
    j["answer"] = trace.answer;
    j["prompt_tokens"] = trace.prompt_tokens;
    j["generated_tokens"] = trace.generated_tokens;
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write_infer_jsonl: write failed for " + path);
}

}  // namespace pcc
