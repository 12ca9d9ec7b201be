#include "pcc/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

#include "pcc/infer.hpp"
#include "pcc/retrieval.hpp"
#include "pcc/rng.hpp"

namespace pcc {

BudgetReport budget_report(const std::vector<double>& per_demo_tokens, double query_tokens,
                           int x, int n) {
  if (per_demo_tokens.empty()) throw std::invalid_argument("budget_report: no demo lengths");
  if (query_tokens < 0.0) throw std::invalid_argument("budget_report: negative query length");
  if (x <= 0 || n <= 0) throw std::invalid_argument("budget_report: x and n must be positive");
  for (double len : per_demo_tokens)
    if (len <= 0.0) throw std::invalid_argument("budget_report: non-positive demo length");

  BudgetReport r;
  r.n = n;
  r.x = x;
  r.query_tokens = query_tokens;
  r.mean_demo_tokens =
      std::accumulate(per_demo_tokens.begin(), per_demo_tokens.end(), 0.0) /
      static_cast<double>(per_demo_tokens.size());
  r.uncompressed_tokens = n * r.mean_demo_tokens + query_tokens;
  r.compressed_tokens = n * static_cast<double>(x) + query_tokens;
  r.saved_tokens = r.uncompressed_tokens - r.compressed_tokens;
  r.compression_ratio = 1.0 - r.compressed_tokens / r.uncompressed_tokens;
  r.per_demo_compressed = x;
  return r;
}

std::string budget_json(const BudgetReport& report) {
  nlohmann::json j;
  j["n"] = report.n;
  j["x"] = report.x;
  j["query_tokens"] = report.query_tokens;
  j["mean_demo_tokens"] = report.mean_demo_tokens;
  j["uncompressed_tokens"] = report.uncompressed_tokens;
  j["compressed_tokens"] = report.compressed_tokens;
  j["saved_tokens"] = report.saved_tokens;
  j["compression_ratio"] = report.compression_ratio;
  j["per_demo_compressed"] = report.per_demo_compressed;
  return j.dump(2);
}

double demo_token_count(const CompressedDemo& demo) {
  // question twice + <PROT_S> t_s </PROT_S> <PROT_X> t_x </PROT_X> + answer
  return 2.0 * demo.question_len + 2.0 * demo.protein_len + 4.0 + demo.answer_len;
}

EvalReport evaluate_answers(const std::vector<std::string>& predictions,
                            const std::vector<std::string>& references,
                            const KeywordLexicon& lexicon) {
  if (predictions.empty()) throw std::invalid_argument("evaluate_answers: nothing to score");
  if (predictions.size() != references.size())
    throw std::invalid_argument("evaluate_answers: prediction/reference count mismatch");

  EvalReport report;
  report.n = static_cast<int>(predictions.size());
  std::vector<std::set<std::string>> pred_sets, ref_sets;
  pred_sets.reserve(predictions.size());
  ref_sets.reserve(references.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    pred_sets.push_back(lexicon.extract(predictions[i]));
    ref_sets.push_back(lexicon.extract(references[i]));
    const BleuResult b = bleu(predictions[i], references[i], 2);
    if (b.empty_prediction) ++report.empty_predictions;
    report.bleu2 += b.score;
    report.rouge1 += rouge_n(predictions[i], references[i], 1);
    report.rouge2 += rouge_n(predictions[i], references[i], 2);
    report.rouge_l += rouge_l(predictions[i], references[i]);
  }
  report.emji = emji(pred_sets, ref_sets);
  report.bleu2 /= report.n;
  report.rouge1 /= report.n;
  report.rouge2 /= report.n;
  report.rouge_l /= report.n;
  return report;
}

std::string eval_json(const EvalReport& report) {
  nlohmann::json j;
  j["n"] = report.n;
  j["empty_predictions"] = report.empty_predictions;
  j["emji"] = report.emji;
  j["bleu2"] = report.bleu2;
  j["rouge1"] = report.rouge1;
  j["rouge2"] = report.rouge2;
  j["rouge_l"] = report.rouge_l;
  return j.dump(2);
}

std::vector<SegmentScore> attention_report(const Model& model,
                                           const std::vector<QARecord>& queries,
                                           const Codebook& codebook, const Vocabulary& vocab,
                                           int limit) {
  if (queries.empty()) throw std::invalid_argument("attention_report: no queries");
  std::size_t n = queries.size();
  if (limit > 0) n = std::min(n, static_cast<std::size_t>(limit));

  std::vector<SegmentScore> mean(3);
  mean[0].label = "text_before";
  mean[1].label = "protein";
  mean[2].label = "text_after";
  for (std::size_t i = 0; i < n; ++i) {
    const EncodedProtein enc =
        encode_protein(to_protein_record(queries[i]), codebook, vocab);
    const PromptPlan plan =
        assemble_prompt(vocab.encode_text(queries[i].question), enc.t_s, enc.t_x,
                        PromptLayout::Joint, {}, model.config().max_context);
    const Tensor embs = model.assemble_embeddings(plan, nullptr);
    const ForwardResultT<float> fwd = model.forward_embeddings(embs, true);
    const std::vector<SegmentScore> one = attention_summary(
        *fwd.attention, {{mean[0].label, plan.text_before},
                         {mean[1].label, plan.protein},
                         {mean[2].label, plan.text_after}});
    for (std::size_t s = 0; s < 3; ++s) mean[s].avg_score += one[s].avg_score;
  }
  for (SegmentScore& s : mean) {
    s.avg_score /= static_cast<double>(n);
    s.percentage = 100.0 * s.avg_score;
  }
  return mean;
}

std::vector<SweepRow> run_sweep(const Model& model, const Projection& proj,
                                const std::vector<QARecord>& demos,
                                const std::vector<QARecord>& queries, const Codebook& codebook,
                                const Vocabulary& vocab, const KeywordLexicon& lexicon,
                                const SweepOptions& options) {
  if (options.x_values.empty() || options.n_values.empty())
    throw std::invalid_argument("run_sweep: empty grid");
  if (queries.empty()) throw std::invalid_argument("run_sweep: no queries");

  std::size_t q_count = queries.size();
  if (options.limit > 0) q_count = std::min(q_count, static_cast<std::size_t>(options.limit));

  std::vector<std::string> references;
  references.reserve(q_count);
  for (std::size_t i = 0; i < q_count; ++i) references.push_back(queries[i].answer);

  Bm25Index bm25;
  if (options.strategy == "bm25") bm25 = Bm25Index::build(demos);

  std::vector<SweepRow> rows;
  for (int x : options.x_values) {
    const BankBuildResult built = build_demo_bank(demos, model, proj, codebook, vocab, x);
    const DemoBank& bank = built.bank;
    if (bank.demos.empty())
      throw std::runtime_error("run_sweep: no demonstration fit x=" + std::to_string(x));

    // Copy baseline: answer of the best dense-retrieved demo, n-independent.
    double top1_emji = 0.0;
    double top1_rouge = 0.0;
    {
      std::vector<std::string> copied;
      copied.reserve(q_count);
      for (std::size_t i = 0; i < q_count; ++i) {
        const std::vector<float> qe = query_embedding(queries[i], model, codebook, vocab);
        const std::vector<std::string> top =
            retrieve_top_k(qe, bank, 1, {queries[i].id});
        std::string answer;
        for (const QARecord& rec : demos)
          if (rec.id == top.at(0)) { answer = rec.answer; break; }
        copied.push_back(answer);
      }
      const EvalReport copy_report = evaluate_answers(copied, references, lexicon);
      top1_emji = copy_report.emji;
      top1_rouge = copy_report.rouge_l;
    }

    for (int n : options.n_values) {
      std::vector<std::string> predictions;
      predictions.reserve(q_count);
      for (std::size_t i = 0; i < q_count; ++i) {
        const InferTrace trace = run_icl_inference(
            queries[i], model, &bank, options.strategy == "bm25" ? &bm25 : nullptr, codebook,
            vocab, options.strategy, n, Rng::derive(options.seed, queries[i].id),
            options.max_new_tokens);
        predictions.push_back(trace.answer);
      }
      SweepRow row;
      row.x = x;
      row.n = n;
      row.metrics = evaluate_answers(predictions, references, lexicon);
      row.top1_emji = top1_emji;
      row.top1_rouge_l = top1_rouge;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_sweep_csv: cannot open " + path);
  out << "x,n,emji,bleu2,rouge1,rouge2,rouge_l,top1_emji,top1_rouge_l\n";
  char line[256];
  for (const SweepRow& r : rows) {
    std::snprintf(line, sizeof line, "%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.x, r.n,
                  r.metrics.emji, r.metrics.bleu2, r.metrics.rouge1, r.metrics.rouge2,
                  r.metrics.rouge_l, r.top1_emji, r.top1_rouge_l);
    out << line;
  }
  if (!out) throw std::runtime_error("write_sweep_csv: write failed for " + path);
}

}  // namespace pcc
