#include "pcc/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace pcc {

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine_similarity: lengths " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  if (a.empty()) throw std::invalid_argument("cosine_similarity: empty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("cosine_similarity: zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<float> query_embedding(const QARecord& record, const Model& model,
                                   const Codebook& codebook, const Vocabulary& vocab) {
  const std::vector<int> question = vocab.encode_text(record.question);
  if (question.empty()) throw std::invalid_argument("query_embedding: empty question");
  const EncodedProtein enc = encode_protein(to_protein_record(record), codebook, vocab);

  PromptPlan plan;
  for (int id : question) plan.items.push_back(PromptItem::token(id));
  plan.text_before = {0, plan.size()};
  const int protein_begin = plan.size();
  plan.items.push_back(PromptItem::token(kProtSeqOpenId));
  for (std::size_t r = 0; r < enc.t_s.size(); ++r)
    plan.items.push_back(PromptItem::fused(enc.t_s[r], enc.t_x[r]));
  plan.items.push_back(PromptItem::token(kProtSeqCloseId));
  plan.protein = {protein_begin, plan.size()};
  plan.text_after = {plan.size(), plan.size()};
  plan.answer = {plan.size(), plan.size()};

  const Tensor embs = model.assemble_embeddings(plan, nullptr);
  const auto fwd = model.forward_embeddings(embs, false);
  return mean_rows(fwd.hidden);
}

std::vector<std::string> retrieve_top_k(std::span<const float> query, const DemoBank& bank,
                                        int k, const std::set<std::string>& exclude_ids) {
  std::vector<std::pair<double, const CompressedDemo*>> scored;
  for (const auto& demo : bank.demos) {
    if (exclude_ids.count(demo.id)) continue;
    scored.emplace_back(cosine_similarity(query, demo.key), &demo);
  }
  if (k < 0 || k > static_cast<int>(scored.size()))
    throw std::invalid_argument("retrieve_top_k: k = " + std::to_string(k) + " but only " +
                                std::to_string(scored.size()) + " eligible demos");
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->id < b.second->id;
  });
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out.push_back(scored[static_cast<std::size_t>(i)].second->id);
  return out;
}

// ---- BM25 ---------------------------------------------------------------

static std::vector<std::string> doc_terms(const QARecord& record) {
  std::vector<std::string> terms = tokenize_metric(record.question);
  for (const std::string& w : tokenize_metric(record.answer)) terms.push_back(w);
  for (char aa : record.sequence)
    terms.push_back(std::string(1, static_cast<char>(std::tolower(static_cast<unsigned char>(aa)))));
  return terms;
}

Bm25Index Bm25Index::build(const std::vector<QARecord>& records, double k1, double b) {
  if (records.empty()) throw std::invalid_argument("bm25: empty document set");
  Bm25Index index;
  index.k1_ = k1;
  index.b_ = b;
  std::map<std::string, int> doc_freq;
  long long total_len = 0;
  for (const auto& record : records) {
    const std::vector<std::string> terms = doc_terms(record);
    std::map<std::string, int> freqs;
    for (const std::string& term : terms) ++freqs[term];
    for (const auto& [term, count] : freqs) {
      (void)count;
      ++doc_freq[term];
    }
    total_len += static_cast<long long>(terms.size());
    index.id_to_index_[record.id] = index.doc_ids_.size();
    index.doc_ids_.push_back(record.id);
    index.doc_lens_.push_back(static_cast<int>(terms.size()));
    index.term_freqs_.push_back(std::move(freqs));
  }
  index.avg_doc_len_ = static_cast<double>(total_len) / static_cast<double>(records.size());
  const double n = static_cast<double>(records.size());
  // Lucene-style non-negative idf: ln(1 + (N - df + 0.5) / (df + 0.5)).
  for (const auto& [term, df] : doc_freq)
    index.idf_[term] = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  return index;
}

double Bm25Index::score(const std::string& doc_id,
                        const std::vector<std::string>& query_terms) const {
  auto it = id_to_index_.find(doc_id);
  if (it == id_to_index_.end())
    throw std::invalid_argument("bm25: unknown document '" + doc_id + "'");
  const std::size_t doc = it->second;
  const double dl = static_cast<double>(doc_lens_[doc]);
  double total = 0.0;
  for (const std::string& term : query_terms) {
    auto tf_it = term_freqs_[doc].find(term);
    if (tf_it == term_freqs_[doc].end()) continue;
    auto idf_it = idf_.find(term);
    if (idf_it == idf_.end()) continue;
    const double tf = static_cast<double>(tf_it->second);
    const double denom = tf + k1_ * (1.0 - b_ + b_ * dl / avg_doc_len_);
    total += idf_it->second * tf * (k1_ + 1.0) / denom;
  }
  return total;
}

std::vector<std::string> Bm25Index::rank(const std::string& question,
                                         const std::string& sequence, int k) const {
  std::vector<std::string> query_terms = tokenize_metric(question);
  for (char aa : sequence)
    query_terms.push_back(
        std::string(1, static_cast<char>(std::tolower(static_cast<unsigned char>(aa)))));
  if (query_terms.empty()) throw std::invalid_argument("bm25: empty query after tokenization");
  if (k < 0 || k > static_cast<int>(doc_ids_.size()))
    throw std::invalid_argument("bm25: k = " + std::to_string(k) + " but only " +
                                std::to_string(doc_ids_.size()) + " documents");
  std::vector<std::pair<double, const std::string*>> scored;
  scored.reserve(doc_ids_.size());
  for (const std::string& id : doc_ids_) scored.emplace_back(score(id, query_terms), &id);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return *a.second < *b.second;
  });
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out.push_back(*scored[static_cast<std::size_t>(i)].second);
  return out;
}

std::vector<std::string> random_select(const DemoBank& bank, int k, std::uint64_t seed) {
  const int n = static_cast<int>(bank.demos.size());
  if (k < 0 || k > n)
    throw std::invalid_argument("random_select: k = " + std::to_string(k) + " but bank holds " +
                                std::to_string(n) + " demos");
  std::vector<int> indices(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) indices[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(k));
  // Partial Fisher-Yates: position i draws from the not-yet-chosen suffix.
  for (int i = 0; i < k; ++i) {
    const std::uint64_t j = i + rng.next_below(static_cast<std::uint64_t>(n - i));
    std::swap(indices[static_cast<std::size_t>(i)], indices[j]);
    out.push_back(bank.demos[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])].id);
  }
  return out;
}

std::vector<std::string> prompt_order(std::vector<std::string> ranked_desc) {
  std::reverse(ranked_desc.begin(), ranked_desc.end());
  return ranked_desc;
}

}  // namespace pcc
