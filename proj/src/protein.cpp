#include "pcc/protein.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "pcc/io_util.hpp"

namespace pcc {

std::span<const float> Codebook::code(int j) const {
  if (j < 0 || j >= kNumStructCodes)
    throw std::out_of_range("codebook: code index " + std::to_string(j) + " out of range");
  return std::span<const float>(codes).subspan(static_cast<std::size_t>(j) * dim,
                                               static_cast<std::size_t>(dim));
}

void Codebook::validate() const {
  if (dim <= 0) throw std::runtime_error("codebook: non-positive dimension");
  if (codes.size() != static_cast<std::size_t>(kNumStructCodes) * dim)
    throw std::runtime_error("codebook: expected " + std::to_string(kNumStructCodes) +
                             " rows of dim " + std::to_string(dim) + ", got " +
                             std::to_string(codes.size()) + " values");
  for (float v : codes)
    if (!std::isfinite(v)) throw std::runtime_error("codebook: non-finite entry");
}

void Codebook::save(const std::string& path) const {
  validate();
  nlohmann::json rows = nlohmann::json::array();
  for (int j = 0; j < kNumStructCodes; ++j) {
    nlohmann::json row = nlohmann::json::array();
    for (float v : code(j)) row.push_back(v);
    rows.push_back(std::move(row));
  }
  nlohmann::json doc = {{"dim", dim}, {"codes", rows}};
  write_text_file(path, doc.dump() + "\n");
}

Codebook Codebook::load(const std::string& path) {
  nlohmann::json doc = nlohmann::json::parse(read_text_file(path));
  Codebook cb;
  cb.dim = doc.at("dim").get<int>();
  const auto& rows = doc.at("codes");
  if (rows.size() != kNumStructCodes)
    throw std::runtime_error("codebook file: expected " + std::to_string(kNumStructCodes) +
                             " codes, got " + std::to_string(rows.size()));
  cb.codes.reserve(static_cast<std::size_t>(kNumStructCodes) * cb.dim);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != cb.dim)
      throw std::runtime_error("codebook file: row length " + std::to_string(row.size()) +
                               " does not match dim " + std::to_string(cb.dim));
    for (const auto& v : row) cb.codes.push_back(v.get<float>());
  }
  cb.validate();
  return cb;
}

std::vector<int> quantize_structure(std::span<const float> features, int n_rows,
                                    const Codebook& codebook) {
  codebook.validate();
  if (n_rows < 0 || features.size() != static_cast<std::size_t>(n_rows) * codebook.dim)
    throw std::invalid_argument("quantize_structure: feature array of " +
                                std::to_string(features.size()) + " values is not " +
                                std::to_string(n_rows) + " rows of dim " +
                                std::to_string(codebook.dim));
  std::vector<int> out(static_cast<std::size_t>(n_rows));
  const int d = codebook.dim;
  for (int r = 0; r < n_rows; ++r) {
    const float* f = features.data() + static_cast<std::size_t>(r) * d;
    float best = std::numeric_limits<float>::infinity();
    int best_j = 0;
    for (int j = 0; j < kNumStructCodes; ++j) {
      const float* c = codebook.codes.data() + static_cast<std::size_t>(j) * d;
      float dist = 0.0f;
      for (int k = 0; k < d; ++k) {
        const float diff = f[k] - c[k];
        dist += diff * diff;
      }
      if (dist < best) {  // strict: ties keep the lowest index
        best = dist;
        best_j = j;
      }
    }
    out[static_cast<std::size_t>(r)] = best_j;
  }
  return out;
}

EncodedProtein encode_protein(const ProteinRecord& record, const Codebook& codebook,
                              const Vocabulary& vocab) {
  const std::size_t n_res = record.sequence.size();
  if (n_res == 0) throw std::invalid_argument("encode_protein: empty protein");

  EncodedProtein out;
  out.t_s.reserve(n_res);
  for (std::size_t r = 0; r < n_res; ++r) {
    try {
      out.t_s.push_back(vocab.aa_id(record.sequence[r]));
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("encode_protein: unknown amino-acid letter '" +
                                  std::string(1, record.sequence[r]) + "' at residue " +
                                  std::to_string(r));
    }
  }

  std::vector<int> codes;
  if (!record.structure_codes.empty()) {
    codes = record.structure_codes;
  } else {
    codes = quantize_structure(record.structure_features, static_cast<int>(n_res), codebook);
  }
  if (codes.size() != n_res)
    throw std::invalid_argument("encode_protein: sequence length " + std::to_string(n_res) +
                                " != structure length " + std::to_string(codes.size()));
  out.t_x.reserve(n_res);
  for (int code : codes) out.t_x.push_back(vocab.str_id(code));
  return out;
}

std::vector<int> PromptPlan::token_ids() const {
  std::vector<int> ids;
  ids.reserve(items.size());
  for (const auto& item : items) {
    if (item.kind != PromptItemKind::Token)
      throw std::logic_error("token_ids: plan contains non-token positions");
    ids.push_back(item.token_id);
  }
  return ids;
}

PromptPlan assemble_prompt(const std::vector<int>& question_ids, const std::vector<int>& t_s,
                           const std::vector<int>& t_x, PromptLayout layout,
                           const std::vector<int>& answer_ids, int max_context) {
  if (question_ids.empty()) throw std::invalid_argument("assemble_prompt: empty question");
  if (t_s.empty()) throw std::invalid_argument("assemble_prompt: empty protein");
  if (t_s.size() != t_x.size())
    throw std::invalid_argument("assemble_prompt: |t_s| " + std::to_string(t_s.size()) +
                                " != |t_x| " + std::to_string(t_x.size()));

  PromptPlan plan;
  auto push_token = [&plan](int id) { plan.items.push_back(PromptItem::token(id)); };

  plan.text_before = {0, static_cast<int>(question_ids.size())};
  for (int id : question_ids) push_token(id);

  const int protein_begin = plan.size();
  if (layout == PromptLayout::Separate) {
    push_token(kProtSeqOpenId);
    for (int id : t_s) push_token(id);
    push_token(kProtSeqCloseId);
    push_token(kProtStructOpenId);
    for (int id : t_x) push_token(id);
    push_token(kProtStructCloseId);
  } else {
    push_token(kProtSeqOpenId);
    for (std::size_t r = 0; r < t_s.size(); ++r)
      plan.items.push_back(PromptItem::fused(t_s[r], t_x[r]));
    push_token(kProtSeqCloseId);
  }
  plan.protein = {protein_begin, plan.size()};

  const int after_begin = plan.size();
  for (int id : question_ids) push_token(id);
  plan.text_after = {after_begin, plan.size()};

  const int answer_begin = plan.size();
  for (int id : answer_ids) push_token(id);
  plan.answer = {answer_begin, plan.size()};

  if (plan.size() > max_context)
    throw std::length_error("assemble_prompt: context overflow, prompt length " +
                            std::to_string(plan.size()) + " > max_context " +
                            std::to_string(max_context));
  return plan;
}

void prepend_demo_rows(PromptPlan& plan, int n_rows) {
  if (n_rows < 0) throw std::invalid_argument("prepend_demo_rows: negative count");
  if (plan.demos.size() != 0)
    throw std::logic_error("prepend_demo_rows: plan already has demonstration rows");
  std::vector<PromptItem> items;
  items.reserve(plan.items.size() + static_cast<std::size_t>(n_rows));
  for (int r = 0; r < n_rows; ++r) items.push_back(PromptItem::demo(r));
  items.insert(items.end(), plan.items.begin(), plan.items.end());
  plan.items = std::move(items);
  auto shift = [n_rows](TokenRange& range) {
    range.begin += n_rows;
    range.end += n_rows;
  };
  plan.demos = {0, n_rows};
  shift(plan.text_before);
  shift(plan.protein);
  shift(plan.text_after);
  shift(plan.answer);
}

}  // namespace pcc
