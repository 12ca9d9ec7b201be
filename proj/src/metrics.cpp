#include "pcc/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "pcc/io_util.hpp"

namespace pcc {

std::vector<std::string> tokenize_metric(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

void KeywordLexicon::add(const std::string& canonical, const std::vector<std::string>& aliases) {
  auto [it, inserted] = phrases_.emplace(canonical, aliases);
  if (!inserted)
    throw std::invalid_argument("lexicon: duplicate canonical keyword '" + canonical + "'");
}

std::set<std::string> KeywordLexicon::extract(const std::string& text) const {
  if (phrases_.empty()) throw std::logic_error("lexicon: extract on empty lexicon");
  // Tokenized surface form -> canonical.
  std::vector<std::pair<std::vector<std::string>, std::string>> surfaces;
  for (const auto& [canonical, aliases] : phrases_) {
    surfaces.emplace_back(tokenize_metric(canonical), canonical);
    for (const std::string& alias : aliases)
      surfaces.emplace_back(tokenize_metric(alias), canonical);
  }
  // Longest surface first; ties resolved by canonical order for determinism.
  std::stable_sort(surfaces.begin(), surfaces.end(), [](const auto& a, const auto& b) {
    return a.first.size() > b.first.size();
  });

  const std::vector<std::string> words = tokenize_metric(text);
  std::vector<bool> consumed(words.size(), false);
  std::set<std::string> found;
  for (std::size_t pos = 0; pos < words.size(); ++pos) {
    if (consumed[pos]) continue;
    for (const auto& [surface, canonical] : surfaces) {
      if (surface.empty() || pos + surface.size() > words.size()) continue;
      bool match = true;
      for (std::size_t i = 0; i < surface.size(); ++i) {
        if (consumed[pos + i] || words[pos + i] != surface[i]) {
          match = false;
          break;
        }
      }
      if (match) {
        found.insert(canonical);
        for (std::size_t i = 0; i < surface.size(); ++i) consumed[pos + i] = true;
        break;
      }
    }
  }
  return found;
}

void KeywordLexicon::save(const std::string& path) const {
  nlohmann::json keywords = nlohmann::json::object();
  for (const auto& [canonical, aliases] : phrases_) keywords[canonical] = aliases;
  write_text_file(path, nlohmann::json{{"keywords", keywords}}.dump(2) + "\n");
}

KeywordLexicon KeywordLexicon::load(const std::string& path) {
  nlohmann::json doc = nlohmann::json::parse(read_text_file(path));
  KeywordLexicon lex;
  for (auto it = doc.at("keywords").begin(); it != doc.at("keywords").end(); ++it)
    lex.add(it.key(), it.value().get<std::vector<std::string>>());
  return lex;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& item : a) inter += b.count(item);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double emji(const std::vector<std::set<std::string>>& pred_sets,
            const std::vector<std::set<std::string>>& label_sets) {
  if (pred_sets.size() != label_sets.size())
    throw std::invalid_argument("emji: " + std::to_string(pred_sets.size()) +
                                " predictions vs " + std::to_string(label_sets.size()) +
                                " labels");
  if (pred_sets.empty()) throw std::invalid_argument("emji: no instances");
  double total = 0.0;
  for (std::size_t i = 0; i < pred_sets.size(); ++i) total += jaccard(pred_sets[i], label_sets[i]);
  return total / static_cast<double>(pred_sets.size());
}

static std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& words,
                                                            int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(words.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i)
    ++counts[std::vector<std::string>(words.begin() + i, words.begin() + i + n)];
  return counts;
}

BleuResult bleu(const std::string& pred, const std::string& ref, int max_n) {
  if (max_n < 1) throw std::invalid_argument("bleu: max_n must be >= 1");
  const std::vector<std::string> p = tokenize_metric(pred);
  const std::vector<std::string> r = tokenize_metric(ref);
  if (p.empty()) return {0.0, true};

  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto pc = ngram_counts(p, n);
    const auto rc = ngram_counts(r, n);
    long long total = 0, clipped = 0;
    for (const auto& [gram, count] : pc) {
      total += count;
      auto it = rc.find(gram);
      if (it != rc.end()) clipped += std::min(count, it->second);
    }
    if (total == 0 || clipped == 0) return {0.0, false};
    log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
  }
  const double geo = std::exp(log_sum / max_n);
  const double c = static_cast<double>(p.size()), rlen = static_cast<double>(r.size());
  const double bp = c >= rlen ? 1.0 : std::exp(1.0 - rlen / c);
  return {geo * bp, false};
}

double rouge_n(const std::string& pred, const std::string& ref, int n) {
  if (n < 1) throw std::invalid_argument("rouge_n: n must be >= 1");
  const std::vector<std::string> p = tokenize_metric(pred);
  const std::vector<std::string> r = tokenize_metric(ref);
  if (p.empty() && r.empty()) return 1.0;
  const auto pc = ngram_counts(p, n);
  const auto rc = ngram_counts(r, n);
  long long p_total = 0, r_total = 0, overlap = 0;
  for (const auto& [gram, count] : pc) p_total += count;
  for (const auto& [gram, count] : rc) r_total += count;
  for (const auto& [gram, count] : pc) {
    auto it = rc.find(gram);
    if (it != rc.end()) overlap += std::min(count, it->second);
  }
  if (p_total == 0 || r_total == 0 || overlap == 0) return 0.0;
  const double prec = static_cast<double>(overlap) / p_total;
  const double rec = static_cast<double>(overlap) / r_total;
  return 2.0 * prec * rec / (prec + rec);
}

double rouge_l(const std::string& pred, const std::string& ref) {
  const std::vector<std::string> p = tokenize_metric(pred);
  const std::vector<std::string> r = tokenize_metric(ref);
  if (p.empty() && r.empty()) return 1.0;
  if (p.empty() || r.empty()) return 0.0;
  std::vector<std::vector<int>> lcs(p.size() + 1, std::vector<int>(r.size() + 1, 0));
  for (std::size_t i = 1; i <= p.size(); ++i)
    for (std::size_t j = 1; j <= r.size(); ++j)
      lcs[i][j] = p[i - 1] == r[j - 1] ? lcs[i - 1][j - 1] + 1
                                       : std::max(lcs[i - 1][j], lcs[i][j - 1]);
  const int l = lcs[p.size()][r.size()];
  if (l == 0) return 0.0;
  const double prec = static_cast<double>(l) / p.size();
  const double rec = static_cast<double>(l) / r.size();
  return 2.0 * prec * rec / (prec + rec);
}

}  // namespace pcc
