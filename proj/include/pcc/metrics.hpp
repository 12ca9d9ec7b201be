#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace pcc {

// Lowercases and splits on every non-alphanumeric character.
std::vector<std::string> tokenize_metric(const std::string& text);

// Canonical keyword phrases with optional surface aliases. Matching is
// case-insensitive and longest-match-first over metric tokens; matched
// positions are consumed so nested phrases do not double-report.
class KeywordLexicon {
public:
  void add(const std::string& canonical, const std::vector<std::string>& aliases = {});
  std::set<std::string> extract(const std::string& text) const;

  bool empty() const { return phrases_.empty(); }
  std::size_t size() const { return phrases_.size(); }
  const std::map<std::string, std::vector<std::string>>& entries() const { return phrases_; }

  static KeywordLexicon load(const std::string& path);
  void save(const std::string& path) const;

private:
  std::map<std::string, std::vector<std::string>> phrases_;  // canonical -> aliases
};

// Jaccard overlap; both-empty scores 1 by convention.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// Mean per-instance Jaccard between extracted keyword sets.
double emji(const std::vector<std::set<std::string>>& pred_sets,
            const std::vector<std::set<std::string>>& label_sets);

struct BleuResult {
  double score = 0.0;
  bool empty_prediction = false;
};

// Geometric mean of clipped modified n-gram precisions times the brevity
// penalty. Empty prediction scores 0 with the flag set instead of throwing.
BleuResult bleu(const std::string& pred, const std::string& ref, int max_n = 2);

double rouge_n(const std::string& pred, const std::string& ref, int n);  // F1
double rouge_l(const std::string& pred, const std::string& ref);         // LCS F1

}  // namespace pcc
