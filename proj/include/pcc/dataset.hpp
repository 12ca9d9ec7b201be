#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcc/metrics.hpp"
#include "pcc/protein.hpp"

namespace pcc {

// Planted-mapping synthetic task: the codebook is split into one region of
// codes per class, a record's structure tokens fall inside its class region,
// and the answer states exactly that class's two keyword phrases. Structure
// therefore determines the answer, so training signal and ICL gains are
// verifiable.
struct SyntheticTaskSpec {
  int n_classes = 8;
  int codes_per_class = 64;
  int len_min = 20;
  int len_max = 60;
  int n_train = 2000;
  int n_val = 200;
  int n_test = 200;
  int d_c = 16;
  double feature_noise = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct QARecord {
  std::string id;
  std::string question;
  std::string sequence;
  std::vector<int> structure_tokens;  // codebook indices in [0, 512)
  std::string answer;
  int klass = -1;
  std::vector<std::string> keywords;
};

ProteinRecord to_protein_record(const QARecord& record);

struct Dataset {
  SyntheticTaskSpec spec;
  Codebook codebook;
  KeywordLexicon lexicon;
  std::vector<std::string> question_templates;
  std::vector<std::string> ood_question_templates;
  std::vector<std::vector<std::string>> class_keywords;  // [class][2]
  std::vector<QARecord> train, val, test, test_ood;      // test_ood: unseen phrasings
};

Dataset generate_dataset(const SyntheticTaskSpec& spec);

// Directory layout: train/val/test/test_ood.jsonl, codebook.json,
// lexicon.json, task.json (+ vocab.json written separately).
void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

std::vector<QARecord> load_jsonl(const std::string& path);
void save_jsonl(const std::vector<QARecord>& records, const std::string& path);

const std::vector<QARecord>& split_by_name(const Dataset& dataset, const std::string& name);

// Corpus for vocabulary construction: train questions and answers plus the
// out-of-domain templates (so their words get ids, though never trained on).
std::vector<std::string> vocab_corpus(const Dataset& dataset);

}  // namespace pcc
