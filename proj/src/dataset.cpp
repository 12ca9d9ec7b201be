#include "pcc/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "pcc/io_util.hpp"
#include "pcc/rng.hpp"

namespace pcc {

namespace {

const std::vector<std::string> kAdjectives = {"metal",   "ion",      "ligand", "lipid",
                                              "sugar",   "peptide",  "proton", "electron",
                                              "calcium", "zinc",     "copper", "heme"};
const std::vector<std::string> kNouns = {"binding",   "transport", "hydrolysis", "folding",
                                         "signaling", "catalysis", "repair",     "assembly",
                                         "cleavage",  "oxidation"};

const std::vector<std::string> kQuestionTemplates = {
    "What is the function of this protein ?",
    "Describe the function of this protein .",
    "What does this protein do ?",
    "State the functional role of this protein .",
};

const std::vector<std::string> kOodQuestionTemplates = {
    "Can you explain what this protein does ?",
    "Tell me the biological role of this protein .",
};

std::string make_answer(const std::string& kw1, const std::string& kw2) {
  // Punctuation is space-separated so the word-level vocabulary round-trips.
  return "The protein performs " + kw1 + " , " + kw2 + " activity .";
}

std::string record_id(const std::string& split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%05d", split.c_str(), index);
  return buf;
}

}  // namespace

void SyntheticTaskSpec::validate() const {
  if (n_classes < 1) throw std::invalid_argument("task spec: n_classes must be >= 1");
  if (codes_per_class < 1) throw std::invalid_argument("task spec: codes_per_class must be >= 1");
  if (n_classes * codes_per_class > kNumStructCodes)
    throw std::invalid_argument("task spec: " + std::to_string(n_classes) + " classes x " +
                                std::to_string(codes_per_class) + " codes exceed the " +
                                std::to_string(kNumStructCodes) + "-code codebook");
  if (2 * n_classes > static_cast<int>(kAdjectives.size() * kNouns.size()))
    throw std::invalid_argument("task spec: not enough keyword phrases for the class count");
  if (len_min < 1 || len_max < len_min)
    throw std::invalid_argument("task spec: bad sequence length range");
  if (n_train < 0 || n_val < 0 || n_test < 0)
    throw std::invalid_argument("task spec: negative split size");
  if (d_c < 1) throw std::invalid_argument("task spec: d_c must be >= 1");
  if (feature_noise < 0) throw std::invalid_argument("task spec: negative feature noise");
}

static Codebook make_codebook(const SyntheticTaskSpec& spec) {
  Rng rng(Rng::derive(spec.seed, "codebook"));
  Codebook cb;
  cb.dim = spec.d_c;
  cb.codes.resize(static_cast<std::size_t>(kNumStructCodes) * spec.d_c);
  for (int j = 0; j < kNumStructCodes; ++j) {
    const int klass = j / spec.codes_per_class;
    float* row = cb.codes.data() + static_cast<std::size_t>(j) * spec.d_c;
    for (int k = 0; k < spec.d_c; ++k) row[k] = static_cast<float>(rng.next_normal(0.0, 0.5));
    // Classes get well-separated axis centers; codes past the last class
    // region stay near the origin and are never targeted by records.
    if (klass < spec.n_classes) row[klass % spec.d_c] += 4.0f;
  }
  return cb;
}

static std::vector<QARecord> make_split(const Dataset& dataset, const std::string& split,
                                        int count, bool ood) {
  const SyntheticTaskSpec& spec = dataset.spec;
  const std::vector<std::string>& templates =
      ood ? dataset.ood_question_templates : dataset.question_templates;
  std::vector<QARecord> records;
  records.reserve(static_cast<std::size_t>(count));
  std::vector<float> features;
  for (int i = 0; i < count; ++i) {
    Rng rng(Rng::derive(spec.seed, split + "-" + std::to_string(i)));
    QARecord rec;
    rec.id = record_id(split, i);
    rec.klass = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.n_classes)));
    const int len =
        spec.len_min +
        static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.len_max - spec.len_min + 1)));
    rec.sequence.reserve(static_cast<std::size_t>(len));
    for (int r = 0; r < len; ++r)
      rec.sequence += kAminoAcidLetters[rng.next_below(kAminoAcidLetters.size())];

    features.assign(static_cast<std::size_t>(len) * spec.d_c, 0.0f);
    for (int r = 0; r < len; ++r) {
      const int code = rec.klass * spec.codes_per_class +
                       static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.codes_per_class)));
      auto center = dataset.codebook.code(code);
      float* row = features.data() + static_cast<std::size_t>(r) * spec.d_c;
      for (int k = 0; k < spec.d_c; ++k)
        row[k] = center[static_cast<std::size_t>(k)] +
                 static_cast<float>(rng.next_normal(0.0, spec.feature_noise));
    }
    rec.structure_tokens = quantize_structure(features, len, dataset.codebook);

    rec.question = templates[rng.next_below(templates.size())];
    const auto& kws = dataset.class_keywords[static_cast<std::size_t>(rec.klass)];
    rec.answer = make_answer(kws[0], kws[1]);
    rec.keywords = kws;
    records.push_back(std::move(rec));
  }
  return records;
}

Dataset generate_dataset(const SyntheticTaskSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;
  ds.codebook = make_codebook(spec);
  ds.question_templates = kQuestionTemplates;
  ds.ood_question_templates = kOodQuestionTemplates;

  // Two unique keyword phrases per class, drawn from the shuffled phrase pool.
  std::vector<std::string> pool;
  for (const auto& adj : kAdjectives)
    for (const auto& noun : kNouns) pool.push_back(adj + " " + noun);
  Rng kw_rng(Rng::derive(spec.seed, "keywords"));
  for (std::size_t i = pool.size(); i > 1; --i)
    std::swap(pool[i - 1], pool[kw_rng.next_below(i)]);
  for (int c = 0; c < spec.n_classes; ++c) {
    std::vector<std::string> kws = {pool[static_cast<std::size_t>(2 * c)],
                                    pool[static_cast<std::size_t>(2 * c + 1)]};
    ds.lexicon.add(kws[0]);
    ds.lexicon.add(kws[1]);
    ds.class_keywords.push_back(std::move(kws));
  }

  ds.train = make_split(ds, "train", spec.n_train, false);
  ds.val = make_split(ds, "val", spec.n_val, false);
  ds.test = make_split(ds, "test", spec.n_test, false);
  ds.test_ood = make_split(ds, "ood", spec.n_test, true);
  return ds;
}

ProteinRecord to_protein_record(const QARecord& record) {
  ProteinRecord p;
  p.id = record.id;
  p.sequence = record.sequence;
  p.structure_codes = record.structure_tokens;
  return p;
}

// ---- on-disk format -----------------------------------------------------

void save_jsonl(const std::vector<QARecord>& records, const std::string& path) {
  std::string out;
  for (const auto& rec : records) {
    nlohmann::json line = {
        {"id", rec.id},           {"question", rec.question},
        {"sequence", rec.sequence}, {"structure_tokens", rec.structure_tokens},
        {"answer", rec.answer},   {"class", rec.klass},
        {"keywords", rec.keywords},
    };
    out += line.dump();
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<QARecord> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<QARecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      nlohmann::json doc = nlohmann::json::parse(line);
      QARecord rec;
      rec.id = doc.at("id").get<std::string>();
      rec.question = doc.at("question").get<std::string>();
      rec.sequence = doc.at("sequence").get<std::string>();
      rec.structure_tokens = doc.at("structure_tokens").get<std::vector<int>>();
      rec.answer = doc.at("answer").get<std::string>();
      rec.klass = doc.at("class").get<int>();
      rec.keywords = doc.at("keywords").get<std::vector<std::string>>();
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  save_jsonl(dataset.train, (base / "train.jsonl").string());
  save_jsonl(dataset.val, (base / "val.jsonl").string());
  save_jsonl(dataset.test, (base / "test.jsonl").string());
  save_jsonl(dataset.test_ood, (base / "test_ood.jsonl").string());
  dataset.codebook.save((base / "codebook.json").string());
  dataset.lexicon.save((base / "lexicon.json").string());

  nlohmann::json task = {
      {"n_classes", dataset.spec.n_classes},
      {"codes_per_class", dataset.spec.codes_per_class},
      {"len_min", dataset.spec.len_min},
      {"len_max", dataset.spec.len_max},
      {"n_train", dataset.spec.n_train},
      {"n_val", dataset.spec.n_val},
      {"n_test", dataset.spec.n_test},
      {"d_c", dataset.spec.d_c},
      {"feature_noise", dataset.spec.feature_noise},
      {"seed", dataset.spec.seed},
      {"question_templates", dataset.question_templates},
      {"ood_question_templates", dataset.ood_question_templates},
      {"class_keywords", dataset.class_keywords},
  };
  write_text_file((base / "task.json").string(), task.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir) {
  const std::filesystem::path base(dir);
  nlohmann::json task = nlohmann::json::parse(read_text_file((base / "task.json").string()));
  Dataset ds;
  ds.spec.n_classes = task.at("n_classes").get<int>();
  ds.spec.codes_per_class = task.at("codes_per_class").get<int>();
  ds.spec.len_min = task.at("len_min").get<int>();
  ds.spec.len_max = task.at("len_max").get<int>();
  ds.spec.n_train = task.at("n_train").get<int>();
  ds.spec.n_val = task.at("n_val").get<int>();
  ds.spec.n_test = task.at("n_test").get<int>();
  ds.spec.d_c = task.at("d_c").get<int>();
  ds.spec.feature_noise = task.at("feature_noise").get<double>();
  ds.spec.seed = task.at("seed").get<std::uint64_t>();
  ds.question_templates = task.at("question_templates").get<std::vector<std::string>>();
  ds.ood_question_templates = task.at("ood_question_templates").get<std::vector<std::string>>();
  ds.class_keywords = task.at("class_keywords").get<std::vector<std::vector<std::string>>>();
  ds.codebook = Codebook::load((base / "codebook.json").string());
  ds.lexicon = KeywordLexicon::load((base / "lexicon.json").string());
  ds.train = load_jsonl((base / "train.jsonl").string());
  ds.val = load_jsonl((base / "val.jsonl").string());
  ds.test = load_jsonl((base / "test.jsonl").string());
  ds.test_ood = load_jsonl((base / "test_ood.jsonl").string());
  return ds;
}

const std::vector<QARecord>& split_by_name(const Dataset& dataset, const std::string& name) {
  if (name == "train") return dataset.train;
  if (name == "val") return dataset.val;
  if (name == "test") return dataset.test;
  if (name == "test_ood") return dataset.test_ood;
  throw std::invalid_argument("unknown split '" + name +
                              "' (expected train, val, test, or test_ood)");
}

std::vector<std::string> vocab_corpus(const Dataset& dataset) {
  std::vector<std::string> corpus;
  for (const auto& rec : dataset.train) {
    corpus.push_back(rec.question);
    corpus.push_back(rec.answer);
  }
  for (const auto& tpl : dataset.ood_question_templates) corpus.push_back(tpl);
  return corpus;
}

}  // namespace pcc
