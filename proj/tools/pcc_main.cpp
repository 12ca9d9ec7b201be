#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pcc/checkpoint.hpp"
#include "pcc/compress.hpp"
#include "pcc/dataset.hpp"
#include "pcc/infer.hpp"
#include "pcc/io_util.hpp"
#include "pcc/metrics.hpp"
#include "pcc/model.hpp"
#include "pcc/report.hpp"
#include "pcc/retrieval.hpp"
#include "pcc/rng.hpp"
#include "pcc/train.hpp"
#include "pcc/vocab.hpp"

namespace {

using nlohmann::json;

// Built-in defaults, overridden by the config file, overridden by flags.
struct AppConfig {
  std::uint64_t seed = 42;
  int threads = 1;
  std::string data_dir = "data";
  pcc::SyntheticTaskSpec task;
  pcc::ModelConfig model;  // vocab_size filled from the vocabulary at runtime
  pcc::Stage1Config stage1;
  pcc::Stage2Config stage2;
  int stage1_eval_limit = 200;
  int stage2_eval_n = 16;
  int stage2_eval_limit = 64;
  std::string strategy = "dense";
  int infer_n = 4;
  int max_new_tokens = 64;
  std::string infer_split = "test";
  int infer_limit = 0;
  std::vector<int> sweep_x = {4, 8, 16};
  std::vector<int> sweep_n = {0, 1, 2, 4};
  std::string sweep_split = "val";
  int sweep_limit = 32;
};

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

AppConfig load_app_config(const std::string& path) {
  AppConfig c;
  if (path.empty()) return c;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j = json::parse(in);

  get_if(j, "seed", c.seed);
  get_if(j, "threads", c.threads);
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    get_if(d, "dir", c.data_dir);
    get_if(d, "n_classes", c.task.n_classes);
    get_if(d, "codes_per_class", c.task.codes_per_class);
    get_if(d, "len_min", c.task.len_min);
    get_if(d, "len_max", c.task.len_max);
    get_if(d, "n_train", c.task.n_train);
    get_if(d, "n_val", c.task.n_val);
    get_if(d, "n_test", c.task.n_test);
    get_if(d, "d_c", c.task.d_c);
    get_if(d, "feature_noise", c.task.feature_noise);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    get_if(m, "hidden_dim", c.model.hidden_dim);
    get_if(m, "n_layers", c.model.n_layers);
    get_if(m, "n_heads", c.model.n_heads);
    get_if(m, "max_context", c.model.max_context);
    get_if(m, "mlp_ratio", c.model.mlp_ratio);
  }
  if (j.contains("stage1")) {
    const json& s = j.at("stage1");
    get_if(s, "lr", c.stage1.lr);
    get_if(s, "batch_size", c.stage1.batch_size);
    get_if(s, "epochs", c.stage1.epochs);
    get_if(s, "lora_rank", c.stage1.lora_rank);
    get_if(s, "lora_alpha", c.stage1.lora_alpha);
    get_if(s, "grad_clip", c.stage1.grad_clip);
    get_if(s, "eval_limit", c.stage1_eval_limit);
  }
  if (j.contains("stage2")) {
    const json& s = j.at("stage2");
    get_if(s, "lr", c.stage2.lr);
    get_if(s, "batch_size", c.stage2.batch_size);
    get_if(s, "epochs", c.stage2.epochs);
    get_if(s, "x", c.stage2.x);
    get_if(s, "n_range", c.stage2.n_range);
    get_if(s, "grad_clip", c.stage2.grad_clip);
    get_if(s, "max_skip_fraction", c.stage2.max_skip_fraction);
    get_if(s, "eval_n", c.stage2_eval_n);
    get_if(s, "eval_limit", c.stage2_eval_limit);
  }
  if (j.contains("infer")) {
    const json& i = j.at("infer");
    get_if(i, "strategy", c.strategy);
    get_if(i, "n", c.infer_n);
    get_if(i, "max_new_tokens", c.max_new_tokens);
    get_if(i, "split", c.infer_split);
    get_if(i, "limit", c.infer_limit);
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    get_if(s, "x_values", c.sweep_x);
    get_if(s, "n_values", c.sweep_n);
    get_if(s, "split", c.sweep_split);
    get_if(s, "limit", c.sweep_limit);
  }
  return c;
}

// Shared flag storage; only the chosen subcommand's bindings are filled.
struct Flags {
  std::string config, data, checkpoint, bank, out, in, strategy, split, id;
  std::uint64_t seed = 0;
  int threads = 0;
  int x = 0, n = 0, epochs = 0, batch = 0, min_count = 1;
  int limit = 0, max_new = 0, eval_n = 0, eval_limit = 0;
  double lr = 0.0, query_tokens = 0.0, demo_tokens = 0.0;
};

bool given(const CLI::App* sub, const std::string& flag) { return sub->count(flag) > 0; }

int resolve_threads(const CLI::App* sub, const Flags& f, const AppConfig& c) {
  int threads = c.threads;
  if (const char* env = std::getenv("PCC_THREADS"); env != nullptr && *env != '\0')
    threads = std::atoi(env);
  if (given(sub, "--threads")) threads = f.threads;
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  return threads;  // cap on workers; the pipeline currently runs one
}

struct Loaded {
  pcc::Dataset dataset;
  pcc::Vocabulary vocab;
};

Loaded load_data(const std::string& dir) {
  Loaded l;
  l.dataset = pcc::load_dataset(dir);
  l.vocab = pcc::Vocabulary::load(dir + "/vocab.json");
  return l;
}

std::vector<pcc::QARecord> clipped(const std::vector<pcc::QARecord>& records, int limit) {
  if (limit <= 0 || static_cast<std::size_t>(limit) >= records.size()) return records;
  return {records.begin(), records.begin() + limit};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

// ---- subcommand bodies --------------------------------------------------

void cmd_gen_data(const CLI::App* sub, const Flags& f) {
  AppConfig cfg = load_app_config(f.config);
  resolve_threads(sub, f, cfg);
  if (given(sub, "--seed")) cfg.seed = f.seed;
  const std::string dir = given(sub, "--out") ? f.out : cfg.data_dir;

  cfg.task.seed = cfg.seed;
  const pcc::Dataset dataset = pcc::generate_dataset(cfg.task);
  pcc::save_dataset(dataset, dir);
  const pcc::Vocabulary vocab = pcc::Vocabulary::build(pcc::vocab_corpus(dataset), 1);
  vocab.save(dir + "/vocab.json");

  std::cout << "wrote " << dir << ": train=" << dataset.train.size()
            << " val=" << dataset.val.size() << " test=" << dataset.test.size()
            << " test_ood=" << dataset.test_ood.size() << " vocab=" << vocab.size() << "\n";
}

void cmd_build_vocab(const CLI::App* sub, const Flags& f) {
  AppConfig cfg = load_app_config(f.config);
  const std::string dir = given(sub, "--data") ? f.data : cfg.data_dir;
  const std::string out = given(sub, "--out") ? f.out : dir + "/vocab.json";
  const pcc::Dataset dataset = pcc::load_dataset(dir);
  const pcc::Vocabulary vocab = pcc::Vocabulary::build(pcc::vocab_corpus(dataset), f.min_count);
  vocab.save(out);
  std::cout << "wrote " << out << ": " << vocab.size() << " tokens\n";
}

void cmd_train_stage1(const CLI::App* sub, const Flags& f) {
  AppConfig cfg = load_app_config(f.config);
  resolve_threads(sub, f, cfg);
  if (given(sub, "--seed")) cfg.seed = f.seed;
  if (given(sub, "--lr")) cfg.stage1.lr = f.lr;
  if (given(sub, "--epochs")) cfg.stage1.epochs = f.epochs;
  if (given(sub, "--batch-size")) cfg.stage1.batch_size = f.batch;
  if (given(sub, "--eval-limit")) cfg.stage1_eval_limit = f.eval_limit;
  const std::string dir = given(sub, "--data") ? f.data : cfg.data_dir;
  const std::string out = given(sub, "--out") ? f.out : "stage1.ckpt";
  cfg.stage1.seed = cfg.seed;

  const Loaded l = load_data(dir);
  cfg.model.vocab_size = l.vocab.size();
  pcc::Rng init_rng(pcc::Rng::derive(cfg.seed, "model-init"));
  pcc::Model model = pcc::Model::init(cfg.model, init_rng);

  const double pre = pcc::eval_answer_loss(model, l.dataset.val, l.dataset.codebook, l.vocab,
                                           cfg.stage1_eval_limit);
  const pcc::TrainResult result =
      pcc::train_stage1(model, l.dataset.train, l.dataset.codebook, l.vocab, cfg.stage1);
  const double post = pcc::eval_answer_loss(model, l.dataset.val, l.dataset.codebook, l.vocab,
                                            cfg.stage1_eval_limit);

  pcc::save_checkpoint(out, model, nullptr);
  pcc::write_loss_csv(result, out + ".loss.csv");
  std::cout << "stage1: steps=" << result.loss_curve.size() << " val_loss " << pre << " -> "
            << post << " (drop " << (pre > 0 ? 100.0 * (1.0 - post / pre) : 0.0) << "%)\n"
            << "wrote " << out << " and " << out << ".loss.csv\n";
}

void cmd_train_stage2(const CLI::App* sub, const Flags& f) {
  AppConfig cfg = load_app_config(f.config);
  resolve_threads(sub, f, cfg);
  if (given(sub, "--seed")) cfg.seed = f.seed;
  if (given(sub, "--lr")) cfg.stage2.lr = f.lr;
  if (given(sub, "--epochs")) cfg.stage2.epochs = f.epochs;
  if (given(sub, "--batch-size")) cfg.stage2.batch_size = f.batch;
  if (given(sub, "--x")) cfg.stage2.x = f.x;
  if (given(sub, "--eval-n")) cfg.stage2_eval_n = f.eval_n;
  if (given(sub, "--eval-limit")) cfg.stage2_eval_limit = f.eval_limit;
  const std::string dir = given(sub, "--data") ? f.data : cfg.data_dir;
  const std::string out = given(sub, "--out") ? f.out : "stage2.ckpt";
  cfg.stage2.seed = cfg.seed;

  const Loaded l = load_data(dir);
  pcc::LoadedCheckpoint ckpt = pcc::load_checkpoint(f.checkpoint);
  pcc::Rng proj_rng(pcc::Rng::derive(cfg.seed, "proj-init"));
  pcc::Projection proj =
      pcc::Projection::identity_with_noise(ckpt.model.config().hidden_dim, proj_rng);

  const pcc::Stage2Pool pool = pcc::prepare_stage2_pool(ckpt.model, l.dataset.train,
                                                        l.dataset.codebook, l.vocab,
                                                        cfg.stage2.x);
  const double pre =
      pcc::eval_stage2_loss(ckpt.model, proj, pool, l.dataset.val, l.dataset.codebook, l.vocab,
                            cfg.stage2_eval_n, cfg.stage2_eval_limit);
  const pcc::TrainResult result = pcc::train_stage2(ckpt.model, proj, l.dataset.train,
                                                    l.dataset.codebook, l.vocab, cfg.stage2,
                                                    &pool);
  const double post =
      pcc::eval_stage2_loss(ckpt.model, proj, pool, l.dataset.val, l.dataset.codebook, l.vocab,
                            cfg.stage2_eval_n, cfg.stage2_eval_limit);

  pcc::save_checkpoint(out, ckpt.model, &proj);
  pcc::write_loss_csv(result, out + ".loss.csv");
  std::cout << "stage2: steps=" << result.loss_curve.size() << " skipped=" << result.skipped
            << "/" << result.total << " val_loss(n=" << cfg.stage2_eval_n << ") " << pre
            << " -> " << post << " (drop " << (pre > 0 ? 100.0 * (1.0 - post / pre) : 0.0)
            << "%)\n"
            << "wrote " << out << " and " << out << ".loss.csv\n";
}

void cmd_build_bank(const CLI::App* sub, const Flags& f) {
  AppConfig cfg = load_app_config(f.config);
  if (given(sub, "--x")) cfg.stage2.x = f.x;
  const std::string dir = given(sub, "--data") ? f.data : cfg.data_dir;
  const std::string out = given(sub, "--out") ? f.out : "demos.bank";

  const Loaded l = load_data(dir);
  pcc::LoadedCheckpoint ckpt = pcc::load_checkpoint(f.checkpoint);
  if (!ckpt.projection.has_value())
    throw std::runtime_error("checkpoint " + f.checkpoint +
                             " has no projection; run train-stage2 first");

  pcc::BankBuildResult built =
      pcc::build_demo_bank(l.dataset.train, ckpt.model, *ckpt.projection, l.dataset.codebook,
                           l.vocab, cfg.stage2.x);
  built.bank.checkpoint_hash = pcc::hash_file(f.checkpoint);
  built.bank.dataset_hash = pcc::hash_file(dir + "/train.jsonl");
  built.bank.save(out);

  std::cout << "wrote " << out << ": " << built.bank.demos.size() << " demos (x="
            << built.bank.x << ", d_f=" << built.bank.d_f << "), skipped "
            << built.skipped.size() << "\n";
  for (const auto& [id, reason] : built.skipped)
    std::cout << "  skipped " << id << ": " << reason << "\n";
}

void cmd_retrieve(const CLI::App* sub, const Flags& f) {
  AppConfig cfg = load_app_config(f.config);
  if (given(sub, "--seed")) cfg.seed = f.seed;
  if (given(sub, "--strategy")) cfg.strategy = f.strategy;
  if (given(sub, "--n")) cfg.infer_n = f.n;
  const std::string dir = given(sub, "--data") ? f.data : cfg.data_dir;
  const std::string split = given(sub, "--split") ? f.split : cfg.infer_split;

  const Loaded l = load_data(dir);
  const pcc::DemoBank bank = pcc::DemoBank::load(f.bank);
  pcc::LoadedCheckpoint ckpt = pcc::load_checkpoint(f.checkpoint);

  const std::vector<pcc::QARecord>& records = pcc::split_by_name(l.dataset, split);
  const pcc::QARecord* query = nullptr;
  for (const pcc::QARecord& rec : records)
    if (rec.id == f.id) { query = &rec; break; }
  if (query == nullptr)
    throw std::runtime_error("id '" + f.id + "' not found in split '" + split + "'");

  pcc::Bm25Index bm25;
  if (cfg.strategy == "bm25") bm25 = pcc::Bm25Index::build(l.dataset.train);
  const pcc::DemoSelection sel = pcc::select_demos(
      *query, ckpt.model, bank, cfg.strategy == "bm25" ? &bm25 : nullptr, l.dataset.codebook,
      l.vocab, cfg.strategy, cfg.infer_n, pcc::Rng::derive(cfg.seed, query->id));

  for (std::size_t i = 0; i < sel.ids.size(); ++i) {
    std::cout << (i + 1) << " " << sel.ids[i];
    if (i < sel.scores.size()) std::cout << " " << sel.scores[i];
    std::cout << "\n";
  }
}

void cmd_infer(const CLI::App* sub, const Flags& f) {
  AppConfig cfg = load_app_config(f.config);
  resolve_threads(sub, f, cfg);
  if (given(sub, "--seed")) cfg.seed = f.seed;
  if (given(sub, "--strategy")) cfg.strategy = f.strategy;
  if (given(sub, "--n")) cfg.infer_n = f.n;
  if (given(sub, "--limit")) cfg.infer_limit = f.limit;
  if (given(sub, "--max-new-tokens")) cfg.max_new_tokens = f.max_new;
  const std::string dir = given(sub, "--data") ? f.data : cfg.data_dir;
  const std::string split = given(sub, "--split") ? f.split : cfg.infer_split;
  const std::string out = given(sub, "--out") ? f.out : "infer.jsonl";

  const Loaded l = load_data(dir);
  pcc::LoadedCheckpoint ckpt = pcc::load_checkpoint(f.checkpoint);

  pcc::DemoBank bank;
  const bool need_bank = cfg.infer_n > 0 || !f.bank.empty();
  if (need_bank) {
    if (f.bank.empty()) throw std::runtime_error("n > 0 requires --bank");
    bank = pcc::DemoBank::load(f.bank);
  }
  pcc::Bm25Index bm25;
  if (cfg.strategy == "bm25" && cfg.infer_n > 0) bm25 = pcc::Bm25Index::build(l.dataset.train);

  const std::vector<pcc::QARecord> queries =
      clipped(pcc::split_by_name(l.dataset, split), cfg.infer_limit);
  std::vector<pcc::InferTrace> traces;
  traces.reserve(queries.size());
  long generated = 0;
  for (const pcc::QARecord& query : queries) {
    traces.push_back(pcc::run_icl_inference(
        query, ckpt.model, need_bank ? &bank : nullptr,
        cfg.strategy == "bm25" && cfg.infer_n > 0 ? &bm25 : nullptr, l.dataset.codebook, l.vocab,
        cfg.strategy, cfg.infer_n, pcc::Rng::derive(cfg.seed, query.id), cfg.max_new_tokens));
    generated += traces.back().generated_tokens;
  }
  pcc::write_infer_jsonl(traces, out);
  std::cout << "wrote " << out << ": " << traces.size() << " queries, strategy="
            << cfg.strategy << " n=" << cfg.infer_n << ", mean generated tokens "
            << (traces.empty() ? 0.0 : static_cast<double>(generated) / traces.size()) << "\n";
}

void cmd_eval(const CLI::App* sub, const Flags& f) {
  AppConfig cfg = load_app_config(f.config);
  const std::string dir = given(sub, "--data") ? f.data : cfg.data_dir;
  const std::string split = given(sub, "--split") ? f.split : cfg.infer_split;

  const pcc::Dataset dataset = pcc::load_dataset(dir);
  const std::vector<pcc::QARecord>& records = pcc::split_by_name(dataset, split);
  std::map<std::string, const pcc::QARecord*> by_id;
  for (const pcc::QARecord& rec : records) by_id[rec.id] = &rec;

  std::ifstream in(f.in);
  if (!in) throw std::runtime_error("cannot open " + f.in);
  std::vector<std::string> predictions, references;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(f.in + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const std::string id = j.at("id").get<std::string>();
    const auto it = by_id.find(id);
    if (it == by_id.end())
      throw std::runtime_error("trace id '" + id + "' not found in split '" + split + "'");
    predictions.push_back(j.at("answer").get<std::string>());
    references.push_back(it->second->answer);
  }

  const pcc::EvalReport report = pcc::evaluate_answers(predictions, references, dataset.lexicon);
  const std::string text = pcc::eval_json(report);
  if (given(sub, "--out")) {
    write_text(f.out, text + "\n");
    std::cout << "wrote " << f.out << "\n";
  }
  std::cout << text << "\n";
}

void cmd_sweep(const CLI::App* sub, const Flags& f) {
  AppConfig cfg = load_app_config(f.config);
  resolve_threads(sub, f, cfg);
  if (given(sub, "--seed")) cfg.seed = f.seed;
  if (given(sub, "--strategy")) cfg.strategy = f.strategy;
  if (given(sub, "--limit")) cfg.sweep_limit = f.limit;
  const std::string dir = given(sub, "--data") ? f.data : cfg.data_dir;
  const std::string split = given(sub, "--split") ? f.split : cfg.sweep_split;
  const std::string out = given(sub, "--out") ? f.out : "sweep.csv";

  const Loaded l = load_data(dir);
  pcc::LoadedCheckpoint ckpt = pcc::load_checkpoint(f.checkpoint);
  if (!ckpt.projection.has_value())
    throw std::runtime_error("checkpoint " + f.checkpoint + " has no projection");

  pcc::SweepOptions options;
  options.x_values = cfg.sweep_x;
  options.n_values = cfg.sweep_n;
  options.strategy = cfg.strategy;
  options.seed = cfg.seed;
  options.limit = cfg.sweep_limit;
  options.max_new_tokens = cfg.max_new_tokens;

  const std::vector<pcc::SweepRow> rows =
      pcc::run_sweep(ckpt.model, *ckpt.projection, l.dataset.train,
                     pcc::split_by_name(l.dataset, split), l.dataset.codebook, l.vocab,
                     l.dataset.lexicon, options);
  pcc::write_sweep_csv(rows, out);
  std::cout << "wrote " << out << ": " << rows.size() << " rows over split '" << split << "'\n";
}

void cmd_budget(const CLI::App* sub, const Flags& f) {
  AppConfig cfg = load_app_config(f.config);
  if (given(sub, "--x")) cfg.stage2.x = f.x;
  const int n = given(sub, "--n") ? f.n : cfg.infer_n;

  std::vector<double> demo_tokens;
  if (given(sub, "--bank")) {
    const pcc::DemoBank bank = pcc::DemoBank::load(f.bank);
    for (const pcc::CompressedDemo& demo : bank.demos)
      demo_tokens.push_back(pcc::demo_token_count(demo));
  } else if (given(sub, "--demo-tokens")) {
    demo_tokens.push_back(f.demo_tokens);
  } else {
    throw std::runtime_error("budget needs --bank or --demo-tokens");
  }

  double query_tokens = f.query_tokens;
  if (!given(sub, "--query-tokens")) {
    throw std::runtime_error("budget needs --query-tokens");
  }

  const pcc::BudgetReport report = pcc::budget_report(demo_tokens, query_tokens, cfg.stage2.x, n);
  const std::string text = pcc::budget_json(report);
  if (given(sub, "--out")) {
    write_text(f.out, text + "\n");
    std::cout << "wrote " << f.out << "\n";
  }
  std::cout << text << "\n";
}

void cmd_attention_report(const CLI::App* sub, const Flags& f) {
  AppConfig cfg = load_app_config(f.config);
  if (given(sub, "--limit")) cfg.infer_limit = f.limit;
  const std::string dir = given(sub, "--data") ? f.data : cfg.data_dir;
  const std::string split = given(sub, "--split") ? f.split : cfg.infer_split;

  const Loaded l = load_data(dir);
  pcc::LoadedCheckpoint ckpt = pcc::load_checkpoint(f.checkpoint);
  const std::vector<pcc::SegmentScore> scores =
      pcc::attention_report(ckpt.model, pcc::split_by_name(l.dataset, split), l.dataset.codebook,
                            l.vocab, cfg.infer_limit);

  json j = json::array();
  for (const pcc::SegmentScore& s : scores) {
    json row;
    row["segment"] = s.label;
    row["avg_score"] = s.avg_score;
    row["percentage"] = s.percentage;
    j.push_back(row);
    std::cout << s.label << " " << s.percentage << "%\n";
  }
  if (given(sub, "--out")) {
    write_text(f.out, j.dump(2) + "\n");
    std::cout << "wrote " << f.out << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage prompt compression pipeline for protein QA"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file");
    sub->add_option("--seed", f.seed, "random seed (overrides config)");
    sub->add_option("--threads", f.threads, "worker cap (PCC_THREADS mirrors this)");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic QA dataset");
  add_common(gen);
  gen->add_option("--out", f.out, "output directory");
  gen->callback([&] { cmd_gen_data(gen, f); });

  CLI::App* bv = app.add_subcommand("build-vocab", "rebuild vocab.json from a dataset");
  add_common(bv);
  bv->add_option("--data", f.data, "dataset directory");
  bv->add_option("--min-count", f.min_count, "minimum word count");
  bv->add_option("--out", f.out, "output path");
  bv->callback([&] { cmd_build_vocab(bv, f); });

  CLI::App* s1 = app.add_subcommand("train-stage1", "train adapters + protein embeddings");
  add_common(s1);
  s1->add_option("--data", f.data, "dataset directory");
  s1->add_option("--out", f.out, "checkpoint output path");
  s1->add_option("--lr", f.lr, "learning rate");
  s1->add_option("--epochs", f.epochs, "epochs");
  s1->add_option("--batch-size", f.batch, "batch size");
  s1->add_option("--eval-limit", f.eval_limit, "val records for before/after loss");
  s1->callback([&] { cmd_train_stage1(s1, f); });

  CLI::App* s2 = app.add_subcommand("train-stage2", "train the compression projection");
  add_common(s2);
  s2->add_option("--data", f.data, "dataset directory");
  s2->add_option("--checkpoint", f.checkpoint, "stage-1 checkpoint")->required();
  s2->add_option("--out", f.out, "checkpoint output path");
  s2->add_option("--x", f.x, "compressed vectors per demo");
  s2->add_option("--lr", f.lr, "learning rate");
  s2->add_option("--epochs", f.epochs, "epochs");
  s2->add_option("--batch-size", f.batch, "batch size");
  s2->add_option("--eval-n", f.eval_n, "shots for before/after loss");
  s2->add_option("--eval-limit", f.eval_limit, "val records for before/after loss");
  s2->callback([&] { cmd_train_stage2(s2, f); });

  CLI::App* bb = app.add_subcommand("build-bank", "compress the training split into a demo bank");
  add_common(bb);
  bb->add_option("--data", f.data, "dataset directory");
  bb->add_option("--checkpoint", f.checkpoint, "checkpoint with projection")->required();
  bb->add_option("--x", f.x, "compressed vectors per demo");
  bb->add_option("--out", f.out, "bank output path");
  bb->callback([&] { cmd_build_bank(bb, f); });

  CLI::App* rt = app.add_subcommand("retrieve", "rank bank demos for one query");
  add_common(rt);
  rt->add_option("--data", f.data, "dataset directory");
  rt->add_option("--checkpoint", f.checkpoint, "model checkpoint")->required();
  rt->add_option("--bank", f.bank, "demo bank")->required();
  rt->add_option("--id", f.id, "query record id")->required();
  rt->add_option("--split", f.split, "query split");
  rt->add_option("--strategy", f.strategy, "random | bm25 | dense")
      ->check(CLI::IsMember({"random", "bm25", "dense"}));
  rt->add_option("--n", f.n, "demos to rank");
  rt->callback([&] { cmd_retrieve(rt, f); });

  CLI::App* inf = app.add_subcommand("infer", "batch ICL inference over a split");
  add_common(inf);
  inf->add_option("--data", f.data, "dataset directory");
  inf->add_option("--checkpoint", f.checkpoint, "model checkpoint")->required();
  inf->add_option("--bank", f.bank, "demo bank (required when n > 0)");
  inf->add_option("--strategy", f.strategy, "random | bm25 | dense")
      ->check(CLI::IsMember({"random", "bm25", "dense"}));
  inf->add_option("--n", f.n, "shots");
  inf->add_option("--split", f.split, "query split");
  inf->add_option("--limit", f.limit, "max queries (0 = all)");
  inf->add_option("--max-new-tokens", f.max_new, "generation cap");
  inf->add_option("--out", f.out, "output JSONL path");
  inf->callback([&] { cmd_infer(inf, f); });

  CLI::App* ev = app.add_subcommand("eval", "score an inference JSONL against references");
  add_common(ev);
  ev->add_option("--data", f.data, "dataset directory");
  ev->add_option("--in", f.in, "inference JSONL")->required();
  ev->add_option("--split", f.split, "reference split");
  ev->add_option("--out", f.out, "report JSON path (also printed)");
  ev->callback([&] { cmd_eval(ev, f); });

  CLI::App* sw = app.add_subcommand("sweep", "grid over (x, n) with per-cell metrics");
  add_common(sw);
  sw->add_option("--data", f.data, "dataset directory");
  sw->add_option("--checkpoint", f.checkpoint, "checkpoint with projection")->required();
  sw->add_option("--strategy", f.strategy, "random | bm25 | dense")
      ->check(CLI::IsMember({"random", "bm25", "dense"}));
  sw->add_option("--split", f.split, "query split");
  sw->add_option("--limit", f.limit, "max queries per cell");
  sw->add_option("--out", f.out, "CSV output path");
  sw->callback([&] { cmd_sweep(sw, f); });

  CLI::App* bd = app.add_subcommand("budget", "token accounting for an N-shot prompt");
  add_common(bd);
  bd->add_option("--bank", f.bank, "demo bank for per-demo lengths");
  bd->add_option("--demo-tokens", f.demo_tokens, "mean verbatim demo length");
  bd->add_option("--query-tokens", f.query_tokens, "query prompt length");
  bd->add_option("--x", f.x, "compressed vectors per demo");
  bd->add_option("--n", f.n, "shots");
  bd->add_option("--out", f.out, "report JSON path (also printed)");
  bd->callback([&] { cmd_budget(bd, f); });

  CLI::App* ar = app.add_subcommand("attention-report",
                                    "mean last-layer attention split of zero-shot prompts");
  add_common(ar);
  ar->add_option("--data", f.data, "dataset directory");
  ar->add_option("--checkpoint", f.checkpoint, "model checkpoint")->required();
  ar->add_option("--split", f.split, "query split");
  ar->add_option("--limit", f.limit, "max queries (0 = all)");
  ar->add_option("--out", f.out, "report JSON path");
  ar->callback([&] { cmd_attention_report(ar, f); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
