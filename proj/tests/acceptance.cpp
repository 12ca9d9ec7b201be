// Acceptance suite: exercises every release gate end to end and prints one
// verdict line per criterion. Exit status is 0 only if all criteria hold.
//
// The heavyweight part (criteria 4, 7, 8, 10) shares a single full-scale
// training run on the default synthetic task; criterion 9 shells out to the
// command-line binary twice at reduced scale and compares artifact bytes.

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

#include "fd_util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace pcc;

namespace {

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<Verdict> verdicts;

void record(const std::string& name, bool pass, const std::string& detail) {
  verdicts.push_back({name, pass, detail});
  std::cout << "  -> " << (pass ? "ok" : "FAILED") << ": " << detail << "\n" << std::flush;
}

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << v;
  return os.str();
}

// ---- criterion 1: token-budget arithmetic -------------------------------

void criterion_budget() {
  std::cout << "[run] budget arithmetic\n";
  const auto t0 = std::chrono::steady_clock::now();
  const double demo_len = 751.41;
  const int x = 16, n = 16;
  const double target_pct = 93.68;
  // Query length backed out of the ratio identity
  //   ratio = 1 - (n*x + q) / (n*demo_len + q)
  const double r = target_pct / 100.0;
  const double q = ((1.0 - r) * n * demo_len - n * x) / r;

  const BudgetReport rep = budget_report(std::vector<double>(n, demo_len), q, x, n);
  const double got_pct = 100.0 * rep.compression_ratio;
  const double dt = seconds_since(t0);

  const bool pass = std::fabs(got_pct - target_pct) <= 0.05 && rep.per_demo_compressed == 16 &&
                    q > 0.0 && dt < 1.0;
  record("1 budget arithmetic", pass,
         "ratio " + fmt(got_pct) + "% (target 93.68% +/- 0.05), per-demo " +
             std::to_string(rep.per_demo_compressed) + " (want 16), query len " + fmt(q, 2) +
             ", " + fmt(dt, 3) + "s");
}

// ---- criterion 2: joint layout halves the protein span ------------------

void criterion_halving() {
  std::cout << "[run] joint-layout length halving\n";
  Rng rng(202);
  bool pass = true;
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n_res = 5 + static_cast<int>(rng.next_below(76));  // 5..80
    std::vector<int> t_s, t_x;
    for (int i = 0; i < n_res; ++i) {
      t_s.push_back(kAaBeginId + static_cast<int>(rng.next_below(20)));
      t_x.push_back(kStrBeginId + static_cast<int>(rng.next_below(512)));
    }
    const std::vector<int> q{kTextBeginId, kTextBeginId + 1};
    const PromptPlan sep = assemble_prompt(q, t_s, t_x, PromptLayout::Separate, {}, 1024);
    const PromptPlan joint = assemble_prompt(q, t_s, t_x, PromptLayout::Joint, {}, 1024);
    if (joint.protein.size() != sep.protein.size() - (n_res + 2)) pass = false;
    if (sep.size() - joint.size() != n_res + 2) pass = false;
    if (sep.protein.size() != 2 * n_res + 4 || joint.protein.size() != n_res + 2) pass = false;
    ++checked;
  }
  record("2 protein span halving", pass,
         std::to_string(checked) + " random proteins, joint span == separate - (N_res + 2)");
}

// ---- criterion 3: gradients vs central finite differences ---------------

void criterion_gradients() {
  std::cout << "[run] finite-difference gradient check (64-bit)\n";
  const auto t0 = std::chrono::steady_clock::now();

  SyntheticTaskSpec spec;
  spec.n_train = 8;
  spec.n_val = 2;
  spec.n_test = 2;
  spec.len_min = 8;
  spec.len_max = 12;
  spec.seed = 5;
  const Dataset ds = generate_dataset(spec);
  const Vocabulary vocab = Vocabulary::build(vocab_corpus(ds), 1);

  ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.hidden_dim = 16;
  mc.n_layers = 2;
  mc.n_heads = 2;
  mc.max_context = 128;
  Rng mrng(3);
  Model model = Model::init(mc, mrng);
  Rng lrng(19);
  model.attach_lora(4, 8.0, lrng);
  Rng brng(4);
  for (auto& [name, t] : model.lora_params())
    if (name.find(".b") != std::string::npos)
      for (std::size_t i = 0; i < t.numel(); ++i)
        t.values()[i] = static_cast<float>(brng.next_normal(0.0, 0.05));

  ModelT<double> model64 = widen_model(model);

  // Answer loss on one demonstration-style prompt, every parameter (backbone
  // plus adapters) against central differences.
  const PromptPlan plan1 = demo_plan(ds.train[0], ds.codebook, vocab, mc.max_context);
  const Mask mask1 = answer_mask(plan1);
  const std::vector<int> targets1 = shifted_targets(plan1);
  std::vector<Tensor64> leaves1;
  for (auto& [name, t] : model64.named_params()) leaves1.push_back(t);
  for (auto& [name, t] : model64.lora_params()) leaves1.push_back(t);
  std::size_t n_param = 0;
  for (const auto& t : leaves1) n_param += t.numel();

  const double err1 = pcc_test::max_rel_err(
      leaves1,
      [&] {
        auto fwd = model64.forward_embeddings(model64.assemble_embeddings(plan1, nullptr), false);
        return cross_entropy_masked(fwd.logits, targets1, mask1);
      },
      1e-5);

  // ICL loss as a function of the projection parameters only: one cached
  // demonstration, projected in-graph, prepended to a second prompt.
  const int x = 4;
  const RawCompression raw = compress_raw(ds.train[1], model, ds.codebook, vocab, x);
  std::vector<double> raw64(raw.vectors.begin(), raw.vectors.end());
  const Tensor64 raw_rows = Tensor64::from_data({x, mc.hidden_dim}, std::move(raw64));

  Rng prng(6);
  const Projection proj = Projection::identity_with_noise(mc.hidden_dim, prng);
  ProjectionT<double> proj64 = widen_projection(proj);

  PromptPlan plan2 = demo_plan(ds.train[2], ds.codebook, vocab, mc.max_context);
  prepend_demo_rows(plan2, x);
  const Mask mask2 = answer_mask(plan2);
  const std::vector<int> targets2 = shifted_targets(plan2);

  const double err2 = pcc_test::max_rel_err(
      {proj64.w, proj64.b},
      [&] {
        const Tensor64 rows = proj64.apply(raw_rows);
        auto fwd = model64.forward_embeddings(model64.assemble_embeddings(plan2, &rows), false);
        return cross_entropy_masked(fwd.logits, targets2, mask2);
      },
      1e-5);

  const double dt = seconds_since(t0);
  const bool pass = err1 < 1e-4 && err2 < 1e-4 && dt < 120.0;
  std::ostringstream os;
  os.precision(3);
  os << "answer-loss max rel err " << err1 << " over " << n_param
     << " params, ICL-loss (projection) max rel err " << err2 << " over "
     << proj64.w.numel() + proj64.b.numel() << " params (limit 1e-4), " << fmt(dt, 1) << "s";
  record("3 gradient correctness", pass, os.str());
}

// ---- criterion 5: oracle equivalence ------------------------------------

void criterion_oracles() {
  std::cout << "[run] oracle equivalence (quantizer, retrieval, BM25)\n";
  bool pass = true;
  std::string note;

  {  // quantizer vs exhaustive 512-code scan
    Codebook cb;
    cb.dim = 6;
    Rng rng(31);
    cb.codes.resize(512 * 6);
    for (float& v : cb.codes) v = static_cast<float>(rng.next_normal());
    const int rows = 40;
    std::vector<float> feats(static_cast<std::size_t>(rows) * 6);
    for (float& v : feats) v = static_cast<float>(rng.next_normal());
    const std::vector<int> got = quantize_structure(feats, rows, cb);
    for (int rI = 0; rI < rows; ++rI) {
      int best = 0;
      double best_d = 1e300;
      for (int j = 0; j < 512; ++j) {
        double d2 = 0.0;
        for (int k = 0; k < 6; ++k) {
          const double diff = static_cast<double>(feats[static_cast<std::size_t>(rI) * 6 + k]) -
                              cb.codes[static_cast<std::size_t>(j) * 6 + k];
          d2 += diff * diff;
        }
        if (d2 < best_d) {
          best_d = d2;
          best = j;
        }
      }
      if (got[static_cast<std::size_t>(rI)] != best) pass = false;
    }
    note += "quantizer 40x512 exact";
  }

  {  // top-k retrieval vs exhaustive sort
    DemoBank bank;
    bank.x = 1;
    bank.d_f = 5;
    Rng rng(32);
    for (int i = 0; i < 30; ++i) {
      CompressedDemo demo;
      demo.id = "demo-" + std::to_string(i);
      demo.vectors.assign(5, 0.0f);
      demo.key.resize(5);
      for (float& k : demo.key) k = static_cast<float>(rng.next_normal());
      bank.demos.push_back(std::move(demo));
    }
    std::vector<float> query(5);
    for (float& v : query) v = static_cast<float>(rng.next_normal());
    const std::set<std::string> exclude{"demo-3", "demo-17"};

    std::vector<std::pair<double, std::string>> oracle;
    for (const auto& demo : bank.demos)
      if (!exclude.count(demo.id))
        oracle.emplace_back(-cosine_similarity(query, demo.key), demo.id);
    std::sort(oracle.begin(), oracle.end());
    std::vector<std::string> expect;
    for (int i = 0; i < 10; ++i) expect.push_back(oracle[static_cast<std::size_t>(i)].second);

    if (retrieve_top_k(query, bank, 10, exclude) != expect) pass = false;
    note += ", top-10-of-30 exact";
  }

  {  // BM25 vs the Okapi formula evaluated by hand
    QARecord d1, d2, d3;
    d1.id = "d1"; d1.question = "cat sat"; d1.sequence = "A";
    d2.id = "d2"; d2.question = "cat cat ran"; d2.sequence = "C";
    d3.id = "d3"; d3.question = "dog barked"; d3.sequence = "D";
    const Bm25Index index = Bm25Index::build({d1, d2, d3});

    const double k1 = 1.5, b = 0.75;
    const double avgdl = (3.0 + 4.0 + 3.0) / 3.0;  // terms incl. AA letters
    auto idf = [&](int df) { return std::log(1.0 + (3.0 - df + 0.5) / (df + 0.5)); };
    auto tf_term = [&](double tf, double dl) {
      return tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
    };
    const double want_d1 = idf(2) * tf_term(1.0, 3.0);
    const double want_d2 = idf(2) * tf_term(2.0, 4.0);
    const double want_d3 = 0.0;
    if (std::fabs(index.score("d1", {"cat"}) - want_d1) > 1e-9) pass = false;
    if (std::fabs(index.score("d2", {"cat"}) - want_d2) > 1e-9) pass = false;
    if (std::fabs(index.score("d3", {"cat"}) - want_d3) > 1e-9) pass = false;
    const double want_two = idf(2) * tf_term(1.0, 3.0) + idf(1) * tf_term(1.0, 3.0);
    if (std::fabs(index.score("d1", {"cat", "a"}) - want_two) > 1e-9) pass = false;
    note += ", BM25 3-doc hand Okapi to 1e-9";
  }

  record("5 oracle equivalence", pass, note);
}

// ---- criterion 6: metric fixtures ---------------------------------------

void criterion_metrics() {
  std::cout << "[run] metric fixtures\n";
  const double e = emji({{"A", "B"}}, {{"B", "C"}});
  const double bl = bleu("a b c d", "a b x d", 2).score;
  const double rl = rouge_l("a c", "a b c");
  const bool pass = std::fabs(e - 1.0 / 3.0) <= 1e-9 && std::fabs(bl - 0.5) <= 1e-9 &&
                    std::fabs(rl - 0.8) <= 1e-9;
  record("6 metric fixtures", pass,
         "EMJI " + fmt(e, 9) + " (want 1/3), BLEU-2 " + fmt(bl, 9) + " (want 0.5), ROUGE-L " +
             fmt(rl, 9) + " (want 0.8)");
}

// ---- criteria 4 + 7 + 8 + 10: shared full-scale run ---------------------

struct BigRun {
  Dataset ds;
  Vocabulary vocab;
  Model model;
  Projection proj;
  bool trained = false;
};

std::uint64_t tensor_hash(const Tensor& t) {
  const auto vals = t.values();
  return fnv1a64({reinterpret_cast<const unsigned char*>(vals.data()),
                  vals.size() * sizeof(float)});
}

void criterion_training(BigRun& run) {
  std::cout << "[run] full-scale two-stage training (seed 42, default task)\n";
  const auto t0 = std::chrono::steady_clock::now();

  SyntheticTaskSpec task;  // library defaults: 8 classes, 2000/200/200, len 20-60
  task.seed = 42;
  run.ds = generate_dataset(task);
  run.vocab = Vocabulary::build(vocab_corpus(run.ds), 1);

  ModelConfig mc;  // library defaults: d=64, 4 layers, 4 heads, ctx 1024
  mc.vocab_size = run.vocab.size();
  Rng init_rng(Rng::derive(42, "model-init"));
  run.model = Model::init(mc, init_rng);

  // Stage 1: adapters + protein embedding rows.
  const double pre1 =
      eval_answer_loss(run.model, run.ds.val, run.ds.codebook, run.vocab);
  Stage1Config s1;
  s1.lr = 3e-3;
  s1.seed = 42;
  std::cout << "  stage-1: pre-train val answer loss " << fmt(pre1) << "\n" << std::flush;
  train_stage1(run.model, run.ds.train, run.ds.codebook, run.vocab, s1);
  const double post1 =
      eval_answer_loss(run.model, run.ds.val, run.ds.codebook, run.vocab);
  const double drop1 = pre1 > 0 ? 100.0 * (1.0 - post1 / pre1) : 0.0;
  std::cout << "  stage-1: post-train val answer loss " << fmt(post1) << " (drop "
            << fmt(drop1, 2) << "%), " << fmt(seconds_since(t0), 1) << "s\n"
            << std::flush;

  // Stage 2: projection only, on cached last-x hidden states.
  Rng proj_rng(Rng::derive(42, "proj-init"));
  run.proj = Projection::identity_with_noise(mc.hidden_dim, proj_rng);
  Stage2Config s2;  // defaults: lr 3e-3, x=16, N in {1,2,4,8,16}, 3 epochs
  s2.seed = 42;

  std::map<std::string, std::uint64_t> backbone_before;
  for (auto& [name, t] : run.model.named_params()) backbone_before[name] = tensor_hash(t);

  const Stage2Pool pool =
      prepare_stage2_pool(run.model, run.ds.train, run.ds.codebook, run.vocab, s2.x);
  const std::vector<QARecord> eval_queries(run.ds.val.begin(), run.ds.val.begin() + 64);
  const double pre2 = eval_stage2_loss(run.model, run.proj, pool, eval_queries,
                                       run.ds.codebook, run.vocab, 16);
  std::cout << "  stage-2: pre-train 16-shot val loss " << fmt(pre2) << "\n" << std::flush;
  train_stage2(run.model, run.proj, run.ds.train, run.ds.codebook, run.vocab, s2, &pool);
  const double post2 = eval_stage2_loss(run.model, run.proj, pool, eval_queries,
                                        run.ds.codebook, run.vocab, 16);
  const double drop2 = pre2 > 0 ? 100.0 * (1.0 - post2 / pre2) : 0.0;
  const double dt = seconds_since(t0);
  std::cout << "  stage-2: post-train 16-shot val loss " << fmt(post2) << " (drop "
            << fmt(drop2, 2) << "%), total " << fmt(dt, 1) << "s\n"
            << std::flush;
  run.trained = true;

  // Criterion 4: backbone untouched by stage 2; only d_f^2 + d_f trainable.
  bool frozen = true;
  for (auto& [name, t] : run.model.named_params())
    if (tensor_hash(t) != backbone_before[name]) frozen = false;
  const long long trainable =
      static_cast<long long>(run.proj.w.numel()) + static_cast<long long>(run.proj.b.numel());
  const long long want = static_cast<long long>(mc.hidden_dim) * mc.hidden_dim + mc.hidden_dim;
  record("4 stage-2 freeze", frozen && trainable == want,
         std::string("backbone hashes ") + (frozen ? "unchanged" : "CHANGED") +
             ", trainable params " + std::to_string(trainable) + " (want " +
             std::to_string(want) + ")");

  const bool pass1 = drop1 >= 50.0;
  const bool pass2 = drop2 >= 30.0;
  record("7 training signal", pass1 && pass2 && dt < 900.0,
         "stage-1 answer loss " + fmt(pre1) + " -> " + fmt(post1) + " (drop " + fmt(drop1, 2) +
             "%, need >= 50%); stage-2 16-shot loss " + fmt(pre2) + " -> " + fmt(post2) +
             " (drop " + fmt(drop2, 2) + "%, need >= 30%); " + fmt(dt, 1) + "s (< 900s)");
}

void criterion_icl_gain(BigRun& run) {
  std::cout << "[run] out-of-domain ICL ordering (3 seeds)\n";
  const auto t0 = std::chrono::steady_clock::now();
  const BankBuildResult built = build_demo_bank(run.ds.train, run.model, run.proj,
                                                run.ds.codebook, run.vocab, 16);
  std::cout << "  bank: " << built.bank.demos.size() << " demos, skipped "
            << built.skipped.size() << ", " << fmt(seconds_since(t0), 1) << "s\n"
            << std::flush;

  const std::vector<QARecord>& queries = run.ds.test_ood;
  std::vector<std::string> refs;
  for (const auto& q : queries) refs.push_back(q.answer);

  auto run_strategy = [&](const std::string& strategy, int n, std::uint64_t seed) {
    std::vector<std::string> preds;
    preds.reserve(queries.size());
    for (const auto& q : queries)
      preds.push_back(run_icl_inference(q, run.model, n > 0 ? &built.bank : nullptr, nullptr,
                                        run.ds.codebook, run.vocab, strategy, n,
                                        Rng::derive(seed, q.id))
                          .answer);
    return evaluate_answers(preds, refs, run.ds.lexicon).emji;
  };

  double zero_sum = 0.0, dense_sum = 0.0, random_sum = 0.0;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const double z = run_strategy("dense", 0, seed);
    const double d = run_strategy("dense", 4, seed);
    const double r = run_strategy("random", 4, seed);
    std::cout << "  seed " << seed << ": zero-shot EMJI " << fmt(z) << ", dense-4 " << fmt(d)
              << ", random-4 " << fmt(r) << ", elapsed " << fmt(seconds_since(t0), 1) << "s\n"
              << std::flush;
    zero_sum += z;
    dense_sum += d;
    random_sum += r;
  }
  const double zero = zero_sum / 3.0, dense = dense_sum / 3.0, random_emji = random_sum / 3.0;
  const bool pass = dense >= zero && dense >= random_emji;
  record("8 OOD ICL ordering", pass,
         "mean EMJI over 3 seeds: dense-4 " + fmt(dense) + " >= zero-shot " + fmt(zero) +
             " and >= random-4 " + fmt(random_emji) + (pass ? "" : "  (ordering violated)") +
             ", " + fmt(seconds_since(t0), 1) + "s");
}

void criterion_attention(BigRun& run) {
  std::cout << "[run] attention segment report\n";
  const std::vector<QARecord> queries(run.ds.test.begin(), run.ds.test.begin() + 8);
  const auto rows = attention_report(run.model, queries, run.ds.codebook, run.vocab);
  double sum = 0.0;
  for (const auto& row : rows) sum += row.percentage;
  const bool pass = rows.size() == 3 && std::fabs(sum - 100.0) <= 0.01;
  std::string detail = "segments";
  for (const auto& row : rows) detail += " " + row.label + "=" + fmt(row.percentage, 2) + "%";
  detail += ", sum " + fmt(sum, 6) + " (100 +/- 0.01); split is observational";
  record("10 attention report", pass, detail);
}

// ---- criterion 9: byte-identical reruns through the CLI -----------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PCC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

void criterion_determinism() {
  std::cout << "[run] determinism: two identical CLI pipeline runs\n";
  const auto t0 = std::chrono::steady_clock::now();
  const std::filesystem::path root =
      std::filesystem::temp_directory_path() / "pcc_acceptance_det";
  std::filesystem::remove_all(root);
  std::filesystem::create_directories(root);

  const std::string cfg_path = (root / "config.json").string();
  {
    std::ofstream cfg(cfg_path);
    cfg << R"({
  "seed": 9,
  "dataset": {"n_train": 48, "n_val": 12, "n_test": 8, "len_min": 10, "len_max": 18},
  "model": {"hidden_dim": 32, "n_layers": 2, "n_heads": 2, "max_context": 256},
  "stage1": {"epochs": 1, "batch_size": 4},
  "stage2": {"epochs": 1, "batch_size": 4, "x": 4, "n_range": [1, 2],
             "eval_n": 2, "eval_limit": 8},
  "infer": {"strategy": "dense", "n": 2, "split": "val", "limit": 6, "max_new_tokens": 16}
})";
  }

  bool ran = true;
  for (const char* tag : {"a", "b"}) {
    const std::string dir = (root / tag).string();
    std::filesystem::create_directories(dir);
    const std::string data = dir + "/data";
    ran = ran && run_cli("gen-data --config " + cfg_path + " --out " + data) == 0;
    ran = ran && run_cli("train-stage1 --config " + cfg_path + " --data " + data + " --out " +
                         dir + "/s1.ckpt") == 0;
    ran = ran && run_cli("train-stage2 --config " + cfg_path + " --data " + data +
                         " --checkpoint " + dir + "/s1.ckpt --out " + dir + "/s2.ckpt") == 0;
    ran = ran && run_cli("build-bank --config " + cfg_path + " --data " + data +
                         " --checkpoint " + dir + "/s2.ckpt --out " + dir + "/demos.bank") == 0;
    ran = ran && run_cli("infer --config " + cfg_path + " --data " + data + " --checkpoint " +
                         dir + "/s2.ckpt --bank " + dir + "/demos.bank --out " + dir +
                         "/infer.jsonl") == 0;
    if (!ran) break;
  }

  bool pass = ran;
  std::string mismatches;
  if (ran) {
    for (const char* f :
         {"s1.ckpt", "s2.ckpt", "demos.bank", "infer.jsonl", "data/train.jsonl"}) {
      const auto ha = hash_file((root / "a" / f).string());
      const auto hb = hash_file((root / "b" / f).string());
      if (ha != hb) {
        pass = false;
        mismatches += std::string(" ") + f;
      }
    }
  }
  record("9 determinism", pass,
         ran ? (pass ? "checkpoints, bank, and inference JSONL byte-identical across reruns"
                     : "byte mismatch in:" + mismatches) +
                   (", " + fmt(seconds_since(t0), 1) + "s")
             : "CLI pipeline run failed");
  std::filesystem::remove_all(root);
}

}  // namespace

int main() {
  std::cout << "=== acceptance suite ===\n";
  const auto t0 = std::chrono::steady_clock::now();

  criterion_budget();
  criterion_halving();
  criterion_gradients();
  criterion_oracles();
  criterion_metrics();

  BigRun run;
  criterion_training(run);  // records criteria 4 and 7
  criterion_icl_gain(run);
  criterion_determinism();
  criterion_attention(run);

  std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) {
    return std::stoi(a.name) < std::stoi(b.name);
  });

  std::cout << "\n=== results ===\n";
  int failures = 0;
  for (const auto& v : verdicts) {
    std::cout << (v.pass ? "[PASS]" : "[FAIL]") << " criterion " << v.name << ": " << v.detail
              << "\n";
    if (!v.pass) ++failures;
  }
  std::cout << "\n" << (verdicts.size() - static_cast<std::size_t>(failures)) << "/"
            << verdicts.size() << " criteria passed in " << fmt(seconds_since(t0), 1)
            << "s\n";
  return failures == 0 ? 0 : 1;
}
