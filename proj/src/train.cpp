#include "pcc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pcc/optim.hpp"
#include "pcc/retrieval.hpp"
#include "pcc/rng.hpp"
#include "pcc/vocab.hpp"

namespace pcc {

namespace {

std::vector<int> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.next_below(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

[[noreturn]] void abort_diverged(const char* stage, int step, double loss) {
  std::ostringstream msg;
  msg << stage << ": non-finite loss " << loss << " at step " << step
      << "; aborting (lower the learning rate or inspect the data)";
  throw std::runtime_error(msg.str());
}

// Demo slots for one query: the n_shots most similar pool entries, placed
// least-similar-first so the best demo sits next to the query.
std::vector<int> demo_slots_for(const std::vector<int>& ranked_desc, int n_shots) {
  const int n_eff = std::min<int>(n_shots, static_cast<int>(ranked_desc.size()));
  std::vector<int> slots(ranked_desc.begin(), ranked_desc.begin() + n_eff);
  std::reverse(slots.begin(), slots.end());
  return slots;
}

}  // namespace

Mask answer_mask(const PromptPlan& plan) {
  if (plan.answer.size() <= 0)
    throw std::invalid_argument("answer_mask: plan has no answer span");
  if (plan.answer.begin < 1 || plan.answer.end > plan.size())
    throw std::invalid_argument("answer_mask: answer span out of bounds");
  Mask mask(plan.items.size(), 0);
  for (int t = plan.answer.begin - 1; t < plan.answer.end - 1; ++t) mask[t] = 1;
  return mask;
}

std::vector<int> shifted_targets(const PromptPlan& plan) {
  std::vector<int> targets(plan.items.size(), 0);
  for (int t = 0; t + 1 < plan.size(); ++t) {
    const PromptItem& next = plan.items[t + 1];
    if (next.kind == PromptItemKind::Token) targets[t] = next.token_id;
  }
  return targets;
}

TrainResult train_stage1(Model& model, const std::vector<QARecord>& train,
                         const Codebook& codebook, const Vocabulary& vocab,
                         const Stage1Config& config) {
  if (train.empty()) throw std::invalid_argument("train_stage1: empty training set");
  if (config.batch_size <= 0) throw std::invalid_argument("train_stage1: batch_size must be > 0");
  if (config.epochs < 0) throw std::invalid_argument("train_stage1: negative epochs");
  if (model.has_lora())
    throw std::invalid_argument("train_stage1: model already carries adapters");

  Rng lora_rng(Rng::derive(config.seed, "stage1-lora-init"));
  model.attach_lora(config.lora_rank, config.lora_alpha, lora_rng);
  model.tok_emb().set_requires_grad(true);

  // Adapters plus the protein rows of the embedding table; text rows and the
  // backbone stay frozen.
  std::vector<ParamRefT<float>> params;
  params.push_back({model.tok_emb(), "tok_emb", kAaBeginId, kStrEndId});
  for (auto& [name, tensor] : model.lora_params()) params.push_back({tensor, name, 0, -1});

  AdamWConfig opt_cfg;
  opt_cfg.lr = config.lr;
  AdamW opt(std::move(params), opt_cfg);

  TrainResult result;
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled_indices(
        train.size(), Rng::derive(config.seed, "stage1-epoch-" + std::to_string(epoch)));
    double epoch_sum = 0.0;
    int epoch_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const float inv = 1.0f / static_cast<float>(end - start);
      opt.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const QARecord& rec = train[order[k]];
        PromptPlan plan = demo_plan(rec, codebook, vocab, model.config().max_context);
        GraphT<float> graph;
        Tensor embs = model.assemble_embeddings(plan, nullptr);
        ForwardResultT<float> fwd = model.forward_embeddings(embs, false);
        Tensor loss =
            scale(cross_entropy_masked(fwd.logits, shifted_targets(plan), answer_mask(plan)), inv);
        batch_loss += static_cast<double>(loss.item());
        graph.backward(loss);
      }
      result.total += static_cast<int>(end - start);
      if (!std::isfinite(batch_loss)) abort_diverged("train_stage1", step, batch_loss);
      opt.clip_global_norm(config.grad_clip);
      opt.step();
      result.loss_curve.emplace_back(step, batch_loss);
      epoch_sum += batch_loss;
      ++epoch_batches;
      ++step;
    }
    result.epoch_mean.push_back(epoch_batches > 0 ? epoch_sum / epoch_batches : 0.0);
  }

  model.merge_lora();
  model.tok_emb().set_requires_grad(false);
  return result;
}

double eval_answer_loss(const Model& model, const std::vector<QARecord>& records,
                        const Codebook& codebook, const Vocabulary& vocab, int limit) {
  if (records.empty()) throw std::invalid_argument("eval_answer_loss: no records");
  std::size_t n = records.size();
  if (limit > 0) n = std::min(n, static_cast<std::size_t>(limit));
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    PromptPlan plan = demo_plan(records[i], codebook, vocab, model.config().max_context);
    Tensor embs = model.assemble_embeddings(plan, nullptr);
    ForwardResultT<float> fwd = model.forward_embeddings(embs, false);
    sum += static_cast<double>(
        cross_entropy_masked(fwd.logits, shifted_targets(plan), answer_mask(plan)).item());
  }
  return sum / static_cast<double>(n);
}

Stage2Pool prepare_stage2_pool(const Model& model, const std::vector<QARecord>& records,
                               const Codebook& codebook, const Vocabulary& vocab, int x) {
  if (x <= 0) throw std::invalid_argument("prepare_stage2_pool: x must be positive");
  Stage2Pool pool;
  pool.x = x;
  pool.d_f = model.config().hidden_dim;
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      RawCompression raw = compress_raw(records[i], model, codebook, vocab, x);
      pool.record_index.push_back(static_cast<int>(i));
      pool.ids.push_back(records[i].id);
      pool.raw.push_back(std::move(raw.vectors));
      pool.keys.push_back(std::move(raw.key));
    } catch (const std::length_error& e) {
      pool.skipped_demos.emplace_back(records[i].id, e.what());
    }
  }
  return pool;
}

std::vector<int> rank_pool(const Stage2Pool& pool, const std::vector<float>& query_emb,
                           int exclude_slot, int max_shots) {
  std::vector<int> slots;
  slots.reserve(pool.ids.size());
  std::vector<double> sims(pool.ids.size(), 0.0);
  for (int j = 0; j < static_cast<int>(pool.ids.size()); ++j) {
    if (j == exclude_slot) continue;
    sims[j] = cosine_similarity(query_emb, pool.keys[j]);
    slots.push_back(j);
  }
  std::sort(slots.begin(), slots.end(), [&](int a, int b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return pool.ids[a] < pool.ids[b];
  });
  if (max_shots >= 0 && static_cast<int>(slots.size()) > max_shots) slots.resize(max_shots);
  return slots;
}

TrainResult train_stage2(const Model& model, Projection& proj,
                         const std::vector<QARecord>& train, const Codebook& codebook,
                         const Vocabulary& vocab, const Stage2Config& config,
                         const Stage2Pool* shared_pool) {
  if (config.batch_size <= 0) throw std::invalid_argument("train_stage2: batch_size must be > 0");
  if (config.epochs < 0) throw std::invalid_argument("train_stage2: negative epochs");
  if (config.n_range.empty()) throw std::invalid_argument("train_stage2: empty n_range");
  for (int n : config.n_range)
    if (n < 0) throw std::invalid_argument("train_stage2: negative shot count");
  if (config.max_skip_fraction < 0.0 || config.max_skip_fraction > 1.0)
    throw std::invalid_argument("train_stage2: max_skip_fraction outside [0, 1]");
  if (proj.d_f() != model.config().hidden_dim)
    throw std::invalid_argument("train_stage2: projection width does not match the model");
  if (model.has_lora())
    throw std::invalid_argument("train_stage2: merge adapters before stage 2");

  Stage2Pool local_pool;
  if (shared_pool != nullptr) {
    if (shared_pool->x != config.x)
      throw std::invalid_argument("train_stage2: pool was built with a different x");
    if (shared_pool->d_f != model.config().hidden_dim)
      throw std::invalid_argument("train_stage2: pool width does not match the model");
    for (int idx : shared_pool->record_index)
      if (idx < 0 || idx >= static_cast<int>(train.size()))
        throw std::invalid_argument("train_stage2: pool does not index these records");
  } else {
    local_pool = prepare_stage2_pool(model, train, codebook, vocab, config.x);
  }
  const Stage2Pool& pool = shared_pool != nullptr ? *shared_pool : local_pool;
  if (pool.ids.size() < 2)
    throw std::runtime_error("train_stage2: fewer than two compressible demonstrations");

  const int max_n = *std::max_element(config.n_range.begin(), config.n_range.end());

  // The backbone is frozen, so per-record retrieval rankings are fixed for
  // the whole run; compute them once. Each record excludes itself.
  std::vector<std::vector<int>> rankings(pool.ids.size());
  for (std::size_t q = 0; q < pool.ids.size(); ++q) {
    const std::vector<float> qe =
        query_embedding(train[pool.record_index[q]], model, codebook, vocab);
    rankings[q] = rank_pool(pool, qe, static_cast<int>(q), max_n);
  }

  proj.w.set_requires_grad(true);
  proj.b.set_requires_grad(true);
  AdamWConfig opt_cfg;
  opt_cfg.lr = config.lr;
  AdamW opt({{proj.w, "proj.w", 0, -1}, {proj.b, "proj.b", 0, -1}}, opt_cfg);

  TrainResult result;
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  int step = 0;
  Rng shot_rng(Rng::derive(config.seed, "stage2-shots"));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled_indices(
        pool.ids.size(), Rng::derive(config.seed, "stage2-epoch-" + std::to_string(epoch)));
    double epoch_sum = 0.0;
    int epoch_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const int n_shots =
          config.n_range[shot_rng.next_below(config.n_range.size())];

      // Resolve prompts first so the loss normalizer counts only those that
      // fit the context window.
      struct Item {
        PromptPlan plan;
        std::vector<int> slots;
      };
      std::vector<Item> items;
      for (std::size_t k = start; k < end; ++k) {
        const int slot = order[k];
        ++result.total;
        std::vector<int> slots = demo_slots_for(rankings[slot], n_shots);
        PromptPlan plan;
        try {
          plan = demo_plan(train[pool.record_index[slot]], codebook, vocab,
                           model.config().max_context);
        } catch (const std::length_error&) {
          ++result.skipped;
          continue;
        }
        const int rows = static_cast<int>(slots.size()) * config.x;
        if (plan.size() + rows > model.config().max_context) {
          ++result.skipped;
          continue;
        }
        prepend_demo_rows(plan, rows);
        items.push_back({std::move(plan), std::move(slots)});
      }
      if (items.empty()) continue;

      const float inv = 1.0f / static_cast<float>(items.size());
      opt.zero_grad();
      double batch_loss = 0.0;
      for (const Item& item : items) {
        GraphT<float> graph;
        Tensor demo_rows;
        if (!item.slots.empty()) {
          std::vector<float> data;
          data.reserve(item.slots.size() * static_cast<std::size_t>(config.x) * pool.d_f);
          for (int slot : item.slots)
            data.insert(data.end(), pool.raw[slot].begin(), pool.raw[slot].end());
          Tensor raw = Tensor::from_data(
              {static_cast<int>(item.slots.size()) * config.x, pool.d_f}, std::move(data));
          demo_rows = proj.apply(raw);
        }
        Tensor embs =
            model.assemble_embeddings(item.plan, item.slots.empty() ? nullptr : &demo_rows);
        ForwardResultT<float> fwd = model.forward_embeddings(embs, false);
        Tensor loss = scale(
            cross_entropy_masked(fwd.logits, shifted_targets(item.plan), answer_mask(item.plan)),
            inv);
        batch_loss += static_cast<double>(loss.item());
        graph.backward(loss);
      }
      if (!std::isfinite(batch_loss)) abort_diverged("train_stage2", step, batch_loss);
      opt.clip_global_norm(config.grad_clip);
      opt.step();
      result.loss_curve.emplace_back(step, batch_loss);
      epoch_sum += batch_loss;
      ++epoch_batches;
      ++step;
    }
    result.epoch_mean.push_back(epoch_batches > 0 ? epoch_sum / epoch_batches : 0.0);
  }

  proj.w.set_requires_grad(false);
  proj.b.set_requires_grad(false);

  if (result.total > 0) {
    const double frac = static_cast<double>(result.skipped) / result.total;
    if (frac > config.max_skip_fraction) {
      std::ostringstream msg;
      msg << "train_stage2: " << result.skipped << " of " << result.total
          << " prompts exceeded max_context (fraction " << frac << " > "
          << config.max_skip_fraction << ")";
      throw std::runtime_error(msg.str());
    }
  }
  return result;
}

double eval_stage2_loss(const Model& model, const Projection& proj, const Stage2Pool& pool,
                        const std::vector<QARecord>& queries, const Codebook& codebook,
                        const Vocabulary& vocab, int n_shots, int limit) {
  if (queries.empty()) throw std::invalid_argument("eval_stage2_loss: no queries");
  if (n_shots < 0) throw std::invalid_argument("eval_stage2_loss: negative n_shots");
  if (pool.d_f != model.config().hidden_dim)
    throw std::invalid_argument("eval_stage2_loss: pool width does not match the model");
  std::size_t n = queries.size();
  if (limit > 0) n = std::min(n, static_cast<std::size_t>(limit));

  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const QARecord& rec = queries[i];
    int exclude = -1;
    for (std::size_t j = 0; j < pool.ids.size(); ++j)
      if (pool.ids[j] == rec.id) { exclude = static_cast<int>(j); break; }
    const std::vector<float> qe = query_embedding(rec, model, codebook, vocab);
    const std::vector<int> ranked = rank_pool(pool, qe, exclude, n_shots);
    const std::vector<int> slots = demo_slots_for(ranked, n_shots);

    PromptPlan plan;
    try {
      plan = demo_plan(rec, codebook, vocab, model.config().max_context);
    } catch (const std::length_error&) {
      continue;
    }
    const int rows = static_cast<int>(slots.size()) * pool.x;
    if (plan.size() + rows > model.config().max_context) continue;
    prepend_demo_rows(plan, rows);

    Tensor demo_rows;
    if (!slots.empty()) {
      std::vector<float> data;
      data.reserve(slots.size() * static_cast<std::size_t>(pool.x) * pool.d_f);
      for (int slot : slots) data.insert(data.end(), pool.raw[slot].begin(), pool.raw[slot].end());
      Tensor raw = Tensor::from_data({rows, pool.d_f}, std::move(data));
      demo_rows = proj.apply(raw);
    }
    Tensor embs = model.assemble_embeddings(plan, slots.empty() ? nullptr : &demo_rows);
    ForwardResultT<float> fwd = model.forward_embeddings(embs, false);
    sum += static_cast<double>(
        cross_entropy_masked(fwd.logits, shifted_targets(plan), answer_mask(plan)).item());
    ++used;
  }
  if (used == 0) throw std::runtime_error("eval_stage2_loss: every query overflowed max_context");
  return sum / static_cast<double>(used);
}

void write_loss_csv(const TrainResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_loss_csv: cannot open " + path);
  out << "step,loss\n";
  char line[64];
  for (const auto& [step, loss] : result.loss_curve) {
    std::snprintf(line, sizeof line, "%d,%.9g\n", step, loss);
    out << line;
  }
  if (!out) throw std::runtime_error("write_loss_csv: write failed for " + path);
}

}  // namespace pcc
