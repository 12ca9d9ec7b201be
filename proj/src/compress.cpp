#include "pcc/compress.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "pcc/io_util.hpp"

namespace pcc {

template <typename S>
ProjectionT<S> ProjectionT<S>::identity_with_noise(int d_f, Rng& rng, double noise) {
  ProjectionT<S> proj;
  proj.w = TensorT<S>::randn({d_f, d_f}, rng, noise);
  for (int i = 0; i < d_f; ++i) proj.w.at(i, i) += S(1);
  proj.b = TensorT<S>::zeros({d_f});
  return proj;
}

template <typename S>
TensorT<S> ProjectionT<S>::apply(const TensorT<S>& rows) const {
  return add_row_broadcast(matmul(rows, w), b);
}

ProjectionT<double> widen_projection(const Projection& proj) {
  ProjectionT<double> wide;
  wide.w = Tensor64::from_data(proj.w.shape(),
                               std::vector<double>(proj.w.values().begin(), proj.w.values().end()));
  wide.b = Tensor64::from_data(proj.b.shape(),
                               std::vector<double>(proj.b.values().begin(), proj.b.values().end()));
  wide.w.set_requires_grad(proj.w.requires_grad());
  wide.b.set_requires_grad(proj.b.requires_grad());
  return wide;
}

template <typename S>
TensorT<S> joint_fuse(const TensorT<S>& e_s, const TensorT<S>& e_x) {
  if (e_s.shape() != e_x.shape())
    throw std::invalid_argument("joint_fuse: residue alignment broken, " +
                                shape_str(e_s.shape()) + " vs " + shape_str(e_x.shape()));
  return add(e_s, e_x);
}

const CompressedDemo* DemoBank::find(const std::string& id) const {
  for (const auto& demo : demos)
    if (demo.id == id) return &demo;
  return nullptr;
}

PromptPlan demo_plan(const QARecord& record, const Codebook& codebook, const Vocabulary& vocab,
                     int max_context) {
  const std::vector<int> question = vocab.encode_text(record.question);
  const EncodedProtein enc = encode_protein(to_protein_record(record), codebook, vocab);
  std::vector<int> answer = vocab.encode_text(record.answer);
  answer.push_back(kEosId);
  return assemble_prompt(question, enc.t_s, enc.t_x, PromptLayout::Joint, answer, max_context);
}

RawCompression compress_raw(const QARecord& record, const Model& model, const Codebook& codebook,
                            const Vocabulary& vocab, int x) {
  const PromptPlan plan = demo_plan(record, codebook, vocab, model.config().max_context);
  const int t = plan.size();
  if (x < 1 || x > t)
    throw std::invalid_argument("compress_raw: x = " + std::to_string(x) +
                                " outside [1, " + std::to_string(t) +
                                "] for demo '" + record.id + "'");
  const Tensor embs = model.assemble_embeddings(plan, nullptr);
  const ForwardResultT<float> fwd = model.forward_embeddings(embs, false);

  const int d = model.config().hidden_dim;
  RawCompression raw;
  raw.question_len = static_cast<std::uint32_t>(plan.text_before.size());
  raw.protein_len = static_cast<std::uint32_t>(record.sequence.size());
  raw.answer_len = static_cast<std::uint32_t>(plan.answer.size());
  raw.vectors.resize(static_cast<std::size_t>(x) * d);
  auto hv = fwd.hidden.values();
  std::copy_n(hv.begin() + static_cast<std::size_t>(t - x) * d, raw.vectors.size(),
              raw.vectors.begin());
  raw.key.assign(static_cast<std::size_t>(d), 0.0f);
  for (int r = 0; r < x; ++r)
    for (int c = 0; c < d; ++c) raw.key[static_cast<std::size_t>(c)] += raw.vectors[static_cast<std::size_t>(r) * d + c];
  for (float& v : raw.key) v /= static_cast<float>(x);
  return raw;
}

CompressedDemo self_compress(const QARecord& record, const Model& model, const Projection& proj,
                             const Codebook& codebook, const Vocabulary& vocab, int x) {
  const RawCompression raw = compress_raw(record, model, codebook, vocab, x);
  const int d = model.config().hidden_dim;
  if (proj.d_f() != d)
    throw std::invalid_argument("self_compress: projection dim " + std::to_string(proj.d_f()) +
                                " != hidden dim " + std::to_string(d));
  CompressedDemo demo;
  demo.id = record.id;
  demo.key = raw.key;
  demo.question_len = raw.question_len;
  demo.protein_len = raw.protein_len;
  demo.answer_len = raw.answer_len;
  Tensor raw_rows = Tensor::from_data({x, d}, std::vector<float>(raw.vectors));
  Tensor projected = proj.apply(raw_rows);
  demo.vectors.assign(projected.values().begin(), projected.values().end());
  return demo;
}

BankBuildResult build_demo_bank(const std::vector<QARecord>& records, const Model& model,
                                const Projection& proj, const Codebook& codebook,
                                const Vocabulary& vocab, int x) {
  BankBuildResult result;
  result.bank.x = x;
  result.bank.d_f = model.config().hidden_dim;
  for (const auto& record : records) {
    try {
      result.bank.demos.push_back(self_compress(record, model, proj, codebook, vocab, x));
    } catch (const std::length_error& e) {
      result.skipped.emplace_back(record.id, e.what());
    } catch (const std::invalid_argument& e) {
      result.skipped.emplace_back(record.id, e.what());
    }
  }
  return result;
}

Tensor concat_demos(const std::vector<const CompressedDemo*>& demos, int x, int d_f) {
  std::vector<float> data;
  data.reserve(demos.size() * static_cast<std::size_t>(x) * d_f);
  for (const CompressedDemo* demo : demos) {
    if (!demo) throw std::invalid_argument("concat_demos: null demo");
    if (demo->vectors.size() != static_cast<std::size_t>(x) * d_f)
      throw std::invalid_argument("concat_demos: demo '" + demo->id + "' holds " +
                                  std::to_string(demo->vectors.size()) + " values, expected x=" +
                                  std::to_string(x) + " rows of " + std::to_string(d_f));
    data.insert(data.end(), demo->vectors.begin(), demo->vectors.end());
  }
  return Tensor::from_data({static_cast<int>(demos.size()) * x, d_f}, std::move(data));
}

// ---- bank container -----------------------------------------------------

static constexpr char kBankMagic[4] = {'P', 'C', 'C', 'B'};

void DemoBank::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kBankMagic, 4);
  write_u32(out, static_cast<std::uint32_t>(x));
  write_u32(out, static_cast<std::uint32_t>(demos.size()));
  write_u32(out, static_cast<std::uint32_t>(d_f));
  write_u64(out, checkpoint_hash);
  write_u64(out, dataset_hash);
  for (const auto& demo : demos) {
    write_string(out, demo.id);
    write_f32_span(out, demo.vectors);
    write_f32_span(out, demo.key);
    write_u32(out, demo.question_len);
    write_u32(out, demo.protein_len);
    write_u32(out, demo.answer_len);
  }
  if (!out) throw std::runtime_error("write failure on " + path);
}

DemoBank DemoBank::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kBankMagic, 4) != 0)
    throw std::runtime_error(path + ": not a demo-bank file (bad magic)");
  DemoBank bank;
  bank.x = static_cast<int>(read_u32(in));
  const std::uint32_t count = read_u32(in);
  bank.d_f = static_cast<int>(read_u32(in));
  bank.checkpoint_hash = read_u64(in);
  bank.dataset_hash = read_u64(in);
  bank.demos.resize(count);
  for (auto& demo : bank.demos) {
    demo.id = read_string(in);
    demo.vectors.resize(static_cast<std::size_t>(bank.x) * bank.d_f);
    read_f32_span(in, demo.vectors);
    demo.key.resize(static_cast<std::size_t>(bank.d_f));
    read_f32_span(in, demo.key);
    demo.question_len = read_u32(in);
    demo.protein_len = read_u32(in);
    demo.answer_len = read_u32(in);
  }
  return bank;
}

template struct ProjectionT<float>;
template struct ProjectionT<double>;
template Tensor joint_fuse<float>(const Tensor&, const Tensor&);
template Tensor64 joint_fuse<double>(const Tensor64&, const Tensor64&);

}  // namespace pcc
