#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcc/dataset.hpp"
#include "pcc/model.hpp"

namespace pcc {

// The only trainable parameters of stage 2: one linear map over hidden rows.
template <typename S>
struct ProjectionT {
  TensorT<S> w;  // [d_f x d_f]
  TensorT<S> b;  // [d_f]

  // Identity plus small noise, bias zero; starts near the raw hidden space.
  static ProjectionT identity_with_noise(int d_f, Rng& rng, double noise = 0.01);
  TensorT<S> apply(const TensorT<S>& rows) const;  // rows [n x d_f]
  int d_f() const { return w.dim(0); }
};

using Projection = ProjectionT<float>;

ProjectionT<double> widen_projection(const Projection& proj);

// Per-residue elementwise sum of sequence and structure embeddings.
template <typename S>
TensorT<S> joint_fuse(const TensorT<S>& e_s, const TensorT<S>& e_x);

// A whole demonstration folded into x projected hidden vectors plus a
// projection-independent retrieval key.
struct CompressedDemo {
  std::string id;
  std::vector<float> vectors;  // [x * d_f], projected
  std::vector<float> key;      // [d_f], mean of the raw (pre-projection) rows
  std::uint32_t question_len = 0;
  std::uint32_t protein_len = 0;  // residues
  std::uint32_t answer_len = 0;   // answer tokens incl. <EOS>
};

struct DemoBank {
  int x = 0;
  int d_f = 0;
  std::uint64_t checkpoint_hash = 0;
  std::uint64_t dataset_hash = 0;
  std::vector<CompressedDemo> demos;

  const CompressedDemo* find(const std::string& id) const;
  void save(const std::string& path) const;
  static DemoBank load(const std::string& path);
};

// Joint-layout plan of a full demonstration: question, fused protein span,
// question again, answer, <EOS>.
PromptPlan demo_plan(const QARecord& record, const Codebook& codebook, const Vocabulary& vocab,
                     int max_context);

// Raw final-layer hidden rows [T-x, T) of one forward pass over the
// assembled demonstration, before projection.
struct RawCompression {
  std::vector<float> vectors;  // [x * d_f]
  std::vector<float> key;      // [d_f]
  std::uint32_t question_len = 0, protein_len = 0, answer_len = 0;
};

RawCompression compress_raw(const QARecord& record, const Model& model, const Codebook& codebook,
                            const Vocabulary& vocab, int x);

CompressedDemo self_compress(const QARecord& record, const Model& model, const Projection& proj,
                             const Codebook& codebook, const Vocabulary& vocab, int x);

struct BankBuildResult {
  DemoBank bank;
  std::vector<std::pair<std::string, std::string>> skipped;  // (id, reason)
};

BankBuildResult build_demo_bank(const std::vector<QARecord>& records, const Model& model,
                                const Projection& proj, const Codebook& codebook,
                                const Vocabulary& vocab, int x);

// Row-wise concatenation of the selected demos' vectors, in the given order.
Tensor concat_demos(const std::vector<const CompressedDemo*>& demos, int x, int d_f);

}  // namespace pcc
