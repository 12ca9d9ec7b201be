#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcc/tensor.hpp"

namespace pcc {

// One trainable tensor. For rank-2 params a row window can restrict the
// update (used to train a slice of the embedding table while the rest stays
// frozen); row_end = -1 means all rows.
template <typename S>
struct ParamRefT {
  TensorT<S> tensor;
  std::string name;
  int row_begin = 0;
  int row_end = -1;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with decoupled weight decay and bias correction:
//   m = b1*m + (1-b1)*g         v = b2*v + (1-b2)*g^2
//   theta -= lr * (mhat / (sqrt(vhat) + eps) + wd * theta)
template <typename S>
class AdamWT {
public:
  AdamWT(std::vector<ParamRefT<S>> params, AdamWConfig config);

  void zero_grad();
  // Scales active gradients so their global L2 norm is at most max_norm;
  // returns the norm before clipping.
  double clip_global_norm(double max_norm);
  void step();

  std::int64_t steps() const { return t_; }
  const std::vector<ParamRefT<S>>& params() const { return params_; }

private:
  // Element window [begin, end) covered by the row restriction.
  std::pair<std::size_t, std::size_t> active_range(const ParamRefT<S>& p) const;

  std::vector<ParamRefT<S>> params_;
  AdamWConfig config_;
  std::vector<std::vector<S>> m_, v_;
  std::int64_t t_ = 0;
};

using AdamW = AdamWT<float>;

}  // namespace pcc
