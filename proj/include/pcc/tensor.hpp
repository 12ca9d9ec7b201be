#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcc/rng.hpp"

namespace pcc {

// Dense row-major tensor with reverse-mode autodiff. Float is the working
// precision; the same code is instantiated for double so gradients can be
// checked against finite differences at 64 bit.
//
// Recording model: while a GraphT<S> is alive on the current thread, every op
// whose inputs require gradients appends a node to its tape. backward() seeds
// the loss gradient and replays the tape in reverse construction order, which
// is a valid topological order because inputs always predate their consumers.
// With no active graph, ops are plain value computations (the inference path).

using Mask = std::vector<uint8_t>;  // 1 = position participates

template <typename S> class TensorT;

template <typename S>
struct NodeT {
  std::vector<int> shape;
  std::vector<S> data;
  std::optional<std::vector<S>> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<NodeT<S>>> parents;
  std::function<void(NodeT<S>&)> backward;

  std::size_t numel() const { return data.size(); }
  std::vector<S>& ensure_grad() {
    if (!grad) grad.emplace(data.size(), S(0));
    return *grad;
  }
};

template <typename S>
class GraphT {
public:
  GraphT();
  ~GraphT();
  GraphT(const GraphT&) = delete;
  GraphT& operator=(const GraphT&) = delete;

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. The loss must
  // be a recorded scalar; a second call on the same graph throws.
  void backward(const TensorT<S>& loss);

  void record(std::shared_ptr<NodeT<S>> node) { tape_.push_back(std::move(node)); }
  std::size_t size() const { return tape_.size(); }

  static GraphT* current() { return current_; }

private:
  std::vector<std::shared_ptr<NodeT<S>>> tape_;
  bool consumed_ = false;
  GraphT* previous_ = nullptr;
  static thread_local GraphT* current_;
};

template <typename S>
class TensorT {
public:
  TensorT() : node_(std::make_shared<NodeT<S>>()) {}
  explicit TensorT(std::shared_ptr<NodeT<S>> node) : node_(std::move(node)) {}

  static TensorT zeros(std::vector<int> shape, bool requires_grad = false);
  static TensorT full(std::vector<int> shape, S value, bool requires_grad = false);
  static TensorT from_data(std::vector<int> shape, std::vector<S> data,
                           bool requires_grad = false);
  static TensorT scalar(S value) { return from_data({1}, {value}); }
  static TensorT randn(std::vector<int> shape, Rng& rng, double stddev,
                       bool requires_grad = false);

  const std::vector<int>& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return node_->data.size(); }

  std::span<S> values() { return node_->data; }
  std::span<const S> values() const { return node_->data; }
  S item() const;
  S& at(int i) { return node_->data[static_cast<std::size_t>(i)]; }
  S at(int i) const { return node_->data[static_cast<std::size_t>(i)]; }
  S& at(int r, int c) { return node_->data[static_cast<std::size_t>(r) * dim(1) + c]; }
  S at(int r, int c) const { return node_->data[static_cast<std::size_t>(r) * dim(1) + c]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  bool has_grad() const { return node_->grad.has_value(); }
  std::span<const S> grad() const;
  std::span<S> grad_mutable() { return node_->ensure_grad(); }
  void zero_grad();

  bool all_finite() const;
  TensorT detached_copy() const;  // same values, no graph, no grad flag

  std::shared_ptr<NodeT<S>> node() const { return node_; }

private:
  std::shared_ptr<NodeT<S>> node_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

std::string shape_str(const std::vector<int>& shape);

// ---- differentiable ops ------------------------------------------------

template <typename S> TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b);
template <typename S> TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b);
template <typename S> TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b);
template <typename S> TensorT<S> scale(const TensorT<S>& a, S factor);

// a: [rows x cols], bias: [cols]; adds bias to every row.
template <typename S> TensorT<S> add_row_broadcast(const TensorT<S>& a, const TensorT<S>& bias);

template <typename S> TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b);
// a: [m x k], b: [n x k]; returns a * b^T. Used for logits (weight tying) and
// attention scores, avoiding materialized transposes.
template <typename S> TensorT<S> matmul_bt(const TensorT<S>& a, const TensorT<S>& b);

template <typename S> TensorT<S> gelu(const TensorT<S>& a);

// axis 0 = down columns, 1 = along rows (rank 1 tensors use axis 0).
template <typename S> TensorT<S> softmax(const TensorT<S>& a, int axis);

template <typename S> TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gain,
                                            const TensorT<S>& bias, S eps);

// Mean negative log-likelihood over positions with loss_mask set. logits is
// [T x V]; targets and loss_mask have length T.
template <typename S> TensorT<S> cross_entropy_masked(const TensorT<S>& logits,
                                                      const std::vector<int>& targets,
                                                      const Mask& loss_mask);

template <typename S> TensorT<S> slice_rows(const TensorT<S>& a, int start, int count);
template <typename S> TensorT<S> slice_cols(const TensorT<S>& a, int start, int count);
template <typename S> TensorT<S> concat_rows(std::span<const TensorT<S>> parts);
template <typename S> TensorT<S> concat_cols(std::span<const TensorT<S>> parts);

// Gathers table rows by id; backward scatter-adds into the table.
template <typename S> TensorT<S> embedding_rows(const TensorT<S>& table,
                                                const std::vector<int>& ids);

template <typename S> TensorT<S> sum_all(const TensorT<S>& a);

// ---- non-differentiating helpers ---------------------------------------

template <typename S> std::vector<S> mean_rows(const TensorT<S>& a);  // [cols]-sized mean

// Raw accumulating matmul kernels (also used by the optimizer-free paths).
template <typename S> void mm_acc(const S* a, const S* b, S* c, int m, int k, int n);
template <typename S> void mm_bt_acc(const S* a, const S* b, S* c, int m, int k, int n);
template <typename S> void mm_at_acc(const S* a, const S* b, S* c, int m, int k, int n);

}  // namespace pcc
