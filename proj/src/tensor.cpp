#include "pcc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pcc {

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream ss;
  ss << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) ss << " x ";
    ss << shape[i];
  }
  ss << "]";
  return ss.str();
}

static std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

// ---- GraphT -------------------------------------------------------------

template <typename S>
thread_local GraphT<S>* GraphT<S>::current_ = nullptr;

template <typename S>
GraphT<S>::GraphT() : previous_(current_) {
  current_ = this;
}

template <typename S>
GraphT<S>::~GraphT() {
  current_ = previous_;
}

template <typename S>
void GraphT<S>::backward(const TensorT<S>& loss) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  if (consumed_)
    throw std::runtime_error("backward: graph already consumed; build a new graph");
  if (!loss.requires_grad())
    throw std::invalid_argument("backward: loss was not produced by a recorded graph");
  consumed_ = true;
  loss.node()->ensure_grad()[0] = S(1);
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    NodeT<S>& node = **it;
    if (node.grad && node.backward) node.backward(node);
  }
}

// ---- TensorT ------------------------------------------------------------

template <typename S>
TensorT<S> TensorT<S>::zeros(std::vector<int> shape, bool requires_grad) {
  auto node = std::make_shared<NodeT<S>>();
  node->data.assign(shape_numel(shape), S(0));
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return TensorT(std::move(node));
}

template <typename S>
TensorT<S> TensorT<S>::full(std::vector<int> shape, S value, bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  std::fill(t.values().begin(), t.values().end(), value);
  return t;
}

template <typename S>
TensorT<S> TensorT<S>::from_data(std::vector<int> shape, std::vector<S> data,
                                 bool requires_grad) {
  if (shape_numel(shape) != data.size())
    throw std::invalid_argument("from_data: shape " + shape_str(shape) + " expects " +
                                std::to_string(shape_numel(shape)) + " values, got " +
                                std::to_string(data.size()));
  auto node = std::make_shared<NodeT<S>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return TensorT(std::move(node));
}

template <typename S>
TensorT<S> TensorT<S>::randn(std::vector<int> shape, Rng& rng, double stddev,
                             bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  for (S& v : t.values()) v = static_cast<S>(rng.next_normal(0.0, stddev));
  return t;
}

template <typename S>
S TensorT<S>::item() const {
  if (numel() != 1)
    throw std::invalid_argument("item: tensor is not scalar, shape " + shape_str(shape()));
  return node_->data[0];
}

template <typename S>
std::span<const S> TensorT<S>::grad() const {
  if (!node_->grad)
    throw std::runtime_error("grad: gradient not computed (no backward reached this tensor)");
  return *node_->grad;
}

template <typename S>
void TensorT<S>::zero_grad() {
  if (node_->grad) std::fill(node_->grad->begin(), node_->grad->end(), S(0));
}

template <typename S>
bool TensorT<S>::all_finite() const {
  for (S v : node_->data)
    if (!std::isfinite(v)) return false;
  return true;
}

template <typename S>
TensorT<S> TensorT<S>::detached_copy() const {
  auto node = std::make_shared<NodeT<S>>();
  node->shape = node_->shape;
  node->data = node_->data;
  return TensorT(std::move(node));
}

// ---- op plumbing --------------------------------------------------------

template <typename S>
static TensorT<S> finish_op(std::vector<int> shape, std::vector<S> data,
                            std::initializer_list<TensorT<S>> parents,
                            std::function<void(NodeT<S>&)> make_backward) {
  auto node = std::make_shared<NodeT<S>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  auto* graph = GraphT<S>::current();
  bool track = false;
  if (graph)
    for (const auto& p : parents)
      if (p.requires_grad()) track = true;
  if (track) {
    node->requires_grad = true;
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(make_backward);
    graph->record(node);
  }
  return TensorT<S>(std::move(node));
}

template <typename S>
static void check_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

template <typename S>
static void check_rank(const TensorT<S>& t, int rank, const char* op) {
  if (t.rank() != rank)
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                " tensor, got shape " + shape_str(t.shape()));
}

// ---- elementwise --------------------------------------------------------

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  check_same_shape(a, b, "add");
  std::vector<S> out(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return finish_op<S>(a.shape(), std::move(out), {a, b}, [](NodeT<S>& o) {
    const std::vector<S>& g = *o.grad;
    for (int p = 0; p < 2; ++p) {
      NodeT<S>& parent = *o.parents[static_cast<std::size_t>(p)];
      if (!parent.requires_grad) continue;
      std::vector<S>& pg = parent.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
    }
  });
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  check_same_shape(a, b, "sub");
  std::vector<S> out(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return finish_op<S>(a.shape(), std::move(out), {a, b}, [](NodeT<S>& o) {
    const std::vector<S>& g = *o.grad;
    NodeT<S>& pa = *o.parents[0];
    NodeT<S>& pb = *o.parents[1];
    if (pa.requires_grad) {
      std::vector<S>& pg = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
    }
    if (pb.requires_grad) {
      std::vector<S>& pg = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] -= g[i];
    }
  });
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  check_same_shape(a, b, "mul");
  std::vector<S> out(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return finish_op<S>(a.shape(), std::move(out), {a, b}, [](NodeT<S>& o) {
    const std::vector<S>& g = *o.grad;
    NodeT<S>& pa = *o.parents[0];
    NodeT<S>& pb = *o.parents[1];
    if (pa.requires_grad) {
      std::vector<S>& pg = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      std::vector<S>& pg = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * pa.data[i];
    }
  });
}

template <typename S>
TensorT<S> scale(const TensorT<S>& a, S factor) {
  std::vector<S> out(a.numel());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return finish_op<S>(a.shape(), std::move(out), {a}, [factor](NodeT<S>& o) {
    NodeT<S>& pa = *o.parents[0];
    if (!pa.requires_grad) return;
    const std::vector<S>& g = *o.grad;
    std::vector<S>& pg = pa.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * factor;
  });
}

template <typename S>
TensorT<S> add_row_broadcast(const TensorT<S>& a, const TensorT<S>& bias) {
  check_rank(a, 2, "add_row_broadcast");
  check_rank(bias, 1, "add_row_broadcast");
  const int rows = a.dim(0), cols = a.dim(1);
  if (bias.dim(0) != cols)
    throw std::invalid_argument("add_row_broadcast: bias length " + std::to_string(bias.dim(0)) +
                                " does not match columns of " + shape_str(a.shape()));
  std::vector<S> out(a.numel());
  auto av = a.values(), bv = bias.values();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out[static_cast<std::size_t>(r) * cols + c] = av[static_cast<std::size_t>(r) * cols + c] + bv[static_cast<std::size_t>(c)];
  return finish_op<S>(a.shape(), std::move(out), {a, bias}, [rows, cols](NodeT<S>& o) {
    const std::vector<S>& g = *o.grad;
    NodeT<S>& pa = *o.parents[0];
    NodeT<S>& pbias = *o.parents[1];
    if (pa.requires_grad) {
      std::vector<S>& pg = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
    }
    if (pbias.requires_grad) {
      std::vector<S>& pg = pbias.ensure_grad();
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) pg[static_cast<std::size_t>(c)] += g[static_cast<std::size_t>(r) * cols + c];
    }
  });
}

// ---- matmul kernels -----------------------------------------------------

template <typename S>
void mm_acc(const S* a, const S* b, S* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<std::size_t>(i) * k;
    S* crow = c + static_cast<std::size_t>(i) * n;
    for (int t = 0; t < k; ++t) {
      const S av = arow[t];
      const S* brow = b + static_cast<std::size_t>(t) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename S>
void mm_bt_acc(const S* a, const S* b, S* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<std::size_t>(i) * k;
    S* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const S* brow = b + static_cast<std::size_t>(j) * k;
      S dot = S(0);
      for (int t = 0; t < k; ++t) dot += arow[t] * brow[t];
      crow[j] += dot;
    }
  }
}

template <typename S>
void mm_at_acc(const S* a, const S* b, S* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<std::size_t>(i) * k;
    const S* brow = b + static_cast<std::size_t>(i) * n;
    for (int t = 0; t < k; ++t) {
      const S av = arow[t];
      S* crow = c + static_cast<std::size_t>(t) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  check_rank(a, 2, "matmul");
  check_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<S> out(static_cast<std::size_t>(m) * n, S(0));
  mm_acc(a.values().data(), b.values().data(), out.data(), m, k, n);
  return finish_op<S>({m, n}, std::move(out), {a, b}, [m, k, n](NodeT<S>& o) {
    NodeT<S>& pa = *o.parents[0];
    NodeT<S>& pb = *o.parents[1];
    const S* g = o.grad->data();
    if (pa.requires_grad) mm_bt_acc(g, pb.data.data(), pa.ensure_grad().data(), m, n, k);
    if (pb.requires_grad) mm_at_acc(pa.data.data(), g, pb.ensure_grad().data(), m, k, n);
  });
}

template <typename S>
TensorT<S> matmul_bt(const TensorT<S>& a, const TensorT<S>& b) {
  check_rank(a, 2, "matmul_bt");
  check_rank(b, 2, "matmul_bt");
  if (a.dim(1) != b.dim(1))
    throw std::invalid_argument("matmul_bt: inner dimensions disagree: " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()) + " transposed");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
  std::vector<S> out(static_cast<std::size_t>(m) * n, S(0));
  mm_bt_acc(a.values().data(), b.values().data(), out.data(), m, k, n);
  return finish_op<S>({m, n}, std::move(out), {a, b}, [m, k, n](NodeT<S>& o) {
    NodeT<S>& pa = *o.parents[0];
    NodeT<S>& pb = *o.parents[1];
    const S* g = o.grad->data();
    if (pa.requires_grad) mm_acc(g, pb.data.data(), pa.ensure_grad().data(), m, n, k);
    if (pb.requires_grad) mm_at_acc(g, pa.data.data(), pb.ensure_grad().data(), m, n, k);
  });
}

// ---- nonlinearities -----------------------------------------------------

template <typename S>
TensorT<S> gelu(const TensorT<S>& a) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  std::vector<S> out(a.numel());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = static_cast<double>(av[i]);
    out[i] = static_cast<S>(0.5 * x * (1.0 + std::erf(x * inv_sqrt2)));
  }
  return finish_op<S>(a.shape(), std::move(out), {a}, [](NodeT<S>& o) {
    NodeT<S>& pa = *o.parents[0];
    if (!pa.requires_grad) return;
    const std::vector<S>& g = *o.grad;
    std::vector<S>& pg = pa.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = static_cast<double>(pa.data[i]);
      const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
      pg[i] += g[i] * static_cast<S>(cdf + x * pdf);
    }
  });
}

template <typename S>
TensorT<S> softmax(const TensorT<S>& a, int axis) {
  if (a.rank() != 1 && a.rank() != 2)
    throw std::invalid_argument("softmax: expected rank 1 or 2, got " + shape_str(a.shape()));
  if (a.rank() == 1 && axis != 0)
    throw std::invalid_argument("softmax: axis must be 0 for rank-1 input");
  if (a.rank() == 2 && axis != 0 && axis != 1)
    throw std::invalid_argument("softmax: axis must be 0 or 1 for rank-2 input");

  // A "line" is one slice along the softmax axis.
  const int len = (a.rank() == 1) ? a.dim(0) : a.dim(axis);
  const int lines = (a.rank() == 1) ? 1 : a.dim(1 - axis);
  const std::size_t stride = (a.rank() == 2 && axis == 0) ? static_cast<std::size_t>(a.dim(1)) : 1;
  const std::size_t line_stride = (a.rank() == 2 && axis == 0) ? 1 : static_cast<std::size_t>(len);

  std::vector<S> out(a.numel());
  auto av = a.values();
  for (int l = 0; l < lines; ++l) {
    const std::size_t base = static_cast<std::size_t>(l) * line_stride;
    S max_v = av[base];
    for (int i = 1; i < len; ++i) max_v = std::max(max_v, av[base + i * stride]);
    S sum = S(0);
    for (int i = 0; i < len; ++i) {
      const S e = std::exp(av[base + i * stride] - max_v);
      out[base + i * stride] = e;
      sum += e;
    }
    const S inv = S(1) / sum;
    for (int i = 0; i < len; ++i) out[base + i * stride] *= inv;
  }
  return finish_op<S>(a.shape(), std::move(out),
                      {a}, [len, lines, stride, line_stride](NodeT<S>& o) {
    NodeT<S>& pa = *o.parents[0];
    if (!pa.requires_grad) return;
    const std::vector<S>& g = *o.grad;
    const std::vector<S>& y = o.data;
    std::vector<S>& pg = pa.ensure_grad();
    for (int l = 0; l < lines; ++l) {
      const std::size_t base = static_cast<std::size_t>(l) * line_stride;
      S dot = S(0);
      for (int i = 0; i < len; ++i) dot += g[base + i * stride] * y[base + i * stride];
      for (int i = 0; i < len; ++i) {
        const std::size_t idx = base + i * stride;
        pg[idx] += y[idx] * (g[idx] - dot);
      }
    }
  });
}

template <typename S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gain, const TensorT<S>& bias,
                      S eps) {
  check_rank(x, 2, "layer_norm");
  check_rank(gain, 1, "layer_norm");
  check_rank(bias, 1, "layer_norm");
  const int rows = x.dim(0), cols = x.dim(1);
  if (gain.dim(0) != cols || bias.dim(0) != cols)
    throw std::invalid_argument("layer_norm: gain/bias length must equal last dimension " +
                                std::to_string(cols));
  auto xv = x.values();
  auto gv = gain.values();
  auto bv = bias.values();
  std::vector<S> out(x.numel());
  auto normalized = std::make_shared<std::vector<S>>(x.numel());
  auto inv_std = std::make_shared<std::vector<S>>(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * cols;
    S mean = S(0);
    for (int c = 0; c < cols; ++c) mean += xv[base + c];
    mean /= static_cast<S>(cols);
    S var = S(0);
    for (int c = 0; c < cols; ++c) {
      const S d = xv[base + c] - mean;
      var += d * d;
    }
    var /= static_cast<S>(cols);
    const S inv = S(1) / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(r)] = inv;
    for (int c = 0; c < cols; ++c) {
      const S n = (xv[base + c] - mean) * inv;
      (*normalized)[base + c] = n;
      out[base + c] = gv[static_cast<std::size_t>(c)] * n + bv[static_cast<std::size_t>(c)];
    }
  }
  return finish_op<S>(x.shape(), std::move(out), {x, gain, bias},
                      [rows, cols, normalized, inv_std](NodeT<S>& o) {
    NodeT<S>& px = *o.parents[0];
    NodeT<S>& pgain = *o.parents[1];
    NodeT<S>& pbias = *o.parents[2];
    const std::vector<S>& g = *o.grad;
    for (int r = 0; r < rows; ++r) {
      const std::size_t base = static_cast<std::size_t>(r) * cols;
      if (pgain.requires_grad) {
        std::vector<S>& pg = pgain.ensure_grad();
        for (int c = 0; c < cols; ++c) pg[static_cast<std::size_t>(c)] += g[base + c] * (*normalized)[base + c];
      }
      if (pbias.requires_grad) {
        std::vector<S>& pg = pbias.ensure_grad();
        for (int c = 0; c < cols; ++c) pg[static_cast<std::size_t>(c)] += g[base + c];
      }
      if (px.requires_grad) {
        std::vector<S>& pg = px.ensure_grad();
        S mean_gn = S(0), mean_gn_n = S(0);
        for (int c = 0; c < cols; ++c) {
          const S gn = g[base + c] * pgain.data[static_cast<std::size_t>(c)];
          mean_gn += gn;
          mean_gn_n += gn * (*normalized)[base + c];
        }
        mean_gn /= static_cast<S>(cols);
        mean_gn_n /= static_cast<S>(cols);
        const S inv = (*inv_std)[static_cast<std::size_t>(r)];
        for (int c = 0; c < cols; ++c) {
          const S gn = g[base + c] * pgain.data[static_cast<std::size_t>(c)];
          pg[base + c] += inv * (gn - mean_gn - (*normalized)[base + c] * mean_gn_n);
        }
      }
    }
  });
}

template <typename S>
TensorT<S> cross_entropy_masked(const TensorT<S>& logits, const std::vector<int>& targets,
                                const Mask& loss_mask) {
  check_rank(logits, 2, "cross_entropy_masked");
  const int rows = logits.dim(0), vocab = logits.dim(1);
  if (targets.size() != static_cast<std::size_t>(rows) ||
      loss_mask.size() != static_cast<std::size_t>(rows))
    throw std::invalid_argument("cross_entropy_masked: lengths disagree (logits rows " +
                                std::to_string(rows) + ", targets " +
                                std::to_string(targets.size()) + ", mask " +
                                std::to_string(loss_mask.size()) + ")");
  auto supervised = std::make_shared<std::vector<int>>();
  for (int r = 0; r < rows; ++r)
    if (loss_mask[static_cast<std::size_t>(r)]) supervised->push_back(r);
  if (supervised->empty())
    throw std::invalid_argument("cross_entropy_masked: empty supervision (all positions masked)");

  const std::size_t count = supervised->size();
  auto probs = std::make_shared<std::vector<S>>(count * static_cast<std::size_t>(vocab));
  auto lv = logits.values();
  S total = S(0);
  for (std::size_t s = 0; s < count; ++s) {
    const int r = (*supervised)[s];
    const int target = targets[static_cast<std::size_t>(r)];
    if (target < 0 || target >= vocab)
      throw std::invalid_argument("cross_entropy_masked: target id " + std::to_string(target) +
                                  " out of range at position " + std::to_string(r));
    const std::size_t base = static_cast<std::size_t>(r) * vocab;
    S max_v = lv[base];
    for (int c = 1; c < vocab; ++c) max_v = std::max(max_v, lv[base + c]);
    S sum = S(0);
    for (int c = 0; c < vocab; ++c) {
      const S e = std::exp(lv[base + c] - max_v);
      (*probs)[s * vocab + c] = e;
      sum += e;
    }
    const S inv = S(1) / sum;
    for (int c = 0; c < vocab; ++c) (*probs)[s * vocab + c] *= inv;
    total += -(lv[base + target] - max_v - std::log(sum));
  }
  total /= static_cast<S>(count);
  return finish_op<S>({1}, {total}, {logits},
                      [vocab, supervised, probs, targets](NodeT<S>& o) {
    NodeT<S>& pl = *o.parents[0];
    if (!pl.requires_grad) return;
    const S g = (*o.grad)[0] / static_cast<S>(supervised->size());
    std::vector<S>& pg = pl.ensure_grad();
    for (std::size_t s = 0; s < supervised->size(); ++s) {
      const int r = (*supervised)[s];
      const std::size_t base = static_cast<std::size_t>(r) * vocab;
      for (int c = 0; c < vocab; ++c) pg[base + c] += g * (*probs)[s * vocab + c];
      pg[base + targets[static_cast<std::size_t>(r)]] -= g;
    }
  });
}

// ---- slicing / concatenation -------------------------------------------

template <typename S>
TensorT<S> slice_rows(const TensorT<S>& a, int start, int count) {
  check_rank(a, 2, "slice_rows");
  const int rows = a.dim(0), cols = a.dim(1);
  if (start < 0 || count < 0 || start + count > rows)
    throw std::invalid_argument("slice_rows: range [" + std::to_string(start) + ", " +
                                std::to_string(start + count) + ") outside " +
                                shape_str(a.shape()));
  std::vector<S> out(static_cast<std::size_t>(count) * cols);
  auto av = a.values();
  std::copy_n(av.begin() + static_cast<std::size_t>(start) * cols, out.size(), out.begin());
  return finish_op<S>({count, cols}, std::move(out), {a}, [start, cols](NodeT<S>& o) {
    NodeT<S>& pa = *o.parents[0];
    if (!pa.requires_grad) return;
    const std::vector<S>& g = *o.grad;
    std::vector<S>& pg = pa.ensure_grad();
    const std::size_t offset = static_cast<std::size_t>(start) * cols;
    for (std::size_t i = 0; i < g.size(); ++i) pg[offset + i] += g[i];
  });
}

template <typename S>
TensorT<S> slice_cols(const TensorT<S>& a, int start, int count) {
  check_rank(a, 2, "slice_cols");
  const int rows = a.dim(0), cols = a.dim(1);
  if (start < 0 || count < 0 || start + count > cols)
    throw std::invalid_argument("slice_cols: range [" + std::to_string(start) + ", " +
                                std::to_string(start + count) + ") outside " +
                                shape_str(a.shape()));
  std::vector<S> out(static_cast<std::size_t>(rows) * count);
  auto av = a.values();
  for (int r = 0; r < rows; ++r)
    std::copy_n(av.begin() + static_cast<std::size_t>(r) * cols + start, count,
                out.begin() + static_cast<std::size_t>(r) * count);
  return finish_op<S>({rows, count}, std::move(out), {a}, [rows, cols, start, count](NodeT<S>& o) {
    NodeT<S>& pa = *o.parents[0];
    if (!pa.requires_grad) return;
    const std::vector<S>& g = *o.grad;
    std::vector<S>& pg = pa.ensure_grad();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < count; ++c)
        pg[static_cast<std::size_t>(r) * cols + start + c] += g[static_cast<std::size_t>(r) * count + c];
  });
}

template <typename S>
TensorT<S> concat_rows(std::span<const TensorT<S>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const int cols = parts[0].dim(1);
  int rows = 0;
  for (const auto& p : parts) {
    check_rank(p, 2, "concat_rows");
    if (p.dim(1) != cols)
      throw std::invalid_argument("concat_rows: column mismatch " + shape_str(p.shape()) +
                                  " vs " + std::to_string(cols) + " columns");
    rows += p.dim(0);
  }
  std::vector<S> out;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());

  auto node = std::make_shared<NodeT<S>>();
  node->shape = {rows, cols};
  node->data = std::move(out);
  auto* graph = GraphT<S>::current();
  bool track = false;
  if (graph)
    for (const auto& p : parts)
      if (p.requires_grad()) track = true;
  if (track) {
    node->requires_grad = true;
    for (const auto& p : parts) node->parents.push_back(p.node());
    node->backward = [](NodeT<S>& o) {
      const std::vector<S>& g = *o.grad;
      std::size_t offset = 0;
      for (auto& parent : o.parents) {
        const std::size_t n = parent->numel();
        if (parent->requires_grad) {
          std::vector<S>& pg = parent->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) pg[i] += g[offset + i];
        }
        offset += n;
      }
    };
    graph->record(node);
  }
  return TensorT<S>(std::move(node));
}

template <typename S>
TensorT<S> concat_cols(std::span<const TensorT<S>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int rows = parts[0].dim(0);
  int cols = 0;
  for (const auto& p : parts) {
    check_rank(p, 2, "concat_cols");
    if (p.dim(0) != rows)
      throw std::invalid_argument("concat_cols: row mismatch " + shape_str(p.shape()) + " vs " +
                                  std::to_string(rows) + " rows");
    cols += p.dim(1);
  }
  std::vector<S> out(static_cast<std::size_t>(rows) * cols);
  std::size_t col_offset = 0;
  for (const auto& p : parts) {
    const int pc = p.dim(1);
    auto pv = p.values();
    for (int r = 0; r < rows; ++r)
      std::copy_n(pv.begin() + static_cast<std::size_t>(r) * pc, pc,
                  out.begin() + static_cast<std::size_t>(r) * cols + col_offset);
    col_offset += static_cast<std::size_t>(pc);
  }

  auto node = std::make_shared<NodeT<S>>();
  node->shape = {rows, cols};
  node->data = std::move(out);
  auto* graph = GraphT<S>::current();
  bool track = false;
  if (graph)
    for (const auto& p : parts)
      if (p.requires_grad()) track = true;
  if (track) {
    node->requires_grad = true;
    for (const auto& p : parts) node->parents.push_back(p.node());
    node->backward = [rows, cols](NodeT<S>& o) {
      const std::vector<S>& g = *o.grad;
      std::size_t col_offset2 = 0;
      for (auto& parent : o.parents) {
        const int pc = parent->shape[1];
        if (parent->requires_grad) {
          std::vector<S>& pg = parent->ensure_grad();
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < pc; ++c)
              pg[static_cast<std::size_t>(r) * pc + c] +=
                  g[static_cast<std::size_t>(r) * cols + col_offset2 + c];
        }
        col_offset2 += static_cast<std::size_t>(pc);
      }
    };
    graph->record(node);
  }
  return TensorT<S>(std::move(node));
}

template <typename S>
TensorT<S> embedding_rows(const TensorT<S>& table, const std::vector<int>& ids) {
  check_rank(table, 2, "embedding_rows");
  const int vocab = table.dim(0), cols = table.dim(1);
  const int rows = static_cast<int>(ids.size());
  std::vector<S> out(static_cast<std::size_t>(rows) * cols);
  auto tv = table.values();
  for (int r = 0; r < rows; ++r) {
    const int id = ids[static_cast<std::size_t>(r)];
    if (id < 0 || id >= vocab)
      throw std::invalid_argument("embedding_rows: id " + std::to_string(id) +
                                  " out of range [0, " + std::to_string(vocab) +
                                  ") at position " + std::to_string(r));
    std::copy_n(tv.begin() + static_cast<std::size_t>(id) * cols, cols,
                out.begin() + static_cast<std::size_t>(r) * cols);
  }
  auto ids_copy = std::make_shared<std::vector<int>>(ids);
  return finish_op<S>({rows, cols}, std::move(out), {table}, [cols, ids_copy](NodeT<S>& o) {
    NodeT<S>& pt = *o.parents[0];
    if (!pt.requires_grad) return;
    const std::vector<S>& g = *o.grad;
    std::vector<S>& pg = pt.ensure_grad();
    for (std::size_t r = 0; r < ids_copy->size(); ++r) {
      const std::size_t dst = static_cast<std::size_t>((*ids_copy)[r]) * cols;
      const std::size_t src = r * cols;
      for (int c = 0; c < cols; ++c) pg[dst + c] += g[src + c];
    }
  });
}

template <typename S>
TensorT<S> sum_all(const TensorT<S>& a) {
  S total = S(0);
  for (S v : a.values()) total += v;
  return finish_op<S>({1}, {total}, {a}, [](NodeT<S>& o) {
    NodeT<S>& pa = *o.parents[0];
    if (!pa.requires_grad) return;
    const S g = (*o.grad)[0];
    std::vector<S>& pg = pa.ensure_grad();
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g;
  });
}

template <typename S>
std::vector<S> mean_rows(const TensorT<S>& a) {
  if (a.rank() != 2) throw std::invalid_argument("mean_rows: expected rank-2 tensor");
  const int rows = a.dim(0), cols = a.dim(1);
  if (rows == 0) throw std::invalid_argument("mean_rows: empty tensor");
  std::vector<S> out(static_cast<std::size_t>(cols), S(0));
  auto av = a.values();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out[static_cast<std::size_t>(c)] += av[static_cast<std::size_t>(r) * cols + c];
  for (S& v : out) v /= static_cast<S>(rows);
  return out;
}

// ---- explicit instantiations --------------------------------------------

#define PCC_INSTANTIATE_TENSOR(S)                                                           \
  template class GraphT<S>;                                                                 \
  template class TensorT<S>;                                                                \
  template TensorT<S> add<S>(const TensorT<S>&, const TensorT<S>&);                         \
  template TensorT<S> sub<S>(const TensorT<S>&, const TensorT<S>&);                         \
  template TensorT<S> mul<S>(const TensorT<S>&, const TensorT<S>&);                         \
  template TensorT<S> scale<S>(const TensorT<S>&, S);                                       \
  template TensorT<S> add_row_broadcast<S>(const TensorT<S>&, const TensorT<S>&);           \
  template TensorT<S> matmul<S>(const TensorT<S>&, const TensorT<S>&);                      \
  template TensorT<S> matmul_bt<S>(const TensorT<S>&, const TensorT<S>&);                   \
  template TensorT<S> gelu<S>(const TensorT<S>&);                                           \
  template TensorT<S> softmax<S>(const TensorT<S>&, int);                                   \
  template TensorT<S> layer_norm<S>(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&, S); \
  template TensorT<S> cross_entropy_masked<S>(const TensorT<S>&, const std::vector<int>&,   \
                                              const Mask&);                                 \
  template TensorT<S> slice_rows<S>(const TensorT<S>&, int, int);                           \
  template TensorT<S> slice_cols<S>(const TensorT<S>&, int, int);                           \
  template TensorT<S> concat_rows<S>(std::span<const TensorT<S>>);                          \
  template TensorT<S> concat_cols<S>(std::span<const TensorT<S>>);                          \
  template TensorT<S> embedding_rows<S>(const TensorT<S>&, const std::vector<int>&);        \
  template TensorT<S> sum_all<S>(const TensorT<S>&);                                        \
  template std::vector<S> mean_rows<S>(const TensorT<S>&);                                  \
  template void mm_acc<S>(const S*, const S*, S*, int, int, int);                           \
  template void mm_bt_acc<S>(const S*, const S*, S*, int, int, int);                        \
  template void mm_at_acc<S>(const S*, const S*, S*, int, int, int);

PCC_INSTANTIATE_TENSOR(float)
PCC_INSTANTIATE_TENSOR(double)

#undef PCC_INSTANTIATE_TENSOR

}  // namespace pcc
