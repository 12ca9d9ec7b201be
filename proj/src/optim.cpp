#include "pcc/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace pcc {

template <typename S>
AdamWT<S>::AdamWT(std::vector<ParamRefT<S>> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    if (!p.tensor.requires_grad())
      throw std::invalid_argument("AdamW: param '" + p.name + "' does not require gradients");
    if (p.row_end >= 0) {
      if (p.tensor.rank() != 2)
        throw std::invalid_argument("AdamW: row window on non-matrix param '" + p.name + "'");
      if (p.row_begin < 0 || p.row_end < p.row_begin || p.row_end > p.tensor.dim(0))
        throw std::invalid_argument("AdamW: bad row window on param '" + p.name + "'");
    }
    m_.emplace_back(p.tensor.numel(), S(0));
    v_.emplace_back(p.tensor.numel(), S(0));
  }
}

template <typename S>
std::pair<std::size_t, std::size_t> AdamWT<S>::active_range(const ParamRefT<S>& p) const {
  if (p.row_end < 0) return {0, p.tensor.numel()};
  const std::size_t cols = static_cast<std::size_t>(p.tensor.dim(1));
  return {static_cast<std::size_t>(p.row_begin) * cols,
          static_cast<std::size_t>(p.row_end) * cols};
}

template <typename S>
void AdamWT<S>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename S>
double AdamWT<S>::clip_global_norm(double max_norm) {
  double sq = 0.0;
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    auto g = p.tensor.grad();
    auto [begin, end] = active_range(p);
    for (std::size_t i = begin; i < end; ++i) sq += static_cast<double>(g[i]) * g[i];
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const S scale = static_cast<S>(max_norm / norm);
    for (auto& p : params_) {
      if (!p.tensor.has_grad()) continue;
      auto g = p.tensor.grad_mutable();
      auto [begin, end] = active_range(p);
      for (std::size_t i = begin; i < end; ++i) g[i] *= scale;
    }
  }
  return norm;
}

template <typename S>
void AdamWT<S>::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const S b1 = static_cast<S>(config_.beta1), b2 = static_cast<S>(config_.beta2);
  const S lr = static_cast<S>(config_.lr), eps = static_cast<S>(config_.eps);
  const S wd = static_cast<S>(config_.weight_decay);
  const S inv_bc1 = static_cast<S>(1.0 / bc1), inv_bc2 = static_cast<S>(1.0 / bc2);
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    auto& p = params_[pi];
    auto theta = p.tensor.values();
    auto g = p.tensor.grad_mutable();  // missing grad means zero gradient
    auto [begin, end] = active_range(p);
    std::vector<S>& m = m_[pi];
    std::vector<S>& v = v_[pi];
    for (std::size_t i = begin; i < end; ++i) {
      m[i] = b1 * m[i] + (S(1) - b1) * g[i];
      v[i] = b2 * v[i] + (S(1) - b2) * g[i] * g[i];
      const S mhat = m[i] * inv_bc1;
      const S vhat = v[i] * inv_bc2;
      theta[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * theta[i]);
    }
  }
}

template class AdamWT<float>;
template class AdamWT<double>;

}  // namespace pcc
