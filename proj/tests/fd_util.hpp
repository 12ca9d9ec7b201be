#pragma once

// Shared finite-difference oracle for gradient tests: central differences in
// double precision against whatever the reverse pass recorded.

#include "pcc/rng.hpp"
#include "pcc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace pcc_test {

// loss_fn must rebuild the scalar loss from the leaves' current values on
// every call. Returns the worst relative error (unit-floored denominator).
inline double max_rel_err(std::vector<pcc::Tensor64> leaves,
                          const std::function<pcc::Tensor64()>& loss_fn,
                          double h = 1e-6) {
  for (auto& leaf : leaves) {
    leaf.set_requires_grad(true);
    leaf.zero_grad();  // leaves are often reused across successive checks
  }
  std::vector<std::vector<double>> analytic;
  {
    pcc::GraphT<double> graph;
    pcc::Tensor64 loss = loss_fn();
    graph.backward(loss);
    for (auto& leaf : leaves) {
      if (leaf.has_grad()) {
        auto g = leaf.grad();
        analytic.emplace_back(g.begin(), g.end());
      } else {
        analytic.emplace_back(leaf.numel(), 0.0);
      }
    }
  }
  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto vals = leaves[li].values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + h;
      const double up = loss_fn().item();
      vals[i] = keep - h;
      const double down = loss_fn().item();
      vals[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[li][i];
      const double err =
          std::fabs(fd - an) / std::max({1.0, std::fabs(fd), std::fabs(an)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

inline pcc::Tensor64 random_tensor(std::vector<int> shape, pcc::Rng& rng) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  std::vector<double> data(n);
  for (double& v : data) v = rng.next_double() * 2.0 - 1.0;
  return pcc::Tensor64::from_data(std::move(shape), std::move(data));
}

}  // namespace pcc_test
