#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "deepparaphrase/ops.hpp"

namespace dpp::test {

inline std::string data_path(const std::string& file) { return std::string(DPP_TEST_DATA_DIR) + "/" + file; }

// Max relative error between recorded gradients of `inputs` and central
// differences of f. f must rebuild its result from the inputs' current values.
inline double max_fd_error(std::vector<Tensor> inputs, const std::function<Tensor()>& f, double step = 1e-5) {
  for (auto& t : inputs) t.clear_grad();
  backward(f());
  double worst = 0.0;
  for (auto& t : inputs) {
    std::vector<double> analytic(t.size(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    auto v = t.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double x = v[i];
      v[i] = x + step;
      const double up = f().item();
      v[i] = x - step;
      const double down = f().item();
      v[i] = x;
      const double numeric = (up - down) / (2 * step);
      const double denom = std::max({std::fabs(numeric), std::fabs(analytic[i]), 1e-8});
      worst = std::max(worst, std::fabs(numeric - analytic[i]) / denom);
    }
    t.clear_grad();
  }
  return worst;
}

// Weighted sum with fixed pseudo-random weights, so every output element
// contributes a distinct gradient.
inline Tensor probe(const Tensor& t) {
  std::vector<double> w(t.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(1.7 * static_cast<double>(i) + 0.3);
  return sum(mul(t, Tensor::from(t.shape(), w)));
}

}  // namespace dpp::test
