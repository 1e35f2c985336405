#pragma once

#include <string>
#include <utility>
#include <vector>

#include "deepparaphrase/errors.hpp"
#include "deepparaphrase/tensor.hpp"

namespace dpp {

// Trainable arrays in a stable, checkpoint-visible order.
using NamedParameters = std::vector<std::pair<std::string, Tensor>>;

inline const Tensor& find_parameter(const NamedParameters& params, const std::string& name) {
  for (const auto& [n, t] : params) {
    if (n == name) return t;
  }
  throw ShapeError("no parameter named '" + name + "'");
}

inline void clear_grads(NamedParameters& params) {
  for (auto& [name, t] : params) t.clear_grad();
}

}  // namespace dpp
