#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "deepparaphrase/tensor.hpp"

namespace dpp {

inline constexpr double kAdadeltaRho = 0.95;
inline constexpr double kAdadeltaEps = 1e-6;

struct AdadeltaState {
  double rho = kAdadeltaRho;
  double eps = kAdadeltaEps;
  std::vector<double> accum_grad_sq;
  std::vector<double> accum_update_sq;

  static AdadeltaState for_param(const Tensor& param, double rho = kAdadeltaRho, double eps = kAdadeltaEps) {
    return {rho, eps, std::vector<double>(param.size(), 0.0), std::vector<double>(param.size(), 0.0)};
  }
};

// One Adadelta update, scaled by lr. The grad slot is left untouched.
//   E[g^2]  <- rho E[g^2] + (1-rho) g^2
//   delta    = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
//   E[dx^2] <- rho E[dx^2] + (1-rho) delta^2
//   param   += lr * delta
inline void adadelta_step(Tensor& param, AdadeltaState& state, double lr) {
  if (!param.has_grad()) throw ShapeError("adadelta_step: parameter has no gradient");
  if (state.accum_grad_sq.size() != param.size() || state.accum_update_sq.size() != param.size()) {
    throw ShapeError("adadelta_step: optimizer state shaped for " + std::to_string(state.accum_grad_sq.size()) +
                     " values, parameter has " + std::to_string(param.size()));
  }
  auto values = param.mutable_values();
  auto grad = param.grad();
  const double rho = state.rho, eps = state.eps;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double g = grad[i];
    double& eg2 = state.accum_grad_sq[i];
    double& edx2 = state.accum_update_sq[i];
    eg2 = rho * eg2 + (1.0 - rho) * g * g;
    const double delta = -std::sqrt(edx2 + eps) / std::sqrt(eg2 + eps) * g;
    edx2 = rho * edx2 + (1.0 - rho) * delta * delta;
    values[i] += lr * delta;
  }
}

}  // namespace dpp
