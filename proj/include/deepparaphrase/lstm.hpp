#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "deepparaphrase/ops.hpp"

namespace dpp {

// One gate's affine map: W (hidden x input), U (hidden x hidden), b (hidden).
struct GateWeights {
  Tensor input_weights;
  Tensor recurrent_weights;
  Tensor bias;
};

struct LstmWeights {
  GateWeights input_gate;
  GateWeights forget_gate;
  GateWeights output_gate;
  GateWeights candidate;

  static LstmWeights zeros(std::size_t input_size, std::size_t hidden, bool requires_grad = true) {
    auto gate = [&] {
      return GateWeights{Tensor::zeros({hidden, input_size}, requires_grad), Tensor::zeros({hidden, hidden}, requires_grad),
                         Tensor::zeros({hidden}, requires_grad)};
    };
    return {gate(), gate(), gate(), gate()};
  }

  static LstmWeights glorot(std::size_t input_size, std::size_t hidden, Rng& rng) {
    auto gate = [&] {
      return GateWeights{
          Tensor::from({hidden, input_size}, glorot_uniform(hidden * input_size, input_size, hidden, rng), true),
          Tensor::from({hidden, hidden}, glorot_uniform(hidden * hidden, hidden, hidden, rng), true),
          Tensor::zeros({hidden}, true)};
    };
    LstmWeights w;
    w.input_gate = gate();
    w.forget_gate = gate();
    w.output_gate = gate();
    w.candidate = gate();
    return w;
  }

  std::size_t hidden_size() const { return input_gate.bias.dim(0); }
  std::size_t input_size() const { return input_gate.input_weights.dim(1); }
};

namespace detail {

inline void check_gate(const GateWeights& g, std::size_t input_size, std::size_t hidden, const char* name) {
  auto fail = [&](const Tensor& t, const char* what) {
    throw ShapeError(std::string("lstm: ") + name + "." + what + " has shape " +
                     (t.defined() ? shape_string(t.shape()) : std::string("undefined")) + ", expected hidden " +
                     std::to_string(hidden) + ", input " + std::to_string(input_size));
  };
  if (!g.input_weights.defined() || g.input_weights.shape() != Shape{hidden, input_size}) fail(g.input_weights, "W");
  if (!g.recurrent_weights.defined() || g.recurrent_weights.shape() != Shape{hidden, hidden}) fail(g.recurrent_weights, "U");
  if (!g.bias.defined() || g.bias.shape() != Shape{hidden}) fail(g.bias, "b");
}

inline Tensor gate_preactivation(const GateWeights& g, const Tensor& x, const Tensor& h) {
  return add(add(matvec(g.input_weights, x), matvec(g.recurrent_weights, h)), g.bias);
}

}  // namespace detail

// Runs the LSTM from h0 = c0 = 0 over the sequence and returns the final
// hidden state. The recorded graph keeps every intermediate state.
inline Tensor lstm_forward(const std::vector<Tensor>& inputs, const LstmWeights& weights, std::size_t hidden_size) {
  if (inputs.empty()) throw ShapeError("lstm: empty input sequence");
  const std::size_t input_size = inputs.front().size();
  detail::check_gate(weights.input_gate, input_size, hidden_size, "input_gate");
  detail::check_gate(weights.forget_gate, input_size, hidden_size, "forget_gate");
  detail::check_gate(weights.output_gate, input_size, hidden_size, "output_gate");
  detail::check_gate(weights.candidate, input_size, hidden_size, "candidate");

  Tensor h = Tensor::zeros({hidden_size});
  Tensor c = Tensor::zeros({hidden_size});
  for (const Tensor& x : inputs) {
    if (x.rank() != 1 || x.size() != input_size) {
      throw ShapeError("lstm: step input " + shape_string(x.shape()) + " differs from input size " +
                       std::to_string(input_size));
    }
    Tensor i = sigmoid(detail::gate_preactivation(weights.input_gate, x, h));
    Tensor f = sigmoid(detail::gate_preactivation(weights.forget_gate, x, h));
    Tensor o = sigmoid(detail::gate_preactivation(weights.output_gate, x, h));
    Tensor candidate = tanh(detail::gate_preactivation(weights.candidate, x, h));
    c = add(mul(i, candidate), mul(f, c));
    h = mul(o, tanh(c));
  }
  return h;
}

// Convenience overload: the columns of a k x T map are the time steps.
inline Tensor lstm_forward(const Tensor& sequence, const LstmWeights& weights, std::size_t hidden_size) {
  detail::require_rank(sequence, 2, "lstm", "sequence");
  std::vector<Tensor> steps;
  steps.reserve(sequence.dim(1));
  for (std::size_t t = 0; t < sequence.dim(1); ++t) steps.push_back(column(sequence, t));
  return lstm_forward(steps, weights, hidden_size);
}

}  // namespace dpp
