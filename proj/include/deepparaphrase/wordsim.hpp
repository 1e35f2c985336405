#pragma once

// Pair-wise word similarity matching. The m x n dot-product matrix is scanned
// twice: left to right (rows as channels, sequence along n) and top to bottom
// (the transpose). Channels are zero-padded to a fixed capacity so the filter
// depth does not depend on sentence length; PAD words already contribute zero
// rows, so the padding is indistinguishable from PAD tokens.

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "deepparaphrase/encoder.hpp"
#include "deepparaphrase/ops.hpp"
#include "deepparaphrase/params.hpp"

namespace dpp {

struct WordSimConfig {
  std::size_t sim_filters = 32;
  std::size_t sim_filter_width = 3;
  std::size_t max_len = 64;  // channel capacity; longer sentences are truncated upstream
  bool cosine = false;

  void validate() const {
    if (sim_filters == 0 || sim_filter_width == 0 || max_len == 0) {
      throw ShapeError("wordsim: filter count, width and channel capacity must be positive");
    }
    if (sim_filter_width > max_len) throw ShapeError("wordsim: filter width exceeds channel capacity");
  }
};

struct WordSimParams {
  ConvWeights left_right;  // k_s x max_len x p_s
  ConvWeights top_bottom;

  static WordSimParams init(const WordSimConfig& config, Rng& rng) {
    config.validate();
    const std::size_t k = config.sim_filters, c = config.max_len, p = config.sim_filter_width;
    auto bank = [&] {
      return ConvWeights{Tensor::from({k, c, p}, glorot_uniform(k * c * p, c * p, k * p, rng), true),
                         Tensor::zeros({k}, true)};
    };
    WordSimParams params;
    params.left_right = bank();
    params.top_bottom = bank();
    return params;
  }

  void append_to(NamedParameters& out) const {
    out.emplace_back("wsim.conv_lr.w", left_right.filters);
    out.emplace_back("wsim.conv_lr.b", left_right.bias);
    out.emplace_back("wsim.conv_tb.w", top_bottom.filters);
    out.emplace_back("wsim.conv_tb.b", top_bottom.bias);
  }
};

// values[i][j] = dot(column i of e1, column j of e2). With cosine set, columns
// are unit-normalised first (zero columns stay zero).
inline Tensor similarity_matrix(const Tensor& e1, const Tensor& e2, bool cosine = false) {
  if (cosine) return matmul_tn(normalize_columns(e1), normalize_columns(e2));
  return matmul_tn(e1, e2);
}

namespace detail {

// Appends zero rows so x has exactly `rows` rows.
inline Tensor pad_rows(const Tensor& x, std::size_t rows) {
  require_rank(x, 2, "pad_rows", "input");
  if (x.dim(0) == rows) return x;
  if (x.dim(0) > rows) {
    throw ShapeError("wordsim: " + std::to_string(x.dim(0)) + " channels exceed capacity " + std::to_string(rows));
  }
  std::vector<double> out(rows * x.dim(1), 0.0);
  std::copy(x.values().begin(), x.values().end(), out.begin());
  return make_result({rows, x.dim(1)}, std::move(out), {x}, [](Node& n) {
    Node& p = *n.parents[0];
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += n.grad[i];
  });
}

}  // namespace detail

// Returns [maxpool(relu(F1)); maxpool(relu(F2))], length 2 * sim_filters.
inline Tensor match_features(const Tensor& sim, const WordSimConfig& config, const WordSimParams& params) {
  detail::require_rank(sim, 2, "match_features", "similarity matrix");
  const std::size_t m = sim.dim(0), n = sim.dim(1);
  if (m < config.sim_filter_width || n < config.sim_filter_width) {
    throw ShapeError("match_features: similarity matrix " + shape_string(sim.shape()) + " shorter than filter width " +
                     std::to_string(config.sim_filter_width));
  }
  Tensor along_columns = detail::pad_rows(sim, config.max_len);
  Tensor along_rows = detail::pad_rows(transpose(sim), config.max_len);
  Tensor f1 = relu(conv1d(along_columns, params.left_right.filters, params.left_right.bias));
  Tensor f2 = relu(conv1d(along_rows, params.top_bottom.filters, params.top_bottom.bias));
  return concat({global_max_pool(f1), global_max_pool(f2)});
}

}  // namespace dpp
