#pragma once

// Sentence encoder: per filter width conv1d -> ReLU -> halving max-pool, the
// pooled maps joined along the time axis, then an LSTM whose final hidden
// state is the sentence vector.
//
//   d x m  --conv(p)-->  k x (m-p+1)  --pool-->  k x ceil((m-p+1)/2)
//   concat over widths: k x T, T = sum_p ceil((m-p+1)/2)  --LSTM-->  y

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "deepparaphrase/lstm.hpp"
#include "deepparaphrase/ops.hpp"
#include "deepparaphrase/params.hpp"
#include "deepparaphrase/rng.hpp"

namespace dpp {

struct EncoderConfig {
  std::vector<std::size_t> filter_widths{3, 4};
  std::size_t filters_per_width = 64;
  std::size_t lstm_hidden = 128;
  double dropout_rate = 0.2;
  std::size_t embedding_dim = 200;
  bool absolute_difference = false;

  std::size_t max_filter_width() const {
    return filter_widths.empty() ? 0 : *std::max_element(filter_widths.begin(), filter_widths.end());
  }

  void validate() const {
    if (filter_widths.empty()) throw ShapeError("encoder: at least one filter width required");
    for (std::size_t w : filter_widths) {
      if (w == 0) throw ShapeError("encoder: filter widths must be positive");
    }
    if (filters_per_width == 0 || lstm_hidden == 0 || embedding_dim == 0) {
      throw ShapeError("encoder: filter count, hidden size and embedding dimension must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ShapeError("encoder: dropout rate must lie in [0,1)");
  }

  // Length of the feature sequence the LSTM sees for an m-token sentence.
  std::size_t sequence_length(std::size_t tokens) const {
    std::size_t total = 0;
    for (std::size_t p : filter_widths) total += (tokens - p + 2) / 2;
    return total;
  }
};

struct ConvWeights {
  Tensor filters;  // k x d x p
  Tensor bias;     // k
};

struct EncoderParams {
  std::vector<ConvWeights> conv;  // parallel to EncoderConfig::filter_widths
  LstmWeights lstm;

  static EncoderParams init(const EncoderConfig& config, Rng& rng) {
    config.validate();
    EncoderParams params;
    const std::size_t k = config.filters_per_width, d = config.embedding_dim;
    for (std::size_t p : config.filter_widths) {
      params.conv.push_back({Tensor::from({k, d, p}, glorot_uniform(k * d * p, d * p, k * p, rng), true),
                             Tensor::zeros({k}, true)});
    }
    params.lstm = LstmWeights::glorot(k, config.lstm_hidden, rng);
    return params;
  }

  void append_to(NamedParameters& out, const EncoderConfig& config) const {
    for (std::size_t i = 0; i < conv.size(); ++i) {
      const std::string width = std::to_string(config.filter_widths[i]);
      out.emplace_back("enc.conv.w" + width, conv[i].filters);
      out.emplace_back("enc.conv.b" + width, conv[i].bias);
    }
    const std::pair<const char*, const GateWeights*> gates[] = {
        {"i", &lstm.input_gate}, {"f", &lstm.forget_gate}, {"o", &lstm.output_gate}, {"c", &lstm.candidate}};
    for (const auto& [suffix, gate] : gates) {
      out.emplace_back(std::string("enc.lstm.W") + suffix, gate->input_weights);
      out.emplace_back(std::string("enc.lstm.U") + suffix, gate->recurrent_weights);
      out.emplace_back(std::string("enc.lstm.b") + suffix, gate->bias);
    }
  }
};

// Returns the sentence vector (length lstm_hidden) for a d x m embedding matrix.
inline Tensor encode_sentence(const Tensor& embeddings, const EncoderConfig& config, const EncoderParams& params,
                              Mode mode, std::uint64_t dropout_seed = 0) {
  detail::require_rank(embeddings, 2, "encode_sentence", "embeddings");
  if (embeddings.dim(0) != config.embedding_dim) {
    throw ShapeError("encode_sentence: embedding rows " + std::to_string(embeddings.dim(0)) + " != configured " +
                     std::to_string(config.embedding_dim));
  }
  const std::size_t m = embeddings.dim(1);
  if (m < config.max_filter_width()) {
    throw ShapeError("encode_sentence: sentence of " + std::to_string(m) + " tokens is shorter than filter width " +
                     std::to_string(config.max_filter_width()) + "; pad before encoding");
  }
  if (params.conv.size() != config.filter_widths.size()) {
    throw ShapeError("encode_sentence: parameters hold " + std::to_string(params.conv.size()) +
                     " filter banks, config names " + std::to_string(config.filter_widths.size()));
  }
  std::vector<Tensor> pooled;
  for (std::size_t i = 0; i < params.conv.size(); ++i) {
    Tensor map = relu(conv1d(embeddings, params.conv[i].filters, params.conv[i].bias));
    pooled.push_back(halving_max_pool(map));
  }
  Tensor features = concat_columns(pooled);
  if (features.dim(1) != config.sequence_length(m)) throw ShapeError("encode_sentence: feature sequence length drifted");
  features = dropout(features, config.dropout_rate, mode, dropout_seed);
  Tensor h = lstm_forward(features, params.lstm, config.lstm_hidden);
  return h;
}

// Elementwise v1 - v2, or |v1 - v2| when absolute is set.
inline Tensor pair_difference(const Tensor& v1, const Tensor& v2, bool absolute = false) {
  if (v1.shape() != v2.shape()) {
    throw ShapeError("pair_difference: length mismatch " + shape_string(v1.shape()) + " vs " + shape_string(v2.shape()));
  }
  Tensor diff = sub(v1, v2);
  return absolute ? abs(diff) : diff;
}

}  // namespace dpp
