#pragma once

// Central finite-difference check of recorded gradients, plus the tiny
// full-model instance used by the `gradcheck` command.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "deepparaphrase/embeddings.hpp"
#include "deepparaphrase/model.hpp"
#include "deepparaphrase/params.hpp"
#include "deepparaphrase/stat_features.hpp"

namespace dpp {

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-4;
// Below this magnitude both gradients count as zero; relative error is
// measured against this floor instead.
inline constexpr double kGradCheckFloor = 1e-8;

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::fabs(analytic), std::fabs(numeric), kGradCheckFloor});
  return std::fabs(analytic - numeric) / scale;
}

struct GradCheckEntry {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
  double grad_norm = 0.0;  // L2 norm of the analytic gradient
};

// loss_fn must rebuild the loss from the current parameter values and be
// deterministic. Parameter values are restored exactly afterwards.
inline std::vector<GradCheckEntry> gradient_check(NamedParameters& params, const std::function<Tensor()>& loss_fn,
                                                  double step = kGradCheckStep) {
  clear_grads(params);
  backward(loss_fn());
  std::vector<GradCheckEntry> out;
  for (auto& [name, param] : params) {
    GradCheckEntry entry{name, param.size(), 0.0};
    std::vector<double> analytic = param.has_grad() ? std::vector<double>(param.grad().begin(), param.grad().end())
                                                    : std::vector<double>(param.size(), 0.0);
    auto values = param.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      double plus = 0.0, minus = 0.0;
      {
        NoGradGuard guard;
        values[i] = original + step;
        plus = loss_fn().item();
        values[i] = original - step;
        minus = loss_fn().item();
      }
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * step);
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic[i], numeric));
      entry.grad_norm += analytic[i] * analytic[i];
    }
    entry.grad_norm = std::sqrt(entry.grad_norm);
    out.push_back(entry);
  }
  clear_grads(params);
  return out;
}

struct GradCheckFixture {
  std::shared_ptr<const Embeddings> embeddings;
  std::shared_ptr<const LexicalSimilarityProvider> provider;
  ModelConfig config;
  SentencePair pair;
};

// Tiny augdeep instance: d=4, k=3, y=5, k_s=2, one hidden layer of 4,
// sentences of 5 and 6 tokens. Every bias is randomised so no ReLU or max
// sits on a tie.
inline GradCheckFixture make_gradcheck_fixture(std::uint64_t seed, DatasetProfile profile = DatasetProfile::msrp,
                                              Ablation ablation = Ablation::augdeep) {
  Rng rng(seed);
  const std::vector<std::string> words{"the", "cat", "sat", "on", "mat", "dog", "ran", "far", "away", "home"};
  std::vector<double> values;
  for (std::size_t i = 0; i < words.size() * 4; ++i) values.push_back(uniform(rng, -1.0, 1.0));
  std::string file;
  for (std::size_t w = 0; w < words.size(); ++w) {
    file += words[w];
    for (std::size_t j = 0; j < 4; ++j) file += ' ' + format_double(values[w * 4 + j]);
    file += '\n';
  }
  std::istringstream in(file);
  auto emb = std::make_shared<Embeddings>(load_pretrained(in, 4, "<gradcheck>"));

  auto provider = std::make_shared<LexicalSimilarityProvider>();
  provider->set_tag("sat", 'V');
  provider->set_tag("ran", 'V');
  provider->set_tag("cat", 'N');
  provider->set_tag("dog", 'N');
  provider->set_tag("mat", 'N');
  provider->set_tag("far", 'A');
  provider->set_score("sat", "ran", 0.4);
  provider->set_score("cat", "dog", 0.7);
  provider->set_score("mat", "mat", 1.0);

  GradCheckFixture fx;
  fx.config.ablation = ablation;
  fx.config.profile = profile;
  fx.config.encoder.filter_widths = {3, 4};
  fx.config.encoder.filters_per_width = 3;
  fx.config.encoder.lstm_hidden = 5;
  fx.config.encoder.embedding_dim = 4;
  fx.config.wordsim.sim_filters = 2;
  fx.config.wordsim.sim_filter_width = 3;
  fx.config.wordsim.max_len = 6;
  fx.config.hidden_layers = {4};
  fx.config.min_len = 5;
  fx.config.dropout = 0.0;
  fx.config.trainable_embeddings = true;
  fx.config.seed = seed;
  fx.embeddings = emb;
  fx.provider = provider;
  fx.pair.tokens1 = {"the", "cat", "sat", "on", "mat"};
  fx.pair.tokens2 = {"the", "dog", "ran", "far", "away", "home"};
  fx.pair.label = 1;
  fx.pair.id = "gradcheck";
  return fx;
}

// Builds the fixture model and randomises its biases. Biases feeding a ReLU
// are drawn positive so every unit stays active and every group carries a
// nonzero gradient.
inline ParaphraseModel make_gradcheck_model(const GradCheckFixture& fx, std::uint64_t seed) {
  ParaphraseModel model(fx.config, fx.embeddings, fx.provider);
  Rng rng(seed ^ 0xB1A5ULL);
  for (auto& [name, t] : model.parameters()) {
    const bool is_bias = name.find(".b") != std::string::npos && t.rank() == 1;
    if (!is_bias) continue;
    const bool feeds_relu = name.rfind("enc.conv", 0) == 0 || name.rfind("wsim", 0) == 0 || name.rfind("clf.hidden", 0) == 0;
    for (double& v : t.mutable_values()) v = feeds_relu ? uniform(rng, 0.5, 1.0) : uniform(rng, -0.5, 0.5);
  }
  IdfTable idf = IdfTable::build({fx.pair.tokens1, fx.pair.tokens2, {"the", "cat"}});
  model.set_idf(std::move(idf));
  return model;
}

inline std::vector<GradCheckEntry> run_model_gradcheck(std::uint64_t seed, DatasetProfile profile = DatasetProfile::msrp,
                                                       Ablation ablation = Ablation::augdeep) {
  GradCheckFixture fx = make_gradcheck_fixture(seed, profile, ablation);
  ParaphraseModel model = make_gradcheck_model(fx, seed);
  auto loss_fn = [&] { return bce_loss(model.forward(fx.pair, Mode::eval), fx.pair.label); };
  return gradient_check(model.parameters(), loss_fn);
}

}  // namespace dpp
