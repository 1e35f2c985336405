#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "deepparaphrase/corpus.hpp"
#include "deepparaphrase/metrics.hpp"
#include "deepparaphrase/model.hpp"
#include "deepparaphrase/optim.hpp"
#include "deepparaphrase/rng.hpp"

namespace dpp {

// Training stream derived from the model seed, kept apart from the
// initialisation stream.
inline constexpr std::uint64_t kTrainStreamSalt = 0x9E3779B97F4A7C15ULL;

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  EvaluationReport dev;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> best_epoch;
};

// Owns the optimizer state and the training RNG of one model. A step runs
// forward/backward over every pair of a batch (loss averaged over the batch),
// applies Adadelta to every parameter and clears the gradients.
class Trainer {
 public:
  explicit Trainer(ParaphraseModel& model) : model_(model), rng_(model.config().seed ^ kTrainStreamSalt) {
    for (const auto& [name, param] : model_.parameters()) {
      states_.push_back(AdadeltaState::for_param(param, model_.config().rho, model_.config().eps));
    }
  }

  ParaphraseModel& model() { return model_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  std::vector<AdadeltaState>& optimizer_states() { return states_; }
  const std::vector<AdadeltaState>& optimizer_states() const { return states_; }
  std::size_t epoch() const { return epoch_; }
  void set_epoch(std::size_t epoch) { epoch_ = epoch; }
  std::size_t steps() const { return steps_; }
  void set_steps(std::size_t steps) { steps_ = steps; }

  // Returns the mean loss over the batch.
  double step(const Corpus& corpus, const Batch& batch) {
    if (batch.empty()) throw std::invalid_argument("trainer: empty batch");
    const double scale_by = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const auto& item : batch) {
      const SentencePair& pair = corpus.pairs.at(item.index);
      Tensor p = model_.forward(pair, Mode::train, &rng_);
      Tensor loss = bce_loss(p, pair.label);
      if (!std::isfinite(loss.item())) {
        clear_grads(model_.parameters());
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch_ + 1) + ", step " +
                           std::to_string(steps_ + 1) + " (pair '" + pair.id + "')");
      }
      total += loss.item();
      backward(scale(loss, scale_by));
    }
    auto& params = model_.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& param = params[i].second;
      if (!param.has_grad()) continue;
      for (double g : param.grad()) {
        if (!std::isfinite(g)) {
          clear_grads(params);
          throw NumericError("non-finite gradient for " + params[i].first + " in epoch " +
                             std::to_string(epoch_ + 1) + ", step " + std::to_string(steps_ + 1));
        }
      }
      adadelta_step(param, states_[i], model_.config().lr);
    }
    clear_grads(params);
    ++steps_;
    return total * scale_by;
  }

  // One pass over the shuffled corpus; returns the mean per-pair loss.
  double run_epoch(const Corpus& corpus) {
    const auto& cfg = model_.config();
    auto batches = pad_and_batch(corpus, cfg.min_len, cfg.batch_size, rng_);
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& batch : batches) {
      total += step(corpus, batch) * static_cast<double>(batch.size());
      count += batch.size();
    }
    ++epoch_;
    return count == 0 ? 0.0 : total / static_cast<double>(count);
  }

 private:
  ParaphraseModel& model_;
  Rng rng_;
  std::vector<AdadeltaState> states_;
  std::size_t epoch_ = 0;
  std::size_t steps_ = 0;
};

inline std::vector<std::vector<double>> snapshot(const NamedParameters& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) out.emplace_back(t.values().begin(), t.values().end());
  return out;
}

inline void restore(NamedParameters& params, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(values[i].begin(), values[i].end(), params[i].second.mutable_values().begin());
  }
}

// Stratified, seeded split of a training corpus into (train, held-out dev).
inline std::pair<Corpus, Corpus> holdout_split(const Corpus& corpus, double fraction, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < corpus.size(); ++i) (corpus.pairs[i].label == 1 ? pos : neg).push_back(i);
  shuffle(pos, rng);
  shuffle(neg, rng);
  std::vector<bool> held(corpus.size(), false);
  for (auto* group : {&pos, &neg}) {
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(group->size())));
    for (std::size_t i = 0; i < take; ++i) held[(*group)[i]] = true;
  }
  Corpus train = corpus, dev = corpus;
  train.pairs.clear();
  dev.pairs.clear();
  dev.split = Split::dev;
  for (std::size_t i = 0; i < corpus.size(); ++i) (held[i] ? dev : train).pairs.push_back(corpus.pairs[i]);
  return {std::move(train), std::move(dev)};
}

inline double selection_score(const EvaluationReport& r, DatasetProfile profile) {
  return profile == DatasetProfile::twitter ? r.f1 : r.accuracy;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains for config.epochs, scoring the dev corpus after every epoch, and
// leaves the model holding the best-scoring parameters (dev F1 for twitter,
// dev accuracy for msrp). Without a dev corpus a stratified holdout is
// carved from the training pairs. The IDF table is rebuilt from the
// training pairs before any step.
inline TrainingHistory train(ParaphraseModel& model, const Corpus& train_corpus, const Corpus* dev_corpus = nullptr,
                             const EpochCallback& on_epoch = {}, Trainer* trainer_out = nullptr) {
  if (train_corpus.empty()) throw std::invalid_argument("train: empty training corpus");
  const ModelConfig& cfg = model.config();
  Corpus train_pairs = train_corpus;
  Corpus held_out;
  if (!dev_corpus) {
    std::tie(train_pairs, held_out) = holdout_split(train_corpus, cfg.holdout_fraction, cfg.seed);
    if (held_out.empty() || train_pairs.empty()) throw std::invalid_argument("train: corpus too small for a holdout split");
    dev_corpus = &held_out;
  }
  model.set_idf(build_idf(train_pairs));
  if (cfg.augment) train_pairs = augment_swap(train_pairs);

  TrainingHistory history;
  if (cfg.epochs == 0) return history;

  std::optional<Trainer> local;
  Trainer& trainer = trainer_out ? *trainer_out : local.emplace(model);
  auto best = snapshot(model.parameters());
  double best_score = -1.0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    EpochRecord record;
    record.train_loss = trainer.run_epoch(train_pairs);
    record.epoch = trainer.epoch();
    record.dev = evaluate(*dev_corpus, model, cfg.threshold);
    const double score = selection_score(record.dev, cfg.profile);
    if (score > best_score) {
      best_score = score;
      best = snapshot(model.parameters());
      history.best_epoch = record.epoch;
    }
    history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  restore(model.parameters(), best);
  return history;
}

struct CurveRow {
  double fraction = 0.0;
  std::size_t train_pairs = 0;
  EvaluationReport dev;
};

// Stratified subsample keeping file order; fraction 1 returns the corpus as is.
inline Corpus stratified_subsample(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("learning curve: fraction must lie in (0,1]");
  if (fraction == 1.0) return corpus;
  Rng rng(seed);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < corpus.size(); ++i) (corpus.pairs[i].label == 1 ? pos : neg).push_back(i);
  shuffle(pos, rng);
  shuffle(neg, rng);
  std::vector<std::size_t> keep;
  for (auto* group : {&pos, &neg}) {
    const auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(group->size())));
    if (take == 0) {
      throw std::invalid_argument("learning curve: fraction " + format_double(fraction) + " leaves a class empty");
    }
    keep.insert(keep.end(), group->begin(), group->begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(keep.begin(), keep.end());
  Corpus out = corpus;
  out.pairs.clear();
  for (std::size_t i : keep) out.pairs.push_back(corpus.pairs[i]);
  return out;
}

using ModelFactory = std::function<ParaphraseModel()>;

// One fresh model per fraction, trained on the subsample and scored on dev.
inline std::vector<CurveRow> learning_curve(const ModelFactory& make_model, const Corpus& train_corpus,
                                            const Corpus& dev_corpus, const std::vector<double>& fractions) {
  std::vector<CurveRow> rows;
  for (double fraction : fractions) {
    ParaphraseModel model = make_model();
    Corpus subset = stratified_subsample(train_corpus, fraction, model.config().seed);
    train(model, subset, &dev_corpus);
    rows.push_back({fraction, subset.size(), evaluate(dev_corpus, model, model.config().threshold)});
  }
  return rows;
}

}  // namespace dpp
