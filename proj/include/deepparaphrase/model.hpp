#pragma once

// The paraphrase classifier: ablation-selected feature groups concatenated
// and fed through ReLU dense layers to a single sigmoid unit.
//
//   sentmod   encoder difference vector            y
//   pairwise  word-similarity match features       2 k_s
//   deep      both                                 y + 2 k_s
//   augdeep   both + statistical features          y + 2 k_s + 7 (twitter) / 12 (msrp)

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "deepparaphrase/corpus.hpp"
#include "deepparaphrase/embeddings.hpp"
#include "deepparaphrase/encoder.hpp"
#include "deepparaphrase/metrics.hpp"
#include "deepparaphrase/ops.hpp"
#include "deepparaphrase/optim.hpp"
#include "deepparaphrase/params.hpp"
#include "deepparaphrase/stat_features.hpp"
#include "deepparaphrase/wordsim.hpp"

namespace dpp {

enum class Ablation { sentmod, pairwise, deep, augdeep };

inline const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::sentmod: return "sentmod";
    case Ablation::pairwise: return "pairwise";
    case Ablation::deep: return "deep";
    case Ablation::augdeep: return "augdeep";
  }
  return "?";
}

inline const char* to_string(DatasetProfile p) { return p == DatasetProfile::twitter ? "twitter" : "msrp"; }

inline Ablation parse_ablation(std::string_view s) {
  if (s == "sentmod") return Ablation::sentmod;
  if (s == "pairwise") return Ablation::pairwise;
  if (s == "deep") return Ablation::deep;
  if (s == "augdeep") return Ablation::augdeep;
  throw std::invalid_argument("unknown ablation '" + std::string(s) + "' (sentmod|pairwise|deep|augdeep)");
}

inline DatasetProfile parse_profile(std::string_view s) {
  if (s == "twitter") return DatasetProfile::twitter;
  if (s == "msrp") return DatasetProfile::msrp;
  throw std::invalid_argument("unknown dataset '" + std::string(s) + "' (twitter|msrp)");
}

struct ModelConfig {
  Ablation ablation = Ablation::augdeep;
  DatasetProfile profile = DatasetProfile::twitter;
  EncoderConfig encoder;
  WordSimConfig wordsim;
  std::vector<std::size_t> hidden_layers{64};
  double lr = 0.70;
  double dropout = 0.2;  // CNN output and every hidden layer
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  bool augment = false;
  std::size_t min_len = 5;
  double threshold = 0.5;
  bool trainable_embeddings = false;
  double rho = kAdadeltaRho;
  double eps = kAdadeltaEps;
  double holdout_fraction = 0.1;  // dev split carved from train when no dev corpus is given

  // Learning rate and dropout tuned per dataset; everything else shared.
  static ModelConfig for_profile(DatasetProfile profile) {
    ModelConfig c;
    c.profile = profile;
    if (profile == DatasetProfile::msrp) {
      c.lr = 0.9;
      c.dropout = 0.5;
      c.encoder.embedding_dim = 300;
    } else {
      c.lr = 0.70;
      c.dropout = 0.2;
      c.encoder.embedding_dim = 200;
    }
    return c;
  }

  bool uses_encoder() const { return ablation != Ablation::pairwise; }
  bool uses_wordsim() const { return ablation != Ablation::sentmod; }
  bool uses_stats() const { return ablation == Ablation::augdeep; }

  std::size_t feature_size() const {
    std::size_t n = 0;
    if (uses_encoder()) n += encoder.lstm_hidden;
    if (uses_wordsim()) n += 2 * wordsim.sim_filters;
    if (uses_stats()) n += stat_feature_count(profile);
    return n;
  }

  EncoderConfig encoder_config() const {
    EncoderConfig e = encoder;
    e.dropout_rate = dropout;
    return e;
  }

  void validate() const {
    encoder_config().validate();
    wordsim.validate();
    if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("config: dropout must lie in [0,1)");
    if (batch_size == 0) throw std::invalid_argument("config: batch_size must be positive");
    for (std::size_t h : hidden_layers) {
      if (h == 0) throw std::invalid_argument("config: hidden layer widths must be positive");
    }
    const std::size_t widest = std::max(encoder.max_filter_width(), wordsim.sim_filter_width);
    if (min_len < widest) {
      throw std::invalid_argument("config: min_len " + std::to_string(min_len) + " is below the widest filter " +
                                  std::to_string(widest));
    }
    if (wordsim.max_len < min_len) throw std::invalid_argument("config: max_len must be at least min_len");
    if (!(rho > 0.0 && rho < 1.0) || !(eps > 0.0)) throw std::invalid_argument("config: bad Adadelta constants");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
      throw std::invalid_argument("config: holdout_fraction must lie in (0,1)");
    }
  }
};

namespace detail {

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

inline std::size_t parse_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw std::invalid_argument("config: " + std::string(key) + " expects a non-negative integer, got '" +
                                std::string(v) + "'");
  }
  return out;
}

inline double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  if (!parse_double(v, out)) {
    throw std::invalid_argument("config: " + std::string(key) + " expects a number, got '" + std::string(v) + "'");
  }
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: " + std::string(key) + " expects true/false, got '" + std::string(v) + "'");
}

inline std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  if (v.empty()) return out;
  for (auto field : split_fields(v, ',')) out.push_back(parse_size(key, trim(field)));
  return out;
}

}  // namespace detail

// Applies one key=value setting. Unknown keys and malformed values throw.
inline void apply_setting(ModelConfig& c, std::string_view key, std::string_view value) {
  using namespace detail;
  if (key == "ablation") c.ablation = parse_ablation(value);
  else if (key == "dataset") c.profile = parse_profile(value);
  else if (key == "filter_widths") c.encoder.filter_widths = parse_sizes(key, value);
  else if (key == "filters") c.encoder.filters_per_width = parse_size(key, value);
  else if (key == "lstm_hidden") c.encoder.lstm_hidden = parse_size(key, value);
  else if (key == "embedding_dim") c.encoder.embedding_dim = parse_size(key, value);
  else if (key == "abs_difference") c.encoder.absolute_difference = parse_bool(key, value);
  else if (key == "sim_filters") c.wordsim.sim_filters = parse_size(key, value);
  else if (key == "sim_width") c.wordsim.sim_filter_width = parse_size(key, value);
  else if (key == "max_len") c.wordsim.max_len = parse_size(key, value);
  else if (key == "sim_cosine") c.wordsim.cosine = parse_bool(key, value);
  else if (key == "hidden") c.hidden_layers = parse_sizes(key, value);
  else if (key == "lr") c.lr = parse_real(key, value);
  else if (key == "dropout") c.dropout = parse_real(key, value);
  else if (key == "epochs") c.epochs = parse_size(key, value);
  else if (key == "batch_size") c.batch_size = parse_size(key, value);
  else if (key == "seed") c.seed = parse_size(key, value);
  else if (key == "augment") c.augment = parse_bool(key, value);
  else if (key == "min_len") c.min_len = parse_size(key, value);
  else if (key == "threshold") c.threshold = parse_real(key, value);
  else if (key == "trainable_embeddings") c.trainable_embeddings = parse_bool(key, value);
  else if (key == "rho") c.rho = parse_real(key, value);
  else if (key == "eps") c.eps = parse_real(key, value);
  else if (key == "holdout_fraction") c.holdout_fraction = parse_real(key, value);
  else throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
}

// Reads key=value lines; blank lines and '#' comments are skipped.
inline void apply_settings(ModelConfig& c, std::istream& in, const std::string& name = "<config>") {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto eq = view.find('=');
    if (eq == std::string_view::npos) throw DataError(name, line_no, "expected key=value");
    try {
      apply_setting(c, detail::trim(view.substr(0, eq)), detail::trim(view.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw DataError(name, line_no, e.what());
    }
  }
}

inline std::string to_settings(const ModelConfig& c) {
  std::ostringstream os;
  os << "ablation=" << to_string(c.ablation) << '\n'
     << "dataset=" << to_string(c.profile) << '\n'
     << "filter_widths=" << detail::join_sizes(c.encoder.filter_widths) << '\n'
     << "filters=" << c.encoder.filters_per_width << '\n'
     << "lstm_hidden=" << c.encoder.lstm_hidden << '\n'
     << "embedding_dim=" << c.encoder.embedding_dim << '\n'
     << "abs_difference=" << (c.encoder.absolute_difference ? "true" : "false") << '\n'
     << "sim_filters=" << c.wordsim.sim_filters << '\n'
     << "sim_width=" << c.wordsim.sim_filter_width << '\n'
     << "max_len=" << c.wordsim.max_len << '\n'
     << "sim_cosine=" << (c.wordsim.cosine ? "true" : "false") << '\n'
     << "hidden=" << detail::join_sizes(c.hidden_layers) << '\n'
     << "lr=" << format_double(c.lr) << '\n'
     << "dropout=" << format_double(c.dropout) << '\n'
     << "epochs=" << c.epochs << '\n'
     << "batch_size=" << c.batch_size << '\n'
     << "seed=" << c.seed << '\n'
     << "augment=" << (c.augment ? "true" : "false") << '\n'
     << "min_len=" << c.min_len << '\n'
     << "threshold=" << format_double(c.threshold) << '\n'
     << "trainable_embeddings=" << (c.trainable_embeddings ? "true" : "false") << '\n'
     << "rho=" << format_double(c.rho) << '\n'
     << "eps=" << format_double(c.eps) << '\n'
     << "holdout_fraction=" << format_double(c.holdout_fraction) << '\n';
  return os.str();
}

inline ModelConfig parse_settings(const std::string& text) {
  ModelConfig c;
  std::istringstream in(text);
  apply_settings(c, in);
  return c;
}

struct DenseLayer {
  Tensor weights;
  Tensor bias;
};

class ParaphraseModel {
 public:
  // Parameters are initialised from config.seed.
  // Frozen embeddings are shared read-only; trainable ones are copied so each
  // model owns the table it updates.
  ParaphraseModel(ModelConfig config, std::shared_ptr<const Embeddings> embeddings,
                  std::shared_ptr<const LexicalSimilarityProvider> provider = nullptr)
      : config_(std::move(config)), embeddings_(std::move(embeddings)), provider_(std::move(provider)) {
    config_.validate();
    if (!embeddings_) throw std::invalid_argument("model: embeddings required");
    if (embeddings_->table.dimension != config_.encoder.embedding_dim) {
      throw ShapeError("model: embeddings have dimension " + std::to_string(embeddings_->table.dimension) +
                       ", config expects " + std::to_string(config_.encoder.embedding_dim));
    }
    if (config_.trainable_embeddings || embeddings_->table.trainable) {
      auto own = std::make_shared<Embeddings>(*embeddings_);
      own->set_trainable(config_.trainable_embeddings);
      embeddings_ = std::move(own);
    }
    Rng rng(config_.seed);
    if (config_.uses_encoder()) encoder_ = EncoderParams::init(config_.encoder_config(), rng);
    if (config_.uses_wordsim()) wordsim_ = WordSimParams::init(config_.wordsim, rng);
    std::size_t fan_in = config_.feature_size();
    for (std::size_t width : config_.hidden_layers) {
      hidden_.push_back({Tensor::from({width, fan_in}, glorot_uniform(width * fan_in, fan_in, width, rng), true),
                         Tensor::zeros({width}, true)});
      fan_in = width;
    }
    output_ = {Tensor::from({1, fan_in}, glorot_uniform(fan_in, fan_in, 1, rng), true), Tensor::zeros({1}, true)};
    collect_parameters();
  }

  ParaphraseModel(const ParaphraseModel&) = delete;
  ParaphraseModel& operator=(const ParaphraseModel&) = delete;
  ParaphraseModel(ParaphraseModel&&) = default;
  ParaphraseModel& operator=(ParaphraseModel&&) = default;

  const ModelConfig& config() const { return config_; }
  NamedParameters& parameters() { return params_; }
  const NamedParameters& parameters() const { return params_; }
  const Embeddings& embeddings() const { return *embeddings_; }
  const LexicalSimilarityProvider* provider() const { return provider_.get(); }
  const IdfTable& idf() const { return idf_; }
  void set_idf(IdfTable idf) { idf_ = std::move(idf); }

  // Assembles the ablation-selected feature vector. In train mode every
  // dropout mask draws its seed from rng.
  Tensor features(const SentencePair& pair, Mode mode, Rng* rng = nullptr) const {
    const Tokens padded1 = pad_tokens(pair.tokens1, config_.min_len);
    const Tokens padded2 = pad_tokens(pair.tokens2, config_.min_len);
    auto next_seed = [&]() -> std::uint64_t { return (mode == Mode::train && rng) ? (*rng)() : 0; };

    std::vector<Tensor> parts;
    Tensor e1 = embed_sentence(padded1, *embeddings_);
    Tensor e2 = embed_sentence(padded2, *embeddings_);
    Tensor v1, v2;
    if (config_.uses_encoder()) {
      const EncoderConfig enc = config_.encoder_config();
      v1 = encode_sentence(e1, enc, encoder_, mode, next_seed());
      v2 = encode_sentence(e2, enc, encoder_, mode, next_seed());
      parts.push_back(pair_difference(v1, v2, enc.absolute_difference));
    }
    if (config_.uses_wordsim()) {
      Tensor w1 = truncated_embedding(padded1, e1);
      Tensor w2 = truncated_embedding(padded2, e2);
      Tensor sim = similarity_matrix(w1, w2, config_.wordsim.cosine);
      parts.push_back(match_features(sim, config_.wordsim, wordsim_));
    }
    if (config_.uses_stats()) {
      StatFeatureVector stats =
          build_features(pair.tokens1, pair.tokens2, 0.0, config_.profile, &idf_, provider_.get());
      std::vector<double> values = stats.values();
      // repr_cosine stays on the tape so it trains with the encoder.
      const std::size_t repr_slot = config_.profile == DatasetProfile::twitter ? 0 : 5;
      if (repr_slot > 0) parts.push_back(Tensor::vector({values.begin(), values.begin() + repr_slot}));
      parts.push_back(cosine(v1, v2));
      parts.push_back(Tensor::vector({values.begin() + repr_slot + 1, values.end()}));
    }
    Tensor x = concat(parts);
    if (x.size() != config_.feature_size()) {
      throw ShapeError("model: assembled " + std::to_string(x.size()) + " features, config expects " +
                       std::to_string(config_.feature_size()));
    }
    return x;
  }

  // Probability that the pair is a paraphrase, as a recorded scalar.
  Tensor forward(const SentencePair& pair, Mode mode, Rng* rng = nullptr) const {
    Tensor x = features(pair, mode, rng);
    return classify(x, mode, rng);
  }

  Tensor classify(const Tensor& features, Mode mode, Rng* rng = nullptr) const {
    if (features.rank() != 1 || features.size() != config_.feature_size()) {
      throw ShapeError("model: classifier expects " + std::to_string(config_.feature_size()) + " features, got " +
                       shape_string(features.shape()));
    }
    Tensor x = features;
    for (const auto& layer : hidden_) {
      x = dense(x, layer.weights, layer.bias, Activation::relu);
      x = dropout(x, config_.dropout, mode, (mode == Mode::train && rng) ? (*rng)() : 0);
    }
    return dense(x, output_.weights, output_.bias, Activation::sigmoid);
  }

  double predict(const SentencePair& pair) const {
    NoGradGuard guard;
    return forward(pair, Mode::eval).item();
  }

 private:
  Tensor truncated_embedding(const Tokens& padded, const Tensor& full) const {
    if (padded.size() <= config_.wordsim.max_len) return full;
    Tokens head(padded.begin(), padded.begin() + static_cast<std::ptrdiff_t>(config_.wordsim.max_len));
    return embed_sentence(head, *embeddings_);
  }

  void collect_parameters() {
    params_.clear();
    if (config_.uses_encoder()) encoder_.append_to(params_, config_.encoder);
    if (config_.uses_wordsim()) wordsim_.append_to(params_);
    for (std::size_t i = 0; i < hidden_.size(); ++i) {
      params_.emplace_back("clf.hidden" + std::to_string(i) + ".w", hidden_[i].weights);
      params_.emplace_back("clf.hidden" + std::to_string(i) + ".b", hidden_[i].bias);
    }
    params_.emplace_back("clf.out.w", output_.weights);
    params_.emplace_back("clf.out.b", output_.bias);
    if (config_.trainable_embeddings) params_.emplace_back("emb.table", embeddings_->table.vectors);
  }

  ModelConfig config_;
  std::shared_ptr<const Embeddings> embeddings_;
  std::shared_ptr<const LexicalSimilarityProvider> provider_;
  IdfTable idf_;
  EncoderParams encoder_;
  WordSimParams wordsim_;
  std::vector<DenseLayer> hidden_;
  DenseLayer output_;
  NamedParameters params_;
};

// Whole-corpus IDF with each sentence as one document.
inline IdfTable build_idf(const Corpus& corpus) {
  std::vector<Tokens> docs;
  docs.reserve(corpus.size() * 2);
  for (const auto& p : corpus.pairs) {
    docs.push_back(p.tokens1);
    docs.push_back(p.tokens2);
  }
  return IdfTable::build(docs);
}

// Threshold rule p >= threshold => paraphrase. Disjoint slices may be scored
// on worker threads; counts merge by integer addition.
inline EvaluationReport evaluate(const Corpus& corpus, const ParaphraseModel& model, double threshold = 0.5,
                                 std::size_t threads = 1) {
  if (corpus.empty()) throw std::invalid_argument("evaluate: empty corpus");
  for (const auto& p : corpus.pairs) {
    if (p.debatable || p.augmented) {
      throw std::invalid_argument("evaluate: corpus contains debatable or augmented pair '" + p.id + "'");
    }
  }
  threads = std::clamp<std::size_t>(threads, 1, corpus.size());
  std::vector<EvaluationReport> partial(threads);
  auto score_slice = [&](std::size_t slot) {
    NoGradGuard guard;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = slot; i < corpus.size(); i += threads) {
      const auto& pair = corpus.pairs[i];
      const bool predicted = model.forward(pair, Mode::eval).item() >= threshold;
      if (predicted && pair.label == 1) ++tp;
      else if (predicted) ++fp;
      else if (pair.label == 1) ++fn;
      else ++tn;
    }
    partial[slot] = EvaluationReport::from_counts(tp, fp, fn, tn);
  };
  if (threads == 1) {
    score_slice(0);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < threads; ++t) workers.emplace_back(score_slice, t);
    for (auto& w : workers) w.join();
  }
  EvaluationReport total;
  for (const auto& r : partial) total = total.merged(r);
  return total;
}

}  // namespace dpp
