#pragma once

// Command-line front end: train, eval, predict, gradcheck, curve.
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error,
// 3 numeric failure.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "deepparaphrase/checkpoint.hpp"
#include "deepparaphrase/corpus.hpp"
#include "deepparaphrase/embeddings.hpp"
#include "deepparaphrase/errors.hpp"
#include "deepparaphrase/gradcheck.hpp"
#include "deepparaphrase/metrics.hpp"
#include "deepparaphrase/model.hpp"
#include "deepparaphrase/stat_features.hpp"
#include "deepparaphrase/tokenize.hpp"
#include "deepparaphrase/trainer.hpp"

namespace dpp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

struct Options {
  std::string command;
  std::optional<std::string> dataset;
  std::optional<std::string> ablation;
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::optional<double> lr, dropout, threshold;
  std::optional<std::size_t> epochs, batch_size, embedding_dim;
  std::optional<bool> augment;
  std::string train_path, dev_path, test_path;
  std::string embeddings_path, lexicon_path, scores_path;
  std::string checkpoint_path, out_path, report_path;
  std::vector<double> fractions{0.25, 0.5, 1.0};
  std::size_t threads = 1;
};

namespace detail {

// defaults (per dataset) < --config file < flags.
inline ModelConfig resolve_config(const Options& o) {
  DatasetProfile profile = o.dataset ? parse_profile(*o.dataset) : DatasetProfile::twitter;
  if (!o.dataset && !o.config_path.empty()) {
    // The config file may name the dataset; its defaults apply first.
    std::ifstream in(o.config_path);
    if (!in) throw DataError(o.config_path + ": cannot open config file");
    ModelConfig probe;
    apply_settings(probe, in, o.config_path);
    profile = probe.profile;
  }
  ModelConfig c = ModelConfig::for_profile(profile);
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw DataError(o.config_path + ": cannot open config file");
    apply_settings(c, in, o.config_path);
  }
  for (const auto& kv : o.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.dataset) c.profile = profile;
  if (o.ablation) c.ablation = parse_ablation(*o.ablation);
  if (o.seed) c.seed = *o.seed;
  if (o.lr) c.lr = *o.lr;
  if (o.dropout) c.dropout = *o.dropout;
  if (o.threshold) c.threshold = *o.threshold;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.embedding_dim) c.encoder.embedding_dim = *o.embedding_dim;
  if (o.augment) c.augment = *o.augment;
  c.validate();
  return c;
}

inline void require(const std::string& value, const char* flag, const std::string& command) {
  if (value.empty()) throw CLI::RequiredError(std::string(flag) + " (required by " + command + ")");
}

inline Corpus load_corpus(const std::string& path, DatasetProfile profile, Split split) {
  return profile == DatasetProfile::twitter ? load_twitter(path, split) : load_msrp(path, split);
}

inline std::shared_ptr<const LexicalSimilarityProvider> load_provider(const Options& o) {
  if (o.lexicon_path.empty() != o.scores_path.empty()) {
    throw std::invalid_argument("--lexicon and --scores must be given together");
  }
  if (o.lexicon_path.empty()) return nullptr;
  return std::make_shared<LexicalSimilarityProvider>(LexicalSimilarityProvider::load(o.lexicon_path, o.scores_path));
}

inline void emit_warnings(const Corpus& c, std::ostream& err) {
  for (const auto& w : c.warnings) err << "note: " << w << '\n';
}

inline void write_report(const Options& o, const std::string& title, const EvaluationReport& r, std::ostream& out) {
  out << title << '\n' << r.to_table();
  if (o.report_path.empty()) {
    out << r.to_kv();
    return;
  }
  std::ofstream file(o.report_path, std::ios::trunc);
  if (!file) throw DataError(o.report_path + ": cannot open report for writing");
  file << r.to_kv();
}

inline ParaphraseModel model_from_checkpoint(const Options& o, std::ostream& err) {
  require(o.checkpoint_path, "--checkpoint", o.command);
  require(o.embeddings_path, "--embeddings", o.command);
  Checkpoint ckpt = load_checkpoint(o.checkpoint_path);
  ModelConfig c = ckpt.config();
  if (o.threshold) c.threshold = *o.threshold;
  auto emb = std::make_shared<Embeddings>(load_pretrained(o.embeddings_path, c.encoder.embedding_dim));
  auto provider = load_provider(o);
  if (c.uses_stats() && c.profile == DatasetProfile::msrp && !provider) {
    err << "note: no --lexicon/--scores given; POS-bucket features will be zero\n";
  }
  ParaphraseModel model(c, emb, provider);
  restore_checkpoint(ckpt, model);
  return model;
}

inline int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  ModelConfig c = resolve_config(o);
  require(o.train_path, "--train", "train");
  require(o.embeddings_path, "--embeddings", "train");
  require(o.out_path, "--out", "train");
  Corpus train_corpus = load_corpus(o.train_path, c.profile, Split::train);
  emit_warnings(train_corpus, err);
  std::optional<Corpus> dev;
  if (!o.dev_path.empty()) {
    dev = load_corpus(o.dev_path, c.profile, Split::dev);
    emit_warnings(*dev, err);
  }
  std::optional<Corpus> test;
  if (!o.test_path.empty()) {
    test = load_corpus(o.test_path, c.profile, Split::test);
    emit_warnings(*test, err);
  }
  auto emb = std::make_shared<Embeddings>(load_pretrained(o.embeddings_path, c.encoder.embedding_dim));
  ParaphraseModel model(c, emb, load_provider(o));
  Trainer trainer(model);
  auto log = [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " loss=" << format_double(r.train_loss) << " dev_f1=" << format_double(r.dev.f1)
        << " dev_accuracy=" << format_double(r.dev.accuracy) << '\n';
  };
  TrainingHistory history = train(model, train_corpus, dev ? &*dev : nullptr, log, &trainer);
  if (history.best_epoch) out << "best epoch " << *history.best_epoch << '\n';
  save_checkpoint(o.out_path, model, &trainer);
  out << "checkpoint written to " << o.out_path << '\n';
  if (test) write_report(o, "test", evaluate(*test, model, c.threshold, o.threads), out);
  else if (dev) write_report(o, "dev", evaluate(*dev, model, c.threshold, o.threads), out);
  return kExitOk;
}

inline int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.test_path, "--test", "eval");
  ParaphraseModel model = model_from_checkpoint(o, err);
  Corpus corpus = load_corpus(o.test_path, model.config().profile, Split::test);
  emit_warnings(corpus, err);
  write_report(o, "test", evaluate(corpus, model, model.config().threshold, o.threads), out);
  return kExitOk;
}

inline int cmd_predict(const Options& o, std::istream& in, std::ostream& out, std::ostream& err) {
  ParaphraseModel model = model_from_checkpoint(o, err);
  std::string line;
  std::size_t line_no = 0;
  std::ostringstream buffer;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = dpp::detail::trim_line_end(line);
    if (view.empty()) continue;
    auto tab = view.find('\t');
    if (tab == std::string_view::npos) throw DataError("<stdin>", line_no, "expected sentence1<TAB>sentence2");
    SentencePair pair;
    pair.tokens1 = pad_tokens(tokenize(view.substr(0, tab)), model.config().min_len);
    pair.tokens2 = pad_tokens(tokenize(view.substr(tab + 1)), model.config().min_len);
    const double p = model.predict(pair);
    buffer << format_double(p) << '\t' << (p >= model.config().threshold ? 1 : 0) << '\n';
  }
  out << buffer.str();
  return kExitOk;
}

inline int cmd_gradcheck(const Options& o, std::ostream& out) {
  const std::uint64_t seed = o.seed.value_or(7);
  bool ok = true;
  for (const auto& e : run_model_gradcheck(seed)) {
    const bool pass = e.max_rel_error < kGradCheckTolerance;
    ok = ok && pass;
    out << e.name << '\t' << e.count << '\t' << format_double(e.max_rel_error) << '\t' << (pass ? "ok" : "FAIL")
        << '\n';
  }
  return ok ? kExitOk : kExitNumeric;
}

inline int cmd_curve(const Options& o, std::ostream& out, std::ostream& err) {
  ModelConfig c = resolve_config(o);
  require(o.train_path, "--train", "curve");
  require(o.dev_path, "--dev", "curve");
  require(o.embeddings_path, "--embeddings", "curve");
  Corpus train_corpus = load_corpus(o.train_path, c.profile, Split::train);
  Corpus dev = load_corpus(o.dev_path, c.profile, Split::dev);
  emit_warnings(train_corpus, err);
  emit_warnings(dev, err);
  auto emb = std::make_shared<const Embeddings>(load_pretrained(o.embeddings_path, c.encoder.embedding_dim));
  auto provider = load_provider(o);
  auto rows = learning_curve([&] { return ParaphraseModel(c, emb, provider); }, train_corpus, dev, o.fractions);
  std::ostringstream table;
  table << "fraction\ttrain_pairs\tprecision\trecall\tf1\taccuracy\n";
  for (const auto& r : rows) {
    table << format_double(r.fraction) << '\t' << r.train_pairs << '\t' << format_double(r.dev.precision) << '\t'
          << format_double(r.dev.recall) << '\t' << format_double(r.dev.f1) << '\t' << format_double(r.dev.accuracy)
          << '\n';
  }
  if (o.report_path.empty()) {
    out << table.str();
  } else {
    std::ofstream file(o.report_path, std::ios::trunc);
    if (!file) throw DataError(o.report_path + ": cannot open report for writing");
    file << table.str();
  }
  return kExitOk;
}

inline void add_model_flags(CLI::App* app, Options& o) {
  app->add_option("--config", o.config_path, "key=value settings file");
  app->add_option("--dataset", o.dataset, "twitter|msrp")->check(CLI::IsMember({"twitter", "msrp"}));
  app->add_option("--ablation", o.ablation, "sentmod|pairwise|deep|augdeep")
      ->check(CLI::IsMember({"sentmod", "pairwise", "deep", "augdeep"}));
  app->add_option("--lr", o.lr, "Adadelta learning-rate multiplier");
  app->add_option("--dropout", o.dropout, "dropout rate");
  app->add_option("--epochs", o.epochs, "training epochs");
  app->add_option("--batch-size", o.batch_size, "mini-batch size");
  app->add_option("--embedding-dim", o.embedding_dim, "embedding dimension");
  app->add_option("--augment", o.augment, "swap-augment the training pairs (true|false)");
  app->add_option("--set", o.overrides, "override any setting, key=value (repeatable)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
}

inline void add_provider_flags(CLI::App* app, Options& o) {
  app->add_option("--lexicon", o.lexicon_path, "POS lexicon (token<TAB>tag)");
  app->add_option("--scores", o.scores_path, "token-pair similarity scores (token<TAB>token<TAB>score)");
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Paraphrase identification with sentence modelling, word-similarity matching and statistical features",
               "deepparaphrase"};
  app.require_subcommand(1);
  // A repeated scalar flag keeps its last value.
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.add_option("--seed", o.seed, "seed for every random stream");
  app.add_option("--threads", o.threads, "evaluation worker threads")->check(CLI::PositiveNumber);

  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  detail::add_model_flags(train_cmd, o);
  detail::add_provider_flags(train_cmd, o);
  train_cmd->add_option("--train", o.train_path, "training corpus");
  train_cmd->add_option("--dev", o.dev_path, "development corpus");
  train_cmd->add_option("--test", o.test_path, "test corpus scored after training");
  train_cmd->add_option("--embeddings", o.embeddings_path, "pretrained embeddings (token v1 ... vd)");
  train_cmd->add_option("--out", o.out_path, "checkpoint to write");
  train_cmd->add_option("--report", o.report_path, "write metric=value report here");

  auto* eval_cmd = app.add_subcommand("eval", "score a corpus with a checkpoint");
  detail::add_provider_flags(eval_cmd, o);
  eval_cmd->add_option("--checkpoint", o.checkpoint_path, "checkpoint to load");
  eval_cmd->add_option("--embeddings", o.embeddings_path, "pretrained embeddings");
  eval_cmd->add_option("--test", o.test_path, "corpus to score");
  eval_cmd->add_option("--threshold", o.threshold, "decision threshold");
  eval_cmd->add_option("--report", o.report_path, "write metric=value report here");

  auto* predict_cmd = app.add_subcommand("predict", "read sentence1<TAB>sentence2 lines, write p<TAB>label");
  detail::add_provider_flags(predict_cmd, o);
  predict_cmd->add_option("--checkpoint", o.checkpoint_path, "checkpoint to load");
  predict_cmd->add_option("--embeddings", o.embeddings_path, "pretrained embeddings");
  predict_cmd->add_option("--threshold", o.threshold, "decision threshold");

  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference check of every parameter group");

  auto* curve_cmd = app.add_subcommand("curve", "dev metrics against the fraction of training data");
  detail::add_model_flags(curve_cmd, o);
  detail::add_provider_flags(curve_cmd, o);
  curve_cmd->add_option("--train", o.train_path, "training corpus");
  curve_cmd->add_option("--dev", o.dev_path, "development corpus");
  curve_cmd->add_option("--embeddings", o.embeddings_path, "pretrained embeddings");
  curve_cmd->add_option("--fractions", o.fractions, "training fractions in (0,1]")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  curve_cmd->add_option("--report", o.report_path, "write the table here");

  for (auto* sub : {train_cmd, eval_cmd, predict_cmd, gradcheck_cmd, curve_cmd}) {
    sub->add_option("--seed", o.seed, "seed for every random stream");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitUsage;
  }
  o.command = app.get_subcommands().front()->get_name();

  try {
    if (o.command == "train") return detail::cmd_train(o, out, err);
    if (o.command == "eval") return detail::cmd_eval(o, out, err);
    if (o.command == "predict") return detail::cmd_predict(o, in, out, err);
    if (o.command == "gradcheck") return detail::cmd_gradcheck(o, out);
    return detail::cmd_curve(o, out, err);
  } catch (const CLI::RequiredError& e) {
    err << "error: " << e.what() << '\n' << app.get_subcommand(o.command)->help();
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

inline int run(const std::vector<std::string>& args) { return run(args, std::cin, std::cout, std::cerr); }

}  // namespace dpp::cli
