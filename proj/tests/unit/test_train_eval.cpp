#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "deepparaphrase.hpp"
#include "toy.hpp"

using namespace dpp;
using dpp::test::toy_config;
using dpp::test::toy_data;
using dpp::test::toy_model;

namespace {

const Ablation kAll[] = {Ablation::sentmod, Ablation::pairwise, Ablation::deep, Ablation::augdeep};

std::string checkpoint_bytes(const ParaphraseModel& m, const Trainer* t = nullptr) {
  std::ostringstream out;
  write_checkpoint(out, make_checkpoint(m, t));
  return out.str();
}

Checkpoint parse_bytes(const std::string& bytes) {
  std::istringstream in(bytes);
  return read_checkpoint(in, "mem.ckpt");
}

SentencePair pair_of(Tokens a, Tokens b, int label = 0) {
  SentencePair p;
  p.tokens1 = std::move(a);
  p.tokens2 = std::move(b);
  p.label = label;
  return p;
}

}  // namespace

TEST(Metrics, HandExample) {
  auto r = EvaluationReport::from_counts(3, 1, 2, 4);
  EXPECT_DOUBLE_EQ(r.precision, 0.75);
  EXPECT_DOUBLE_EQ(r.recall, 0.6);
  EXPECT_NEAR(r.f1, 2 * 0.75 * 0.6 / 1.35, 1e-15);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.7);
  EXPECT_EQ(r.total(), 10u);
}

TEST(Metrics, AllCorrectAndDegenerate) {
  auto perfect = EvaluationReport::from_counts(5, 0, 0, 7);
  EXPECT_EQ(perfect.f1, 1.0);
  EXPECT_EQ(perfect.accuracy, 1.0);
  auto none = EvaluationReport::from_counts(0, 0, 3, 2);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
}

TEST(Metrics, ReportedPrecisionRecallGiveF1) {
  EXPECT_NEAR(f1_score(0.760, 0.742), 0.751, 0.0005);
  EXPECT_NEAR(f1_score(0.760, 0.742), 0.7509, 0.00005);
}

TEST(Metrics, ConfusionOracleOnRandomSets) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + gen() % 60;
    std::vector<int> predicted(n), actual(n);
    for (std::size_t i = 0; i < n; ++i) {
      predicted[i] = static_cast<int>(gen() % 2);
      actual[i] = static_cast<int>(gen() % 2);
    }
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0, correct = 0, pred_pos = 0, act_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tp += predicted[i] && actual[i];
      fp += predicted[i] && !actual[i];
      fn += !predicted[i] && actual[i];
      tn += !predicted[i] && !actual[i];
      correct += predicted[i] == actual[i];
      pred_pos += predicted[i];
      act_pos += actual[i];
    }
    auto r = EvaluationReport::from_counts(tp, fp, fn, tn);
    const double p = pred_pos ? double(tp) / double(pred_pos) : 0.0;
    const double rc = act_pos ? double(tp) / double(act_pos) : 0.0;
    ASSERT_EQ(r.total(), n);
    ASSERT_NEAR(r.accuracy, double(correct) / double(n), 1e-12);
    ASSERT_NEAR(r.precision, p, 1e-12);
    ASSERT_NEAR(r.recall, rc, 1e-12);
    ASSERT_NEAR(r.f1, p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0, 1e-12);
  }
}

TEST(Metrics, MergeAddsCounts) {
  auto a = EvaluationReport::from_counts(1, 2, 3, 4), b = EvaluationReport::from_counts(5, 6, 7, 8);
  auto m = a.merged(b);
  EXPECT_EQ(m.tp, 6u);
  EXPECT_EQ(m.tn, 12u);
  EXPECT_EQ(m.accuracy, b.merged(a).accuracy);
}

TEST(Metrics, KeyValueFormat) {
  std::string kv = EvaluationReport::from_counts(3, 1, 2, 4).to_kv();
  EXPECT_NE(kv.find("tp=3\n"), std::string::npos);
  EXPECT_NE(kv.find("precision=0.75\n"), std::string::npos);
  EXPECT_NE(kv.find("accuracy=0.7\n"), std::string::npos);
}

TEST(ModelConfig, FeatureSizesAndContainment) {
  for (auto profile : {DatasetProfile::twitter, DatasetProfile::msrp}) {
    ModelConfig c = toy_config(Ablation::sentmod);
    c.profile = profile;
    const std::size_t sentmod = c.feature_size();
    c.ablation = Ablation::pairwise;
    const std::size_t pairwise = c.feature_size();
    c.ablation = Ablation::deep;
    EXPECT_EQ(c.feature_size(), sentmod + pairwise);
    c.ablation = Ablation::augdeep;
    EXPECT_EQ(c.feature_size(), sentmod + pairwise + stat_feature_count(profile));
  }
  EXPECT_EQ(toy_config(Ablation::sentmod).feature_size(), 16u);
  EXPECT_EQ(toy_config(Ablation::pairwise).feature_size(), 8u);
}

TEST(ModelConfig, SettingsRoundTrip) {
  ModelConfig c = toy_config(Ablation::deep, 42);
  c.hidden_layers = {7, 3};
  ModelConfig back = parse_settings(to_settings(c));
  EXPECT_EQ(to_settings(back), to_settings(c));
  EXPECT_THROW(parse_settings("no_such_key=1\n"), DataError);
}

TEST(ModelConfig, ValidationRejectsBadValues) {
  ModelConfig c = toy_config(Ablation::deep);
  c.min_len = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = toy_config(Ablation::deep);
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = toy_config(Ablation::deep);
  c.encoder.embedding_dim = 5;
  EXPECT_THROW(toy_model(c), ShapeError);
}

TEST(Forward, ProbabilityInsideUnitInterval) {
  for (auto ab : kAll) {
    ParaphraseModel m = toy_model(toy_config(ab));
    for (const auto& p : toy_data().dev.pairs) {
      const double prob = m.predict(p);
      ASSERT_GT(prob, 0.0);
      ASSERT_LT(prob, 1.0);
    }
  }
}

TEST(Forward, SentmodIdenticalSentencesCollapse) {
  ParaphraseModel m = toy_model(toy_config(Ablation::sentmod));
  const double first = m.predict(pair_of({"the", "big", "dog"}, {"the", "big", "dog"}));
  EXPECT_EQ(m.predict(pair_of({"a", "storm", "rises", "in", "city"}, {"a", "storm", "rises", "in", "city"})), first);
  EXPECT_EQ(m.predict(pair_of({"zzz"}, {"zzz"})), first);
}

TEST(Forward, EvalModeDeterministic) {
  for (auto ab : kAll) {
    ParaphraseModel a = toy_model(toy_config(ab)), b = toy_model(toy_config(ab));
    for (const auto& p : toy_data().dev.pairs) ASSERT_EQ(a.predict(p), b.predict(p));
  }
}

TEST(Forward, FeatureLengthMismatchRejected) {
  ParaphraseModel m = toy_model(toy_config(Ablation::deep));
  EXPECT_THROW(m.classify(Tensor::zeros({3}), Mode::eval), ShapeError);
}

TEST(GradCheck, EveryAblationAndProfile) {
  for (auto profile : {DatasetProfile::twitter, DatasetProfile::msrp}) {
    for (auto ab : kAll) {
      for (const auto& entry : run_model_gradcheck(7, profile, ab)) {
        EXPECT_LT(entry.max_rel_error, kGradCheckTolerance) << to_string(ab) << " " << entry.name;
        EXPECT_GT(entry.grad_norm, 0.0) << to_string(ab) << " " << entry.name;
      }
    }
  }
}

TEST(Train, ZeroEpochsLeavesParametersUnchanged) {
  ModelConfig c = toy_config(Ablation::augdeep);
  c.epochs = 0;
  ParaphraseModel m = toy_model(c), fresh = toy_model(c);
  auto history = train(m, toy_data().train, &toy_data().dev);
  EXPECT_TRUE(history.epochs.empty());
  EXPECT_FALSE(history.best_epoch.has_value());
  EXPECT_EQ(snapshot(m.parameters()), snapshot(fresh.parameters()));
}

TEST(Train, EmptyCorpusRejected) {
  ParaphraseModel m = toy_model(toy_config(Ablation::deep));
  EXPECT_THROW(train(m, Corpus{}, &toy_data().dev), std::invalid_argument);
}

TEST(Train, IdenticalSeedsIdenticalHistory) {
  auto run = [] {
    ModelConfig c = toy_config(Ablation::augdeep, 3);
    c.dropout = 0.3;
    c.epochs = 4;
    c.augment = true;
    ParaphraseModel m = toy_model(c);
    auto h = train(m, toy_data().train, &toy_data().dev);
    std::vector<double> losses;
    for (const auto& e : h.epochs) losses.push_back(e.train_loss);
    return std::make_pair(losses, checkpoint_bytes(m));
  };
  auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Train, LossDecreasesOverFirstTenEpochs) {
  for (auto ab : kAll) {
    ModelConfig c = toy_config(ab);
    ParaphraseModel m = toy_model(c);
    auto h = train(m, toy_data().train, &toy_data().dev);
    ASSERT_EQ(h.epochs.size(), 10u);
    EXPECT_LT(h.epochs.back().train_loss, h.epochs.front().train_loss) << to_string(ab);
  }
}

TEST(Train, OverfitsToyCorpus) {
  for (auto ab : kAll) {
    ParaphraseModel m = toy_model(toy_config(ab));
    m.set_idf(build_idf(toy_data().train));
    Trainer trainer(m);
    double acc = 0.0;
    for (int e = 0; e < 200 && acc < 0.95; ++e) {
      trainer.run_epoch(toy_data().train);
      acc = evaluate(toy_data().train, m).accuracy;
    }
    EXPECT_GE(acc, 0.95) << to_string(ab);
  }
}

TEST(Train, KeepsBestDevParameters) {
  ModelConfig c = toy_config(Ablation::deep);
  c.epochs = 6;
  ParaphraseModel m = toy_model(c);
  auto h = train(m, toy_data().train, &toy_data().dev);
  ASSERT_TRUE(h.best_epoch.has_value());
  double best = -1.0;
  for (const auto& e : h.epochs) best = std::max(best, e.dev.f1);
  EXPECT_EQ(h.epochs[*h.best_epoch - 1].dev.f1, best);
  EXPECT_EQ(evaluate(toy_data().dev, m).f1, best);
}

TEST(Train, HoldoutWhenNoDevCorpus) {
  auto [tr, held] = holdout_split(toy_data().train, 0.25, 5);
  EXPECT_EQ(tr.size() + held.size(), toy_data().train.size());
  EXPECT_EQ(held.positives(), 4u);
  EXPECT_EQ(held.negatives(), 4u);
  ModelConfig c = toy_config(Ablation::sentmod);
  c.epochs = 2;
  ParaphraseModel m = toy_model(c);
  EXPECT_EQ(train(m, toy_data().train).epochs.size(), 2u);
}

TEST(Train, NonFiniteLossRaisesNumericError) {
  ParaphraseModel m = toy_model(toy_config(Ablation::deep));
  for (auto& [name, t] : m.parameters()) {
    if (name == "clf.out.b") t.mutable_values()[0] = std::numeric_limits<double>::quiet_NaN();
  }
  m.set_idf(build_idf(toy_data().train));
  Trainer trainer(m);
  try {
    trainer.run_epoch(toy_data().train);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
  }
}

TEST(Evaluate, RejectsEmptyAndAugmented) {
  ParaphraseModel m = toy_model(toy_config(Ablation::deep));
  EXPECT_THROW(evaluate(Corpus{}, m), std::invalid_argument);
  EXPECT_THROW(evaluate(augment_swap(toy_data().train), m), std::invalid_argument);
}

TEST(Evaluate, ThresholdSweepExtremes) {
  ParaphraseModel m = toy_model(toy_config(Ablation::augdeep));
  auto all = evaluate(toy_data().dev, m, 0.0);
  EXPECT_EQ(all.recall, 1.0);
  EXPECT_EQ(all.fn + all.tn, 0u);
  auto none = evaluate(toy_data().dev, m, 1.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.tp + none.fp, 0u);
  EXPECT_EQ(all.total(), toy_data().dev.size());
}

TEST(Evaluate, ThreadCountDoesNotChangeCounts) {
  ModelConfig c = toy_config(Ablation::augdeep);
  c.epochs = 3;
  ParaphraseModel m = toy_model(c);
  train(m, toy_data().train, &toy_data().dev);
  auto one = evaluate(toy_data().train, m, 0.5, 1);
  for (std::size_t threads : {2u, 3u, 8u, 64u}) {
    auto many = evaluate(toy_data().train, m, 0.5, threads);
    EXPECT_EQ(many.to_kv(), one.to_kv()) << threads;
  }
}

TEST(LearningCurve, RowsAndFullFractionMatchesPlainRun) {
  ModelConfig c = toy_config(Ablation::deep);
  c.epochs = 3;
  auto rows = learning_curve([&] { return toy_model(c); }, toy_data().train, toy_data().dev, {0.25, 0.5, 1.0});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].train_pairs, 8u);
  EXPECT_EQ(rows[1].train_pairs, 16u);
  EXPECT_EQ(rows[2].train_pairs, 32u);
  for (const auto& r : rows) EXPECT_EQ(r.dev.total(), toy_data().dev.size());
  ParaphraseModel plain = toy_model(c);
  train(plain, toy_data().train, &toy_data().dev);
  EXPECT_EQ(rows[2].dev.to_kv(), evaluate(toy_data().dev, plain).to_kv());
}

TEST(LearningCurve, SubsampleDeterministicAndStratified) {
  const Corpus& tr = toy_data().train;
  Corpus a = stratified_subsample(tr, 0.5, 11), b = stratified_subsample(tr, 0.5, 11);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.pairs[i].id, b.pairs[i].id);
  EXPECT_EQ(a.positives(), 8u);
  EXPECT_THROW(stratified_subsample(tr, 0.01, 11), std::invalid_argument);
  EXPECT_THROW(stratified_subsample(tr, 0.0, 11), std::invalid_argument);
  EXPECT_THROW(stratified_subsample(tr, 1.5, 11), std::invalid_argument);
}

TEST(Checkpoint, RoundTripParametersBitIdentical) {
  ModelConfig c = toy_config(Ablation::augdeep);
  c.epochs = 2;
  ParaphraseModel m = toy_model(c);
  train(m, toy_data().train, &toy_data().dev);
  Checkpoint ckpt = parse_bytes(checkpoint_bytes(m));
  ParaphraseModel restored = toy_model(parse_settings(ckpt.text("config")));
  restore_checkpoint(ckpt, restored);
  EXPECT_EQ(snapshot(restored.parameters()), snapshot(m.parameters()));
  EXPECT_EQ(checkpoint_bytes(restored), checkpoint_bytes(m));
  for (const auto& p : toy_data().test.pairs) ASSERT_EQ(restored.predict(p), m.predict(p));
}

TEST(Checkpoint, ResumeMatchesUninterruptedRun) {
  ModelConfig c = toy_config(Ablation::augdeep);
  c.dropout = 0.25;
  const Corpus& tr = toy_data().train;
  ParaphraseModel straight = toy_model(c);
  straight.set_idf(build_idf(tr));
  Trainer straight_trainer(straight);
  straight_trainer.run_epoch(tr);
  auto batches = pad_and_batch(tr, c.min_len, c.batch_size, straight_trainer.rng());

  ParaphraseModel first = toy_model(c);
  first.set_idf(build_idf(tr));
  Trainer first_trainer(first);
  first_trainer.run_epoch(tr);
  const std::string saved = checkpoint_bytes(first, &first_trainer);

  ParaphraseModel resumed = toy_model(c);
  Trainer resumed_trainer(resumed);
  restore_checkpoint(parse_bytes(saved), resumed, &resumed_trainer);
  auto resumed_batches = pad_and_batch(tr, c.min_len, c.batch_size, resumed_trainer.rng());
  ASSERT_EQ(batches.size(), resumed_batches.size());

  EXPECT_EQ(straight_trainer.step(tr, batches[0]), resumed_trainer.step(tr, resumed_batches[0]));
  EXPECT_EQ(snapshot(resumed.parameters()), snapshot(straight.parameters()));
  EXPECT_EQ(checkpoint_bytes(resumed, &resumed_trainer), checkpoint_bytes(straight, &straight_trainer));
}

TEST(Checkpoint, VersionMismatchNamesBoth) {
  std::string bytes = checkpoint_bytes(toy_model(toy_config(Ablation::deep)));
  bytes[4] = 2;
  try {
    parse_bytes(bytes);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("found 2"), std::string::npos) << msg;
  }
}

TEST(Checkpoint, TruncationAndGarbageRejected) {
  const std::string bytes = checkpoint_bytes(toy_model(toy_config(Ablation::deep)));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{9}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(parse_bytes(bytes.substr(0, cut)), DataError) << cut;
  }
  EXPECT_THROW(parse_bytes("XXXX" + bytes.substr(4)), DataError);
  EXPECT_THROW(parse_bytes(bytes + "x"), DataError);
}

TEST(Checkpoint, LayoutHeader) {
  const std::string bytes = checkpoint_bytes(toy_model(toy_config(Ablation::deep)));
  EXPECT_EQ(bytes.substr(0, 4), "DPPM");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);
  EXPECT_EQ(bytes[5], 0);
}
