#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "deepparaphrase/encoder.hpp"
#include "test_util.hpp"

using namespace dpp;
using dpp::test::max_fd_error;
using dpp::test::probe;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.filter_widths = {3, 4};
  c.filters_per_width = 3;
  c.lstm_hidden = 5;
  c.embedding_dim = 4;
  c.dropout_rate = 0.0;
  return c;
}

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, bool requires_grad = false) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = dist(gen);
  return Tensor::from({rows, cols}, std::move(v), requires_grad);
}

std::vector<double> as_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(EncodeSentence, OutputHasHiddenSize) {
  EncoderConfig c = tiny_config();
  Rng rng(1);
  EncoderParams p = EncoderParams::init(c, rng);
  for (std::size_t m = 4; m <= 9; ++m) {
    Tensor v = encode_sentence(random_matrix(4, m, m), c, p, Mode::eval);
    EXPECT_EQ(v.shape(), (Shape{5}));
  }
}

TEST(EncodeSentence, SequenceLengthChain) {
  EncoderConfig c = tiny_config();
  // m=6: width 3 -> 4 -> 2, width 4 -> 3 -> 2.
  EXPECT_EQ(c.sequence_length(6), 4u);
  EXPECT_EQ(c.sequence_length(4), 1u + 1u);
  EncoderConfig wide = c;
  wide.filter_widths = {1};
  EXPECT_EQ(wide.sequence_length(7), 4u);
}

TEST(EncodeSentence, ZeroInputsZeroWeightsGiveZero) {
  EncoderConfig c = tiny_config();
  EncoderParams p;
  for (std::size_t w : c.filter_widths) {
    p.conv.push_back({Tensor::zeros({3, 4, w}, true), Tensor::zeros({3}, true)});
  }
  p.lstm = LstmWeights::zeros(3, 5);
  Tensor v = encode_sentence(Tensor::zeros({4, 6}), c, p, Mode::eval);
  for (double x : v.values()) EXPECT_EQ(x, 0.0);
}

TEST(EncodeSentence, DeterministicAndDistinct) {
  EncoderConfig c = tiny_config();
  Rng rng(2);
  EncoderParams p = EncoderParams::init(c, rng);
  Tensor a = random_matrix(4, 6, 10), b = random_matrix(4, 6, 11);
  EXPECT_EQ(as_vec(encode_sentence(a, c, p, Mode::eval)), as_vec(encode_sentence(a, c, p, Mode::eval)));
  EXPECT_NE(as_vec(encode_sentence(a, c, p, Mode::eval)), as_vec(encode_sentence(b, c, p, Mode::eval)));
}

TEST(EncodeSentence, DropoutOnlyInTrainMode) {
  EncoderConfig c = tiny_config();
  c.dropout_rate = 0.5;
  Rng rng(3);
  EncoderParams p = EncoderParams::init(c, rng);
  Tensor a = random_matrix(4, 8, 12);
  EncoderConfig no_drop = c;
  no_drop.dropout_rate = 0.0;
  EXPECT_EQ(as_vec(encode_sentence(a, c, p, Mode::eval)), as_vec(encode_sentence(a, no_drop, p, Mode::eval)));
  EXPECT_EQ(as_vec(encode_sentence(a, c, p, Mode::train, 7)), as_vec(encode_sentence(a, c, p, Mode::train, 7)));
  EXPECT_NE(as_vec(encode_sentence(a, c, p, Mode::train, 7)), as_vec(encode_sentence(a, c, p, Mode::eval)));
}

TEST(EncodeSentence, RejectsShortSentenceAndWrongDepth) {
  EncoderConfig c = tiny_config();
  Rng rng(4);
  EncoderParams p = EncoderParams::init(c, rng);
  EXPECT_THROW(encode_sentence(random_matrix(4, 3, 1), c, p, Mode::eval), ShapeError);
  EXPECT_THROW(encode_sentence(random_matrix(3, 6, 1), c, p, Mode::eval), ShapeError);
}

TEST(EncodeSentence, GradientThroughWholeEncoder) {
  EncoderConfig c = tiny_config();
  Rng rng(5);
  EncoderParams p = EncoderParams::init(c, rng);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> bias(0.2, 0.6);
  for (auto& bank : p.conv) {
    for (double& v : bank.bias.mutable_values()) v = bias(gen);
  }
  NamedParameters named;
  p.append_to(named, c);
  Tensor emb = random_matrix(4, 6, 13, true);
  std::vector<Tensor> inputs{emb};
  for (auto& [name, t] : named) inputs.push_back(t);
  EXPECT_LT(max_fd_error(inputs, [&] { return probe(encode_sentence(emb, c, p, Mode::eval)); }), 1e-4);
}

TEST(EncodeSentence, ParameterNames) {
  EncoderConfig c = tiny_config();
  Rng rng(6);
  NamedParameters named;
  EncoderParams::init(c, rng).append_to(named, c);
  std::vector<std::string> names;
  for (auto& [n, t] : named) names.push_back(n);
  EXPECT_EQ(names, (std::vector<std::string>{"enc.conv.w3", "enc.conv.b3", "enc.conv.w4", "enc.conv.b4",
                                             "enc.lstm.Wi", "enc.lstm.Ui", "enc.lstm.bi", "enc.lstm.Wf",
                                             "enc.lstm.Uf", "enc.lstm.bf", "enc.lstm.Wo", "enc.lstm.Uo",
                                             "enc.lstm.bo", "enc.lstm.Wc", "enc.lstm.Uc", "enc.lstm.bc"}));
}

TEST(PairDifference, Examples) {
  Tensor v = Tensor::vector({0.5, -2.0, 3.0});
  for (double x : pair_difference(v, v).values()) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(as_vec(pair_difference(Tensor::vector({1, 2}), Tensor::vector({0, 5}))), (std::vector<double>{1, -3}));
  EXPECT_EQ(as_vec(pair_difference(Tensor::vector({1, 2}), Tensor::vector({0, 5}), true)),
            (std::vector<double>{1, 3}));
}

TEST(PairDifference, Antisymmetric) {
  Tensor a = random_matrix(1, 7, 20), b = random_matrix(1, 7, 21);
  Tensor va = Tensor::vector(as_vec(a)), vb = Tensor::vector(as_vec(b));
  auto ab = as_vec(pair_difference(va, vb)), ba = as_vec(pair_difference(vb, va));
  for (std::size_t i = 0; i < ab.size(); ++i) EXPECT_EQ(ab[i], -ba[i]);
}

TEST(PairDifference, LengthMismatchRejected) {
  EXPECT_THROW(pair_difference(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), ShapeError);
}

TEST(PairDifference, SwappedSentencesNegateEncodedDifference) {
  EncoderConfig c = tiny_config();
  Rng rng(7);
  EncoderParams p = EncoderParams::init(c, rng);
  Tensor s1 = random_matrix(4, 6, 30), s2 = random_matrix(4, 7, 31);
  Tensor v1 = encode_sentence(s1, c, p, Mode::eval), v2 = encode_sentence(s2, c, p, Mode::eval);
  auto d12 = as_vec(pair_difference(v1, v2)), d21 = as_vec(pair_difference(v2, v1));
  for (std::size_t i = 0; i < d12.size(); ++i) EXPECT_EQ(d12[i], -d21[i]);
}
