#pragma once

// Hand-crafted pair features.
//
// Feature order (msrp profile, 12 values):
//   0 tfidf_sim   1 bow_cosine   2 verb_sim   3 noun_sim   4 adj_sim
//   5 repr_cosine
//   6 unigram/S1  7 unigram/S2   8 bigram/S1  9 bigram/S2  10 trigram/S1  11 trigram/S2
// The twitter profile keeps repr_cosine and the six overlaps (7 values), in
// the same relative order. Swapping S1 and S2 exchanges each overlap /S1,/S2
// pair and leaves every other value unchanged.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "deepparaphrase/embeddings.hpp"
#include "deepparaphrase/errors.hpp"

namespace dpp {

enum class DatasetProfile { twitter, msrp };
enum class PosBucket { verb, noun, adj };

using Tokens = std::vector<std::string>;

inline constexpr std::size_t stat_feature_count(DatasetProfile profile) {
  return profile == DatasetProfile::twitter ? 7 : 12;
}

inline Tokens strip_padding(const Tokens& tokens) {
  Tokens out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (t != kPadToken) out.push_back(t);
  }
  return out;
}

namespace detail {

inline std::set<std::vector<std::string>> distinct_ngrams(const Tokens& tokens, std::size_t n) {
  std::set<std::vector<std::string>> grams;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) grams.emplace(tokens.begin() + i, tokens.begin() + i + n);
  return grams;
}

inline double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

inline std::unordered_map<std::string, double> counts(const Tokens& tokens) {
  std::unordered_map<std::string, double> out;
  for (const auto& t : tokens) out[t] += 1.0;
  return out;
}

inline double sparse_cosine(const std::unordered_map<std::string, double>& a,
                            const std::unordered_map<std::string, double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [t, v] : a) {
    na += v * v;
    auto it = b.find(t);
    if (it != b.end()) dot += v * it->second;
  }
  for (const auto& [t, v] : b) nb += v * v;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

}  // namespace detail

// Distinct common n-grams over distinct n-grams of each sentence, n = 1..3.
// Returns {uni/S1, uni/S2, bi/S1, bi/S2, tri/S1, tri/S2}; 0/0 counts as 0.
inline std::array<double, 6> ngram_overlap(const Tokens& tokens1, const Tokens& tokens2) {
  std::array<double, 6> out{};
  for (std::size_t n = 1; n <= 3; ++n) {
    auto a = detail::distinct_ngrams(tokens1, n);
    auto b = detail::distinct_ngrams(tokens2, n);
    std::size_t common = 0;
    for (const auto& g : a) common += b.count(g);
    out[2 * (n - 1)] = detail::ratio(common, a.size());
    out[2 * (n - 1) + 1] = detail::ratio(common, b.size());
  }
  return out;
}

// Smoothed inverse document frequency, idf(t) = ln((1+N)/(1+df(t))) + 1.
class IdfTable {
 public:
  IdfTable() = default;

  // Explicit weights; tokens not listed get default_weight.
  IdfTable(std::unordered_map<std::string, double> weights, double default_weight)
      : weights_(std::move(weights)), default_weight_(default_weight) {}

  static IdfTable build(const std::vector<Tokens>& documents) {
    std::unordered_map<std::string, std::size_t> df;
    for (const auto& doc : documents) {
      std::set<std::string> unique(doc.begin(), doc.end());
      for (const auto& t : unique) {
        if (t != kPadToken) ++df[t];
      }
    }
    const double n = static_cast<double>(documents.size());
    std::unordered_map<std::string, double> weights;
    for (const auto& [t, count] : df) weights[t] = std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0;
    return IdfTable(std::move(weights), std::log(1.0 + n) + 1.0);
  }

  double weight(const std::string& token) const {
    auto it = weights_.find(token);
    return it == weights_.end() ? default_weight_ : it->second;
  }

  const std::unordered_map<std::string, double>& weights() const { return weights_; }
  double default_weight() const { return default_weight_; }

 private:
  std::unordered_map<std::string, double> weights_;
  double default_weight_ = 1.0;
};

inline double tfidf_similarity(const Tokens& tokens1, const Tokens& tokens2, const IdfTable& idf) {
  auto a = detail::counts(tokens1);
  auto b = detail::counts(tokens2);
  for (auto& [t, v] : a) v *= idf.weight(t);
  for (auto& [t, v] : b) v *= idf.weight(t);
  return detail::sparse_cosine(a, b);
}

// Cosine of raw term-count vectors.
inline double bow_cosine(const Tokens& tokens1, const Tokens& tokens2) {
  return detail::sparse_cosine(detail::counts(tokens1), detail::counts(tokens2));
}

// File-backed stand-in for a POS tagger plus a lexical similarity resource.
class LexicalSimilarityProvider {
 public:
  // Tags: 'V' verb, 'N' noun, 'A' adjective, 'O' other.
  void set_tag(const std::string& token, char tag) { tags_[token] = tag; }

  void set_score(const std::string& a, const std::string& b, double score) { scores_[key(a, b)] = score; }

  char tag(const std::string& token) const {
    auto it = tags_.find(token);
    return it == tags_.end() ? 'O' : it->second;
  }

  double score(const std::string& a, const std::string& b) const {
    auto it = scores_.find(key(a, b));
    return it == scores_.end() ? 0.0 : it->second;
  }

  bool empty() const { return tags_.empty() && scores_.empty(); }

  void load_lexicon(std::istream& in, const std::string& name = "<lexicon>") {
    read_lines(in, name, [&](std::size_t line_no, const std::vector<std::string_view>& f) {
      if (f.size() != 2) throw DataError(name, line_no, "expected token<TAB>tag");
      if (f[1].size() != 1 || std::string_view("VNAO").find(f[1][0]) == std::string_view::npos) {
        throw DataError(name, line_no, "unknown POS tag '" + std::string(f[1]) + "' (expected V, N, A or O)");
      }
      set_tag(std::string(f[0]), f[1][0]);
    });
  }

  void load_scores(std::istream& in, const std::string& name = "<scores>") {
    read_lines(in, name, [&](std::size_t line_no, const std::vector<std::string_view>& f) {
      if (f.size() != 3) throw DataError(name, line_no, "expected token<TAB>token<TAB>score");
      double s = 0.0;
      if (!detail::parse_double(f[2], s) || !(s >= 0.0 && s <= 1.0)) {
        throw DataError(name, line_no, "score '" + std::string(f[2]) + "' is not a number in [0,1]");
      }
      const std::string a(f[0]), b(f[1]);
      auto it = scores_.find(key(a, b));
      if (it != scores_.end() && it->second != s) {
        throw DataError(name, line_no, "conflicting score for (" + a + ", " + b + ")");
      }
      set_score(a, b, s);
    });
  }

  static LexicalSimilarityProvider load(const std::string& lexicon_path, const std::string& scores_path) {
    LexicalSimilarityProvider provider;
    std::ifstream lex(lexicon_path);
    if (!lex) throw DataError(lexicon_path + ": cannot open POS lexicon");
    provider.load_lexicon(lex, lexicon_path);
    std::ifstream scores(scores_path);
    if (!scores) throw DataError(scores_path + ": cannot open pair-score file");
    provider.load_scores(scores, scores_path);
    return provider;
  }

 private:
  static std::string key(const std::string& a, const std::string& b) {
    return a < b ? a + '\t' + b : b + '\t' + a;
  }

  template <class Fn>
  static void read_lines(std::istream& in, const std::string& name, Fn&& fn) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view view = detail::trim_line_end(line);
      if (view.empty() || view.front() == '#') continue;
      fn(line_no, detail::split_fields(view, '\t'));
    }
    if (in.bad()) throw DataError(name + ": read failure");
  }

  std::unordered_map<std::string, char> tags_;
  std::unordered_map<std::string, double> scores_;
};

inline char bucket_tag(PosBucket bucket) {
  switch (bucket) {
    case PosBucket::verb: return 'V';
    case PosBucket::noun: return 'N';
    case PosBucket::adj: return 'A';
  }
  return 'O';
}

// Mean of the two directional max-alignment averages over the bucketed words.
inline double pos_bucket_similarity(const Tokens& tokens1, const Tokens& tokens2, PosBucket bucket,
                                    const LexicalSimilarityProvider& provider) {
  const char tag = bucket_tag(bucket);
  auto select = [&](const Tokens& tokens) {
    Tokens out;
    for (const auto& t : tokens) {
      if (provider.tag(t) == tag) out.push_back(t);
    }
    return out;
  };
  const Tokens a = select(tokens1), b = select(tokens2);
  if (a.empty() || b.empty()) return 0.0;
  auto directional = [&](const Tokens& from, const Tokens& to) {
    double total = 0.0;
    for (const auto& x : from) {
      double best = 0.0;
      for (const auto& y : to) best = std::max(best, provider.score(x, y));
      total += best;
    }
    return total / static_cast<double>(from.size());
  };
  return 0.5 * (directional(a, b) + directional(b, a));
}

// Cosine of two sentence vectors; 0 when either is the zero vector.
inline double repr_cosine(std::span<const double> v1, std::span<const double> v2) {
  if (v1.size() != v2.size()) throw ShapeError("repr_cosine: length mismatch");
  double dot = 0.0, n1 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < v1.size(); ++i) {
    dot += v1[i] * v2[i];
    n1 += v1[i] * v1[i];
    n2 += v2[i] * v2[i];
  }
  if (n1 == 0.0 || n2 == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(n1) * std::sqrt(n2)), -1.0, 1.0);
}

struct StatFeatureVector {
  DatasetProfile profile = DatasetProfile::twitter;
  std::optional<double> tfidf_sim;
  std::optional<double> bow_cosine;
  std::optional<double> verb_sim;
  std::optional<double> noun_sim;
  std::optional<double> adj_sim;
  double repr_cosine = 0.0;
  std::array<double, 6> overlap{};
  bool lexical_degraded = false;  // msrp profile built without lexical data

  // Present features in the documented order.
  std::vector<double> values() const {
    std::vector<double> out;
    for (const auto& f : {tfidf_sim, bow_cosine, verb_sim, noun_sim, adj_sim}) {
      if (f) out.push_back(*f);
    }
    out.push_back(repr_cosine);
    out.insert(out.end(), overlap.begin(), overlap.end());
    return out;
  }

  std::size_t size() const { return values().size(); }
};

// PAD tokens are removed before any statistic is computed. A null provider
// under the msrp profile zeroes the POS-bucket features and flags the vector.
inline StatFeatureVector build_features(const Tokens& tokens1, const Tokens& tokens2, double repr_cos,
                                        DatasetProfile profile, const IdfTable* idf = nullptr,
                                        const LexicalSimilarityProvider* provider = nullptr) {
  const Tokens a = strip_padding(tokens1), b = strip_padding(tokens2);
  StatFeatureVector out;
  out.profile = profile;
  out.repr_cosine = repr_cos;
  out.overlap = ngram_overlap(a, b);
  if (profile == DatasetProfile::msrp) {
    out.tfidf_sim = tfidf_similarity(a, b, idf ? *idf : IdfTable());
    out.bow_cosine = dpp::bow_cosine(a, b);
    if (provider && !provider->empty()) {
      out.verb_sim = pos_bucket_similarity(a, b, PosBucket::verb, *provider);
      out.noun_sim = pos_bucket_similarity(a, b, PosBucket::noun, *provider);
      out.adj_sim = pos_bucket_similarity(a, b, PosBucket::adj, *provider);
    } else {
      out.verb_sim = out.noun_sim = out.adj_sim = 0.0;
      out.lexical_degraded = true;
    }
  }
  return out;
}

}  // namespace dpp
