#pragma once

// Corpus loaders for the SemEval-2015 Twitter paraphrase files and the MSRP
// files, the pair-swap augmentation, padding and batching.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "deepparaphrase/embeddings.hpp"
#include "deepparaphrase/errors.hpp"
#include "deepparaphrase/rng.hpp"
#include "deepparaphrase/stat_features.hpp"
#include "deepparaphrase/tokenize.hpp"

namespace dpp {

enum class Split { train, dev, test };
enum class CorpusSource { twitter, msrp };

inline const char* to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

struct SentencePair {
  Tokens tokens1;
  Tokens tokens2;
  int label = 0;  // 1 paraphrase, 0 non-paraphrase
  bool debatable = false;
  bool augmented = false;
  std::string id;
};

struct Corpus {
  Split split = Split::train;
  CorpusSource source = CorpusSource::twitter;
  std::vector<SentencePair> pairs;
  std::size_t debatable_excluded = 0;
  std::vector<std::string> warnings;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  std::size_t positives() const {
    std::size_t n = 0;
    for (const auto& p : pairs) n += p.label == 1;
    return n;
  }
  std::size_t negatives() const { return size() - positives(); }
};

namespace detail {

inline std::string_view strip_bom(std::string_view line) {
  if (line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
  return line;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::optional<int> parse_small_int(std::string_view s) {
  s = trim(s);
  if (s.size() != 1 || !std::isdigit(static_cast<unsigned char>(s[0]))) return std::nullopt;
  return s[0] - '0';
}

struct TwitterLabel {
  bool debatable = false;
  int label = 0;
};

inline TwitterLabel twitter_label(std::string_view text, Split split, const std::string& name, std::size_t line_no) {
  text = trim(text);
  if (split == Split::test) {
    auto score = parse_small_int(text);
    if (!score || *score > 5) throw DataError(name, line_no, "unknown test label '" + std::string(text) + "'");
    if (*score >= 4) return {false, 1};
    if (*score <= 2) return {false, 0};
    return {true, 0};
  }
  // "(k, 5-k)": k of five annotators judged the pair a paraphrase.
  if (text.size() < 5 || text.front() != '(' || text.back() != ')') {
    throw DataError(name, line_no, "unknown label '" + std::string(text) + "'");
  }
  auto inner = text.substr(1, text.size() - 2);
  auto comma = inner.find(',');
  if (comma == std::string_view::npos) throw DataError(name, line_no, "unknown label '" + std::string(text) + "'");
  auto yes = parse_small_int(inner.substr(0, comma));
  auto no = parse_small_int(inner.substr(comma + 1));
  if (!yes || !no || *yes + *no != 5) throw DataError(name, line_no, "unknown label '" + std::string(text) + "'");
  if (*yes >= 3) return {false, 1};
  if (*yes <= 1) return {false, 0};
  return {true, 0};
}

}  // namespace detail

// Columns: topic id, topic name, sentence 1, sentence 2, label, [tags...].
// Debatable pairs are counted and dropped.
inline Corpus load_twitter(std::istream& in, Split split, const std::string& name = "<twitter>") {
  Corpus corpus;
  corpus.split = split;
  corpus.source = CorpusSource::twitter;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim_line_end(detail::strip_bom(line));
    if (view.empty()) continue;
    auto fields = detail::split_fields(view, '\t');
    if (fields.size() < 5) {
      throw DataError(name, line_no, "expected at least 5 tab-separated columns, found " + std::to_string(fields.size()));
    }
    auto label = detail::twitter_label(fields[4], split, name, line_no);
    if (label.debatable) {
      ++corpus.debatable_excluded;
      continue;
    }
    SentencePair pair;
    pair.tokens1 = tokenize(fields[2]);
    pair.tokens2 = tokenize(fields[3]);
    pair.label = label.label;
    pair.id = std::string(fields[0]) + ":" + std::to_string(line_no);
    corpus.pairs.push_back(std::move(pair));
  }
  if (in.bad()) throw DataError(name + ": read failure");
  corpus.warnings.push_back(name + ": " + std::to_string(corpus.size() + corpus.debatable_excluded) + " " +
                            to_string(split) + " pairs read, " + std::to_string(corpus.debatable_excluded) +
                            " debatable excluded, " + std::to_string(corpus.size()) + " usable");
  return corpus;
}

inline Corpus load_twitter(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open Twitter corpus file");
  return load_twitter(in, split, path);
}

// Columns: quality, #1 id, #2 id, #1 string, #2 string, after a header line.
inline Corpus load_msrp(std::istream& in, Split split, const std::string& name = "<msrp>") {
  Corpus corpus;
  corpus.split = split;
  corpus.source = CorpusSource::msrp;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim_line_end(detail::strip_bom(line));
    if (view.empty()) continue;
    auto fields = detail::split_fields(view, '\t');
    if (first) {
      first = false;
      if (!fields.empty() && detail::trim(fields[0]) == "Quality") continue;
      corpus.warnings.push_back(name + ": no header line, reading data from line 1");
    }
    if (fields.size() != 5) {
      throw DataError(name, line_no, "expected 5 tab-separated columns, found " + std::to_string(fields.size()));
    }
    auto quality = detail::parse_small_int(fields[0]);
    if (!quality || *quality > 1) {
      throw DataError(name, line_no, "quality must be 0 or 1, got '" + std::string(fields[0]) + "'");
    }
    SentencePair pair;
    pair.tokens1 = tokenize(fields[3]);
    pair.tokens2 = tokenize(fields[4]);
    pair.label = *quality;
    pair.id = std::string(detail::trim(fields[1])) + "-" + std::string(detail::trim(fields[2]));
    corpus.pairs.push_back(std::move(pair));
  }
  if (in.bad()) throw DataError(name + ": read failure");
  return corpus;
}

inline Corpus load_msrp(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open MSRP corpus file");
  return load_msrp(in, split, path);
}

inline SentencePair swap_pair(const SentencePair& pair) {
  SentencePair out = pair;
  std::swap(out.tokens1, out.tokens2);
  return out;
}

// Appends (S2, S1, label) for every training pair.
inline Corpus augment_swap(const Corpus& corpus) {
  if (corpus.split != Split::train) {
    throw std::invalid_argument(std::string("augment_swap: refusing to augment the ") + to_string(corpus.split) +
                                " split");
  }
  Corpus out = corpus;
  out.pairs.reserve(corpus.size() * 2);
  for (const auto& pair : corpus.pairs) {
    SentencePair swapped = swap_pair(pair);
    swapped.augmented = true;
    swapped.id += ":swap";
    out.pairs.push_back(std::move(swapped));
  }
  return out;
}

// Right-pads with PAD up to min_len tokens.
inline Tokens pad_tokens(const Tokens& tokens, std::size_t min_len) {
  Tokens out = tokens;
  while (out.size() < min_len) out.emplace_back(kPadToken);
  return out;
}

struct PaddedPair {
  std::size_t index = 0;  // position in the source corpus
  Tokens tokens1;
  Tokens tokens2;
};

using Batch = std::vector<PaddedPair>;

// Seeded shuffle for the train split, file order otherwise; the last batch
// may be short.
inline std::vector<Batch> pad_and_batch(const Corpus& corpus, std::size_t min_len, std::size_t batch_size,
                                        Rng& rng) {
  if (batch_size == 0) throw std::invalid_argument("pad_and_batch: batch size must be positive");
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (corpus.split == Split::train) shuffle(order, rng);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    Batch batch;
    for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) {
      const auto& pair = corpus.pairs[order[i]];
      batch.push_back({order[i], pad_tokens(pair.tokens1, min_len), pad_tokens(pair.tokens2, min_len)});
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

inline std::vector<Batch> pad_and_batch(const Corpus& corpus, std::size_t min_len, std::size_t batch_size,
                                        std::uint64_t seed) {
  Rng rng(seed);
  return pad_and_batch(corpus, min_len, batch_size, rng);
}

}  // namespace dpp
