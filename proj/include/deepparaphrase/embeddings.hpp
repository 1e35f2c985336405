#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "deepparaphrase/errors.hpp"
#include "deepparaphrase/ops.hpp"
#include "deepparaphrase/rng.hpp"
#include "deepparaphrase/tensor.hpp"

namespace dpp {

// Reserved spellings; tokenize() never produces them because '<' is punctuation.
inline constexpr std::string_view kPadToken = "<<pad>>";
inline constexpr std::string_view kUnkToken = "<<unk>>";
inline constexpr std::uint64_t kUnkSeed = 0x5eed'0f'0000'0001ULL;
inline constexpr double kUnkInitRange = 0.05;

// Dense 0-based token index. PAD and UNK follow the regular tokens.
class Vocabulary {
 public:
  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

  explicit Vocabulary(const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) add(t);
    pad_ = add(std::string(kPadToken));
    unk_ = add(std::string(kUnkToken));
  }

  // Registers a token if new; returns its index either way.
  std::size_t add(const std::string& token) {
    auto [it, inserted] = index_.try_emplace(token, tokens_.size());
    if (inserted) tokens_.push_back(token);
    return it->second;
  }

  std::size_t index_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? unk_ : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::size_t size() const { return tokens_.size(); }
  std::size_t pad() const { return pad_; }
  std::size_t unk() const { return unk_; }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> tokens_;
  std::size_t pad_ = 0;
  std::size_t unk_ = 0;
};

struct EmbeddingTable {
  std::size_t dimension = 0;
  Tensor vectors;  // |vocab| x dimension
  bool trainable = false;

  std::span<const double> row(std::size_t index) const {
    return vectors.values().subspan(index * dimension, dimension);
  }
};

struct Embeddings {
  Vocabulary vocab;
  EmbeddingTable table;

  void set_trainable(bool trainable) {
    table.trainable = trainable;
    table.vectors = table.vectors.detach(trainable);
  }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t end = line.find(sep, start);
    if (end == std::string_view::npos) end = line.size();
    fields.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return fields;
}

inline bool parse_double(std::string_view text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::string_view trim_line_end(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\n')) line.remove_suffix(1);
  return line;
}

inline bool looks_like_count_header(const std::vector<std::string_view>& fields, std::size_t dim) {
  if (fields.size() != 2) return false;
  std::size_t count = 0, header_dim = 0;
  auto a = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), count);
  auto b = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), header_dim);
  return a.ec == std::errc() && b.ec == std::errc() && a.ptr == fields[0].data() + fields[0].size() &&
         b.ptr == fields[1].data() + fields[1].size() && header_dim == dim && dim != 1;
}

}  // namespace detail

// Reads "token v1 ... vd" lines. A leading word2vec-style "count dim" line is
// skipped; repeated tokens keep their first vector.
inline Embeddings load_pretrained(std::istream& in, std::size_t expected_dim, const std::string& name = "<stream>",
                                  std::uint64_t unk_seed = kUnkSeed) {
  if (expected_dim == 0) throw ShapeError("load_pretrained: embedding dimension must be positive");
  std::vector<std::string> tokens;
  std::vector<double> values;
  std::unordered_map<std::string, bool> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim_line_end(line);
    if (view.empty()) continue;
    auto fields = detail::split_fields(view, ' ');
    if (line_no == 1 && detail::looks_like_count_header(fields, expected_dim)) continue;
    if (fields.size() != expected_dim + 1) {
      throw DataError(name, line_no,
                      "expected " + std::to_string(expected_dim) + " values after the token, found " +
                          std::to_string(fields.size() - 1));
    }
    std::string token(fields[0]);
    if (token == kPadToken || token == kUnkToken) {
      throw DataError(name, line_no, "token '" + token + "' is reserved");
    }
    std::vector<double> row(expected_dim);
    for (std::size_t i = 0; i < expected_dim; ++i) {
      if (!detail::parse_double(fields[i + 1], row[i])) {
        throw DataError(name, line_no, "cannot parse value '" + std::string(fields[i + 1]) + "'");
      }
    }
    if (!seen.emplace(token, true).second) continue;
    tokens.push_back(std::move(token));
    values.insert(values.end(), row.begin(), row.end());
  }
  if (in.bad()) throw DataError(name + ": read failure");

  Embeddings out{Vocabulary(tokens), {}};
  values.resize(out.vocab.size() * expected_dim, 0.0);  // PAD row stays zero
  Rng rng(unk_seed);
  double* unk_row = &values[out.vocab.unk() * expected_dim];
  for (std::size_t i = 0; i < expected_dim; ++i) unk_row[i] = uniform(rng, -kUnkInitRange, kUnkInitRange);
  out.table.dimension = expected_dim;
  out.table.vectors = Tensor::from({out.vocab.size(), expected_dim}, std::move(values));
  return out;
}

inline Embeddings load_pretrained(const std::string& path, std::size_t expected_dim) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open embeddings file");
  return load_pretrained(in, expected_dim, path);
}

inline std::vector<std::size_t> token_indices(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::vector<std::size_t> rows;
  rows.reserve(tokens.size());
  for (const auto& t : tokens) rows.push_back(vocab.index_of(t));
  return rows;
}

// d x m matrix whose column j embeds token j; unknown tokens use the UNK row.
inline Tensor embed_sentence(const std::vector<std::string>& tokens, const Embeddings& emb) {
  if (tokens.empty()) throw ShapeError("embed_sentence: empty token sequence");
  return gather_columns(emb.table.vectors, token_indices(tokens, emb.vocab), emb.vocab.pad());
}

}  // namespace dpp
