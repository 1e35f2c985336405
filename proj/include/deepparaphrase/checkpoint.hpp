#pragma once

// Checkpoint container.
//
//   "DPPM"  u32 version  u32 section_count
//   section: u32 name_len, name bytes, u8 kind, payload
//     kind 0 (array): u32 rank, u64 extents[rank], f64 values[prod(extents)]
//     kind 1 (text):  u64 length, bytes
//
// All integers and floats are little-endian. Sections:
//   config              text, key=value model settings
//   meta                text, key=value (epoch, steps, vocab_size, embedding_dim)
//   rng                 text, training RNG state
//   idf                 text, "token<TAB>weight" lines plus a "\t<default>" line
//   param/<name>        array, one per model parameter
//   opt/<name>/eg2      array, Adadelta running mean of squared gradients
//   opt/<name>/edx2     array, Adadelta running mean of squared updates

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "deepparaphrase/errors.hpp"
#include "deepparaphrase/metrics.hpp"
#include "deepparaphrase/model.hpp"
#include "deepparaphrase/trainer.hpp"

namespace dpp {

inline constexpr char kCheckpointMagic[4] = {'D', 'P', 'P', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointArray {
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::map<std::string, std::string> texts;
  std::map<std::string, CheckpointArray> arrays;
  std::vector<std::string> order;  // section names as written

  ModelConfig config() const { return parse_settings(text("config")); }

  const std::string& text(const std::string& name) const {
    auto it = texts.find(name);
    if (it == texts.end()) throw DataError("checkpoint: missing section '" + name + "'");
    return it->second;
  }

  const CheckpointArray& array(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw DataError("checkpoint: missing section '" + name + "'");
    return it->second;
  }

  std::map<std::string, std::string> meta() const {
    std::map<std::string, std::string> out;
    std::istringstream in(text("meta"));
    std::string line;
    while (std::getline(in, line)) {
      auto eq = line.find('=');
      if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
  }
};

namespace detail {

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const std::string& s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }

 private:
  std::ostream& out_;
};

class ByteReader {
 public:
  ByteReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  std::uint8_t u8() {
    char c = 0;
    if (!in_.get(c)) truncated();
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::uint64_t n) {
    std::string s;
    // Grow in chunks so a corrupt length cannot trigger a huge allocation.
    while (n > 0) {
      const std::uint64_t chunk = std::min<std::uint64_t>(n, 1 << 20);
      const std::size_t start = s.size();
      s.resize(start + chunk);
      if (!in_.read(s.data() + start, static_cast<std::streamsize>(chunk))) truncated();
      n -= chunk;
    }
    return s;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

  [[noreturn]] void truncated() { throw DataError(name_ + ": truncated checkpoint"); }

 private:
  std::istream& in_;
  std::string name_;
};

inline std::string idf_to_text(const IdfTable& idf) {
  std::map<std::string, double> sorted(idf.weights().begin(), idf.weights().end());
  std::string out;
  for (const auto& [t, w] : sorted) out += t + '\t' + format_double(w) + '\n';
  out += '\t' + format_double(idf.default_weight()) + '\n';
  return out;
}

inline IdfTable idf_from_text(const std::string& text) {
  std::unordered_map<std::string, double> weights;
  double fallback = 1.0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw DataError("checkpoint: malformed idf line");
    double w = 0.0;
    if (!parse_double(std::string_view(line).substr(tab + 1), w)) throw DataError("checkpoint: malformed idf weight");
    if (tab == 0) fallback = w;
    else weights[line.substr(0, tab)] = w;
  }
  return IdfTable(std::move(weights), fallback);
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  detail::ByteWriter w(out);
  out.write(kCheckpointMagic, 4);
  w.u32(ckpt.version);
  w.u32(static_cast<std::uint32_t>(ckpt.order.size()));
  for (const auto& name : ckpt.order) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    if (auto it = ckpt.texts.find(name); it != ckpt.texts.end()) {
      w.u8(1);
      w.u64(it->second.size());
      w.bytes(it->second);
    } else {
      const CheckpointArray& a = ckpt.arrays.at(name);
      w.u8(0);
      w.u32(static_cast<std::uint32_t>(a.shape.size()));
      for (std::size_t extent : a.shape) w.u64(extent);
      for (double v : a.values) w.f64(v);
    }
  }
  if (!out) throw DataError("checkpoint: write failure");
}

inline Checkpoint read_checkpoint(std::istream& in, const std::string& name = "<checkpoint>") {
  detail::ByteReader r(in, name);
  char magic[4] = {};
  if (!in.read(magic, 4)) r.truncated();
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw DataError(name + ": not a checkpoint (bad magic)");
  Checkpoint ckpt;
  ckpt.version = r.u32();
  if (ckpt.version != kCheckpointVersion) {
    throw DataError(name + ": checkpoint version mismatch: expected " + std::to_string(kCheckpointVersion) +
                    ", found " + std::to_string(ckpt.version));
  }
  const std::uint32_t sections = r.u32();
  for (std::uint32_t s = 0; s < sections; ++s) {
    std::string section = r.bytes(r.u32());
    const std::uint8_t kind = r.u8();
    if (kind == 1) {
      ckpt.texts[section] = r.bytes(r.u64());
    } else if (kind == 0) {
      CheckpointArray a;
      const std::uint32_t rank = r.u32();
      if (rank == 0 || rank > 8) throw DataError(name + ": section '" + section + "' has invalid rank");
      std::uint64_t count = 1;
      for (std::uint32_t i = 0; i < rank; ++i) {
        a.shape.push_back(r.u64());
        if (a.shape.back() == 0 || a.shape.back() > (1ULL << 40)) {
          throw DataError(name + ": section '" + section + "' has an invalid extent");
        }
        count *= a.shape.back();
        if (count > (1ULL << 40)) throw DataError(name + ": section '" + section + "' is implausibly large");
      }
      for (std::uint64_t i = 0; i < count; ++i) a.values.push_back(r.f64());
      ckpt.arrays[section] = std::move(a);
    } else {
      throw DataError(name + ": section '" + section + "' has unknown kind " + std::to_string(kind));
    }
    ckpt.order.push_back(std::move(section));
  }
  if (!r.at_end()) throw DataError(name + ": trailing bytes after the last section");
  return ckpt;
}

// Captures model parameters, and optimizer/RNG state when a trainer is given.
inline Checkpoint make_checkpoint(const ParaphraseModel& model, const Trainer* trainer = nullptr) {
  Checkpoint ckpt;
  auto add_text = [&](const std::string& name, std::string text) {
    ckpt.texts[name] = std::move(text);
    ckpt.order.push_back(name);
  };
  auto add_array = [&](const std::string& name, const Shape& shape, std::vector<double> values) {
    ckpt.arrays[name] = {shape, std::move(values)};
    ckpt.order.push_back(name);
  };
  add_text("config", to_settings(model.config()));
  std::ostringstream meta;
  meta << "epoch=" << (trainer ? trainer->epoch() : 0) << "\nsteps=" << (trainer ? trainer->steps() : 0)
       << "\nvocab_size=" << model.embeddings().vocab.size()
       << "\nembedding_dim=" << model.embeddings().table.dimension << '\n';
  add_text("meta", meta.str());
  if (trainer) add_text("rng", rng_state(trainer->rng()));
  add_text("idf", detail::idf_to_text(model.idf()));
  const auto& params = model.parameters();
  for (const auto& [name, t] : params) add_array("param/" + name, t.shape(), {t.values().begin(), t.values().end()});
  if (trainer) {
    const auto& states = trainer->optimizer_states();
    for (std::size_t i = 0; i < params.size(); ++i) {
      add_array("opt/" + params[i].first + "/eg2", params[i].second.shape(), states[i].accum_grad_sq);
      add_array("opt/" + params[i].first + "/edx2", params[i].second.shape(), states[i].accum_update_sq);
    }
  }
  return ckpt;
}

// Copies checkpointed values into a model built from ckpt.config(), and into
// the trainer when one is given.
inline void restore_checkpoint(const Checkpoint& ckpt, ParaphraseModel& model, Trainer* trainer = nullptr) {
  auto meta = ckpt.meta();
  if (meta["vocab_size"] != std::to_string(model.embeddings().vocab.size())) {
    throw DataError("checkpoint: vocabulary size " + meta["vocab_size"] + " does not match loaded embeddings (" +
                    std::to_string(model.embeddings().vocab.size()) + ")");
  }
  model.set_idf(detail::idf_from_text(ckpt.text("idf")));
  auto& params = model.parameters();
  for (auto& [name, t] : params) {
    const CheckpointArray& a = ckpt.array("param/" + name);
    if (a.shape != t.shape()) {
      throw DataError("checkpoint: parameter " + name + " has shape " + shape_string(a.shape) + ", model expects " +
                      shape_string(t.shape()));
    }
    std::copy(a.values.begin(), a.values.end(), t.mutable_values().begin());
  }
  if (!trainer) return;
  auto& states = trainer->optimizer_states();
  for (std::size_t i = 0; i < params.size(); ++i) {
    states[i].accum_grad_sq = ckpt.array("opt/" + params[i].first + "/eg2").values;
    states[i].accum_update_sq = ckpt.array("opt/" + params[i].first + "/edx2").values;
  }
  restore_rng_state(trainer->rng(), ckpt.text("rng"));
  trainer->set_epoch(std::stoull(meta["epoch"]));
  trainer->set_steps(std::stoull(meta["steps"]));
}

inline void save_checkpoint(const std::string& path, const ParaphraseModel& model, const Trainer* trainer = nullptr) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path + ": cannot open checkpoint for writing");
  write_checkpoint(out, make_checkpoint(model, trainer));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open checkpoint");
  return read_checkpoint(in, path);
}

}  // namespace dpp
