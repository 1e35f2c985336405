#pragma once

// Forward ops with their recorded backward rules. Matrices are row-major;
// a "k x L" map stores channel f at position j in values[f * L + j].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "deepparaphrase/errors.hpp"
#include "deepparaphrase/rng.hpp"
#include "deepparaphrase/tensor.hpp"

namespace dpp {

enum class Activation { none, relu, sigmoid };
enum class Mode { train, eval };

inline constexpr double kBceClamp = 1e-7;

namespace detail {

inline void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* arg) {
  if (!t.defined() || t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + arg + " must have rank " + std::to_string(rank) + ", got " +
                     (t.defined() ? shape_string(t.shape()) : std::string("undefined")));
  }
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.size());
  auto in = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [deriv](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * deriv(p.value[i], n.value[i]);
  });
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
    for (auto& p : n.parents) {
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i];
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
    detail::Node& pa = *n.parents[0];
    detail::Node& pb = *n.parents[1];
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += n.grad[i];
      if (pb.requires_grad) pb.grad[i] -= n.grad[i];
    }
  });
}

// Elementwise product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
    detail::Node& pa = *n.parents[0];
    detail::Node& pb = *n.parents[1];
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += n.grad[i] * pb.value[i];
      if (pb.requires_grad) pb.grad[i] += n.grad[i] * pa.value[i];
    }
  });
}

inline Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](detail::Node& n) {
    detail::Node& p = *n.parents[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * factor;
  });
}

inline Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return make_result({1}, {total}, {a}, [](detail::Node& n) {
    detail::Node& p = *n.parents[0];
    for (double& g : p.grad) g += n.grad[0];
  });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return detail::sigmoid(v); }, [](double, double out) { return out * (1.0 - out); });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::tanh(v); }, [](double, double out) { return 1.0 - out * out; });
}

// Subgradient 0 at the kink.
inline Tensor abs(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::fabs(v); },
      [](double in, double) { return in > 0.0 ? 1.0 : (in < 0.0 ? -1.0 : 0.0); });
}

inline Tensor activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::relu: return relu(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::none: break;
  }
  return x;
}

// weights (m x n) times x (n).
inline Tensor matvec(const Tensor& weights, const Tensor& x) {
  detail::require_rank(weights, 2, "matvec", "weights");
  detail::require_rank(x, 1, "matvec", "input");
  const std::size_t rows = weights.dim(0), cols = weights.dim(1);
  if (x.dim(0) != cols) {
    throw ShapeError("matvec: weights " + shape_string(weights.shape()) + " cannot multiply input " +
                     shape_string(x.shape()));
  }
  std::vector<double> out(rows, 0.0);
  auto w = weights.values();
  auto in = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += w[r * cols + c] * in[c];
    out[r] = acc;
  }
  return make_result({rows}, std::move(out), {weights, x}, [rows, cols](detail::Node& n) {
    detail::Node& pw = *n.parents[0];
    detail::Node& px = *n.parents[1];
    for (std::size_t r = 0; r < rows; ++r) {
      const double g = n.grad[r];
      if (g == 0.0) continue;
      for (std::size_t c = 0; c < cols; ++c) {
        if (pw.requires_grad) pw.grad[r * cols + c] += g * px.value[c];
        if (px.requires_grad) px.grad[c] += g * pw.value[r * cols + c];
      }
    }
  });
}

inline Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias, Activation act) {
  detail::require_rank(bias, 1, "dense", "bias");
  if (weights.rank() == 2 && bias.dim(0) != weights.dim(0)) {
    throw ShapeError("dense: bias " + shape_string(bias.shape()) + " does not match weights " +
                     shape_string(weights.shape()));
  }
  return activate(add(matvec(weights, input), bias), act);
}

// Valid 1-D convolution of a d x m input with k filters of shape d x p.
inline Tensor conv1d(const Tensor& input, const Tensor& filters, const Tensor& bias) {
  detail::require_rank(input, 2, "conv1d", "input");
  detail::require_rank(filters, 3, "conv1d", "filters");
  detail::require_rank(bias, 1, "conv1d", "bias");
  const std::size_t depth = input.dim(0), len = input.dim(1);
  const std::size_t k = filters.dim(0), width = filters.dim(2);
  if (filters.dim(1) != depth) {
    throw ShapeError("conv1d: filter depth " + std::to_string(filters.dim(1)) + " does not match input rows " +
                     std::to_string(depth) + " (input " + shape_string(input.shape()) + ", filters " +
                     shape_string(filters.shape()) + ")");
  }
  if (bias.dim(0) != k) {
    throw ShapeError("conv1d: bias " + shape_string(bias.shape()) + " for " + std::to_string(k) + " filters");
  }
  if (len < width) {
    throw ShapeError("conv1d: sequence length " + std::to_string(len) + " shorter than filter width " +
                     std::to_string(width));
  }
  const std::size_t out_len = len - width + 1;
  auto x = input.values();
  auto w = filters.values();
  auto b = bias.values();
  std::vector<double> out(k * out_len);
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t j = 0; j < out_len; ++j) {
      double acc = b[f];
      for (std::size_t r = 0; r < depth; ++r) {
        const double* wrow = &w[(f * depth + r) * width];
        const double* xrow = &x[r * len + j];
        for (std::size_t o = 0; o < width; ++o) acc += wrow[o] * xrow[o];
      }
      out[f * out_len + j] = acc;
    }
  }
  return make_result({k, out_len}, std::move(out), {input, filters, bias},
                     [k, depth, len, width, out_len](detail::Node& n) {
                       detail::Node& px = *n.parents[0];
                       detail::Node& pw = *n.parents[1];
                       detail::Node& pb = *n.parents[2];
                       for (std::size_t f = 0; f < k; ++f) {
                         for (std::size_t j = 0; j < out_len; ++j) {
                           const double g = n.grad[f * out_len + j];
                           if (g == 0.0) continue;
                           if (pb.requires_grad) pb.grad[f] += g;
                           for (std::size_t r = 0; r < depth; ++r) {
                             for (std::size_t o = 0; o < width; ++o) {
                               const std::size_t wi = (f * depth + r) * width + o;
                               const std::size_t xi = r * len + j + o;
                               if (pw.requires_grad) pw.grad[wi] += g * px.value[xi];
                               if (px.requires_grad) px.grad[xi] += g * pw.value[wi];
                             }
                           }
                         }
                       }
                     });
}

// Window-2 stride-2 max over the last axis; a trailing odd element passes through.
inline Tensor halving_max_pool(const Tensor& input) {
  detail::require_rank(input, 2, "halving_max_pool", "input");
  const std::size_t k = input.dim(0), len = input.dim(1);
  const std::size_t out_len = (len + 1) / 2;
  auto x = input.values();
  std::vector<double> out(k * out_len);
  std::vector<std::size_t> argmax(k * out_len);
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t j = 0; j < out_len; ++j) {
      std::size_t best = f * len + 2 * j;
      if (2 * j + 1 < len && x[best + 1] > x[best]) ++best;
      out[f * out_len + j] = x[best];
      argmax[f * out_len + j] = best;
    }
  }
  return make_result({k, out_len}, std::move(out), {input}, [argmax = std::move(argmax)](detail::Node& n) {
    detail::Node& p = *n.parents[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[argmax[i]] += n.grad[i];
  });
}

// Row-wise maximum of a k x L map; ties route the gradient to the first maximum.
inline Tensor global_max_pool(const Tensor& input) {
  detail::require_rank(input, 2, "global_max_pool", "input");
  const std::size_t k = input.dim(0), len = input.dim(1);
  auto x = input.values();
  std::vector<double> out(k);
  std::vector<std::size_t> argmax(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t best = f * len;
    for (std::size_t j = 1; j < len; ++j) {
      if (x[f * len + j] > x[best]) best = f * len + j;
    }
    out[f] = x[best];
    argmax[f] = best;
  }
  return make_result({k}, std::move(out), {input}, [argmax = std::move(argmax)](detail::Node& n) {
    detail::Node& p = *n.parents[0];
    for (std::size_t f = 0; f < n.grad.size(); ++f) p.grad[argmax[f]] += n.grad[f];
  });
}

// Joins k x L_i maps along the sequence axis into k x sum(L_i).
inline Tensor concat_columns(const std::vector<Tensor>& maps) {
  if (maps.empty()) throw ShapeError("concat_columns: no inputs");
  const std::size_t k = maps.front().dim(0);
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& m : maps) {
    detail::require_rank(m, 2, "concat_columns", "input");
    if (m.dim(0) != k) {
      throw ShapeError("concat_columns: channel mismatch " + shape_string(maps.front().shape()) + " vs " +
                       shape_string(m.shape()));
    }
    offsets.push_back(total);
    total += m.dim(1);
  }
  std::vector<double> out(k * total);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const std::size_t len = maps[i].dim(1);
    for (std::size_t f = 0; f < k; ++f) {
      for (std::size_t j = 0; j < len; ++j) out[f * total + offsets[i] + j] = maps[i].at(f, j);
    }
  }
  return make_result({k, total}, std::move(out), maps, [k, total, offsets](detail::Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      detail::Node& p = *n.parents[i];
      if (!p.requires_grad) continue;
      const std::size_t len = p.shape[1];
      for (std::size_t f = 0; f < k; ++f) {
        for (std::size_t j = 0; j < len; ++j) p.grad[f * len + j] += n.grad[f * total + offsets[i] + j];
      }
    }
  });
}

// Joins rank-1 tensors end to end.
inline Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::vector<double> out;
  for (const auto& p : parts) {
    detail::require_rank(p, 1, "concat", "input");
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  const std::size_t total = out.size();
  return make_result({total}, std::move(out), parts, [](detail::Node& n) {
    std::size_t offset = 0;
    for (auto& p : n.parents) {
      if (p->requires_grad) {
        for (std::size_t i = 0; i < p->value.size(); ++i) p->grad[i] += n.grad[offset + i];
      }
      offset += p->value.size();
    }
  });
}

// Column j of a k x L map as a length-k vector.
inline Tensor column(const Tensor& map, std::size_t j) {
  detail::require_rank(map, 2, "column", "input");
  const std::size_t k = map.dim(0), len = map.dim(1);
  if (j >= len) throw ShapeError("column: index " + std::to_string(j) + " out of range for " + shape_string(map.shape()));
  std::vector<double> out(k);
  for (std::size_t f = 0; f < k; ++f) out[f] = map.at(f, j);
  return make_result({k}, std::move(out), {map}, [j, len](detail::Node& n) {
    detail::Node& p = *n.parents[0];
    for (std::size_t f = 0; f < n.grad.size(); ++f) p.grad[f * len + j] += n.grad[f];
  });
}

inline Tensor transpose(const Tensor& m) {
  detail::require_rank(m, 2, "transpose", "input");
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = m.at(r, c);
  }
  return make_result({cols, rows}, std::move(out), {m}, [rows, cols](detail::Node& n) {
    detail::Node& p = *n.parents[0];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) p.grad[r * cols + c] += n.grad[c * rows + r];
    }
  });
}

// a^T b for a (d x m), b (d x n): the m x n matrix of column dot products.
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  detail::require_rank(a, 2, "matmul_tn", "lhs");
  detail::require_rank(b, 2, "matmul_tn", "rhs");
  const std::size_t depth = a.dim(0), m = a.dim(1), n = b.dim(1);
  if (b.dim(0) != depth) {
    throw ShapeError("matmul_tn: embedding dimension mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < depth; ++r) acc += av[r * m + i] * bv[r * n + j];
      out[i * n + j] = acc;
    }
  }
  return make_result({m, n}, std::move(out), {a, b}, [depth, m, n](detail::Node& node) {
    detail::Node& pa = *node.parents[0];
    detail::Node& pb = *node.parents[1];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double g = node.grad[i * n + j];
        if (g == 0.0) continue;
        for (std::size_t r = 0; r < depth; ++r) {
          if (pa.requires_grad) pa.grad[r * m + i] += g * pb.value[r * n + j];
          if (pb.requires_grad) pb.grad[r * n + j] += g * pa.value[r * m + i];
        }
      }
    }
  });
}

// Scales every column of a d x m matrix to unit length; zero columns stay zero.
inline Tensor normalize_columns(const Tensor& x) {
  detail::require_rank(x, 2, "normalize_columns", "input");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<double> norms(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) norms[c] += x.at(r, c) * x.at(r, c);
  }
  for (double& v : norms) v = std::sqrt(v);
  std::vector<double> out(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (norms[c] > 0.0) out[r * cols + c] = x.at(r, c) / norms[c];
    }
  }
  return make_result(x.shape(), std::move(out), {x}, [rows, cols, norms](detail::Node& n) {
    detail::Node& p = *n.parents[0];
    for (std::size_t c = 0; c < cols; ++c) {
      if (norms[c] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t r = 0; r < rows; ++r) dot += n.grad[r * cols + c] * n.value[r * cols + c];
      for (std::size_t r = 0; r < rows; ++r) {
        p.grad[r * cols + c] += (n.grad[r * cols + c] - n.value[r * cols + c] * dot) / norms[c];
      }
    }
  });
}

// Looks up rows of a V x d table and lays them out as the columns of a d x m
// matrix. Rows listed in frozen_row receive no gradient.
inline Tensor gather_columns(const Tensor& table, const std::vector<std::size_t>& rows,
                             std::size_t frozen_row = std::numeric_limits<std::size_t>::max()) {
  detail::require_rank(table, 2, "gather_columns", "table");
  if (rows.empty()) throw ShapeError("gather_columns: empty index list");
  const std::size_t vocab = table.dim(0), depth = table.dim(1), m = rows.size();
  auto tv = table.values();
  std::vector<double> out(depth * m);
  for (std::size_t j = 0; j < m; ++j) {
    if (rows[j] >= vocab) throw ShapeError("gather_columns: row " + std::to_string(rows[j]) + " out of range");
    for (std::size_t r = 0; r < depth; ++r) out[r * m + j] = tv[rows[j] * depth + r];
  }
  return make_result({depth, m}, std::move(out), {table}, [rows, depth, m, frozen_row](detail::Node& n) {
    detail::Node& p = *n.parents[0];
    for (std::size_t j = 0; j < m; ++j) {
      if (rows[j] == frozen_row) continue;
      for (std::size_t r = 0; r < depth; ++r) p.grad[rows[j] * depth + r] += n.grad[r * m + j];
    }
  });
}

// Inverted dropout: train mode zeroes each element with probability rate and
// scales survivors by 1/(1-rate). The mask is a pure function of the seed.
inline Tensor dropout(const Tensor& input, double rate, Mode mode, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ShapeError("dropout: rate must lie in [0,1), got " + std::to_string(rate));
  if (mode == Mode::eval || rate == 0.0) return input;
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(input.size());
  for (double& m : mask) m = uniform01(rng) < rate ? 0.0 : keep_scale;
  std::vector<double> out(input.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = input[i] * mask[i];
  return make_result(input.shape(), std::move(out), {input}, [mask = std::move(mask)](detail::Node& n) {
    detail::Node& p = *n.parents[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * mask[i];
  });
}

// Binary cross-entropy against a 0/1 label, prediction clamped to [eps, 1-eps].
inline Tensor bce_loss(const Tensor& prediction, int label) {
  if (label != 0 && label != 1) throw ShapeError("bce_loss: label must be 0 or 1, got " + std::to_string(label));
  if (prediction.size() != 1) throw ShapeError("bce_loss: prediction must be a scalar");
  const double raw = prediction.item();
  const double p = std::clamp(raw, kBceClamp, 1.0 - kBceClamp);
  const double loss = label == 1 ? -std::log(p) : -std::log(1.0 - p);
  const bool clamped = p != raw;
  return make_result({1}, {loss}, {prediction}, [label, p, clamped](detail::Node& n) {
    if (clamped) return;
    detail::Node& parent = *n.parents[0];
    parent.grad[0] += n.grad[0] * (label == 1 ? -1.0 / p : 1.0 / (1.0 - p));
  });
}

// Cosine of two equal-length vectors; 0 (with zero gradient) if either is zero.
inline Tensor cosine(const Tensor& a, const Tensor& b) {
  detail::require_rank(a, 1, "cosine", "lhs");
  detail::require_same_shape(a, b, "cosine");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  const bool degenerate = na == 0.0 || nb == 0.0;
  const double value = degenerate ? 0.0 : dot / (na * nb);
  return make_result({1}, {value}, {a, b}, [degenerate, value, na, nb](detail::Node& n) {
    if (degenerate) return;
    detail::Node& pa = *n.parents[0];
    detail::Node& pb = *n.parents[1];
    const double g = n.grad[0];
    for (std::size_t i = 0; i < pa.value.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += g * (pb.value[i] / (na * nb) - value * pa.value[i] / (na * na));
      if (pb.requires_grad) pb.grad[i] += g * (pa.value[i] / (na * nb) - value * pb.value[i] / (nb * nb));
    }
  });
}

}  // namespace dpp
