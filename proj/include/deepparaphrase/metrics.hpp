#pragma once

#include <charconv>
#include <cstddef>
#include <iomanip>
#include <sstream>
#include <string>

namespace dpp {

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline double f1_score(double precision, double recall) {
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

struct EvaluationReport {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0, accuracy = 0.0;

  static EvaluationReport from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    EvaluationReport r{tp, fp, fn, tn};
    const auto ratio = [](std::size_t num, std::size_t den) {
      return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    r.precision = ratio(tp, tp + fp);
    r.recall = ratio(tp, tp + fn);
    r.f1 = f1_score(r.precision, r.recall);
    r.accuracy = ratio(tp + tn, tp + fp + fn + tn);
    return r;
  }

  std::size_t total() const { return tp + fp + fn + tn; }

  // Counts add; derived metrics are recomputed from the merged counts.
  EvaluationReport merged(const EvaluationReport& other) const {
    return from_counts(tp + other.tp, fp + other.fp, fn + other.fn, tn + other.tn);
  }

  // One metric=value per line.
  std::string to_kv() const {
    std::ostringstream os;
    os << "tp=" << tp << "\nfp=" << fp << "\nfn=" << fn << "\ntn=" << tn << "\nprecision=" << format_double(precision)
       << "\nrecall=" << format_double(recall) << "\nf1=" << format_double(f1)
       << "\naccuracy=" << format_double(accuracy) << '\n';
    return os.str();
  }

  std::string to_table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "            predicted+  predicted-\n";
    os << "actual+     " << std::setw(10) << tp << "  " << std::setw(10) << fn << '\n';
    os << "actual-     " << std::setw(10) << fp << "  " << std::setw(10) << tn << '\n';
    os << "precision " << precision << "  recall " << recall << "  f1 " << f1 << "  accuracy " << accuracy << '\n';
    return os.str();
  }
};

}  // namespace dpp
