#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lrisk {

/// K x K counts indexed [true][predicted].
struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::int64_t> counts;
  std::vector<std::string> class_names;

  explicit ConfusionMatrix(std::size_t k = 0, std::vector<std::string> names = {});

  std::int64_t& at(std::size_t truth, std::size_t predicted) { return counts[truth * k + predicted]; }
  std::int64_t at(std::size_t truth, std::size_t predicted) const {
    return counts[truth * k + predicted];
  }
  std::int64_t total() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> truths,
                          std::size_t k, std::vector<std::string> class_names = {});

struct ClassTally {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

ClassTally tally(const ConfusionMatrix& c, std::size_t cls);

/// A ratio that may have had a zero denominator, in which case value is 0
/// and `degenerate` is set.
struct Score {
  double value = 0.0;
  bool degenerate = false;
};

Score precision(const ConfusionMatrix& c, std::size_t cls);
Score recall(const ConfusionMatrix& c, std::size_t cls);
/// Harmonic mean of precision and recall.
Score f_measure(const ConfusionMatrix& c, std::size_t cls);
double accuracy(const ConfusionMatrix& c);

/// Gorodkin's K-category correlation coefficient, evaluated as the direct
/// triple sum over the confusion matrix.
Score rk(const ConfusionMatrix& c);

/// Rows: one per class (precision, recall, f_measure) then accuracy and rk.
std::string metrics_csv(const ConfusionMatrix& c, const std::vector<std::string>& comments = {});
void write_metrics_csv(const ConfusionMatrix& c, const std::filesystem::path& path,
                       const std::vector<std::string>& comments = {});

}  // namespace lrisk
