#include "lrisk/metrics.hpp"

#include <cmath>
#include <fstream>

#include "csv.hpp"
#include "lrisk/error.hpp"

namespace lrisk {

ConfusionMatrix::ConfusionMatrix(std::size_t k, std::vector<std::string> names)
    : k(k), counts(k * k, 0), class_names(std::move(names)) {
  if (class_names.empty())
    for (std::size_t i = 0; i < k; ++i) class_names.push_back("class" + std::to_string(i));
  require(class_names.size() == k, "class name count does not match K");
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (auto v : counts) t += v;
  return t;
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> truths,
                          std::size_t k, std::vector<std::string> class_names) {
  require(predictions.size() == truths.size(), "prediction and truth lists differ in length");
  ConfusionMatrix c(k, std::move(class_names));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i], t = truths[i];
    require(p >= 0 && static_cast<std::size_t>(p) < k && t >= 0 && static_cast<std::size_t>(t) < k,
            "class index out of range");
    ++c.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
  }
  return c;
}

ClassTally tally(const ConfusionMatrix& c, std::size_t cls) {
  require(cls < c.k, "class index out of range");
  ClassTally t;
  const std::int64_t total = c.total();
  t.tp = c.at(cls, cls);
  for (std::size_t j = 0; j < c.k; ++j) {
    if (j == cls) continue;
    t.fp += c.at(j, cls);
    t.fn += c.at(cls, j);
  }
  t.tn = total - t.tp - t.fp - t.fn;
  return t;
}

namespace {

Score ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

}  // namespace

Score precision(const ConfusionMatrix& c, std::size_t cls) {
  const auto t = tally(c, cls);
  return ratio(t.tp, t.tp + t.fp);
}

Score recall(const ConfusionMatrix& c, std::size_t cls) {
  const auto t = tally(c, cls);
  return ratio(t.tp, t.tp + t.fn);
}

Score f_measure(const ConfusionMatrix& c, std::size_t cls) {
  const Score p = precision(c, cls);
  const Score r = recall(c, cls);
  const double sum = p.value + r.value;
  if (sum == 0.0) return {0.0, true};
  return {2.0 * p.value * r.value / sum, p.degenerate || r.degenerate};
}

double accuracy(const ConfusionMatrix& c) {
  const std::int64_t total = c.total();
  require(total > 0, "accuracy of an empty confusion matrix");
  std::int64_t trace = 0;
  for (std::size_t i = 0; i < c.k; ++i) trace += c.at(i, i);
  return static_cast<double>(trace) / static_cast<double>(total);
}

Score rk(const ConfusionMatrix& c) {
  require(c.total() > 0, "R_K of an empty confusion matrix");
  const std::size_t k = c.k;
  // Numerator: sum over k, l, m of C_kk C_lm - C_kl C_mk.
  std::int64_t num = 0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t l = 0; l < k; ++l)
      for (std::size_t m = 0; m < k; ++m) num += c.at(a, a) * c.at(l, m) - c.at(a, l) * c.at(m, a);

  // Denominator factors: sum_k (sum_l C_kl)(sum_{k' != k} sum_l' C_k'l') and
  // the same with rows and columns exchanged.
  std::int64_t rows = 0, cols = 0;
  for (std::size_t a = 0; a < k; ++a) {
    std::int64_t row_a = 0, col_a = 0, row_rest = 0, col_rest = 0;
    for (std::size_t l = 0; l < k; ++l) {
      row_a += c.at(a, l);
      col_a += c.at(l, a);
    }
    for (std::size_t b = 0; b < k; ++b) {
      if (b == a) continue;
      for (std::size_t l = 0; l < k; ++l) {
        row_rest += c.at(b, l);
        col_rest += c.at(l, b);
      }
    }
    rows += row_a * row_rest;
    cols += col_a * col_rest;
  }
  if (rows == 0 || cols == 0) return {0.0, true};
  return {static_cast<double>(num) /
              (std::sqrt(static_cast<double>(rows)) * std::sqrt(static_cast<double>(cols))),
          false};
}

std::string metrics_csv(const ConfusionMatrix& c, const std::vector<std::string>& comments) {
  using csv::format_double;
  std::string s;
  for (const auto& line : comments) s += "# " + line + "\n";
  for (std::size_t t = 0; t < c.k; ++t) {
    s += "# confusion " + c.class_names[t] + ":";
    for (std::size_t p = 0; p < c.k; ++p) s += " " + std::to_string(c.at(t, p));
    s += "\n";
  }
  s += "name,precision,recall,f_measure,value\n";
  for (std::size_t k = 0; k < c.k; ++k)
    s += c.class_names[k] + "," + format_double(precision(c, k).value) + "," +
         format_double(recall(c, k).value) + "," + format_double(f_measure(c, k).value) + ",\n";
  s += "accuracy,,,," + format_double(c.total() > 0 ? accuracy(c) : 0.0) + "\n";
  s += "rk,,,," + format_double(c.total() > 0 ? rk(c).value : 0.0) + "\n";
  return s;
}

void write_metrics_csv(const ConfusionMatrix& c, const std::filesystem::path& path,
                       const std::vector<std::string>& comments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << metrics_csv(c, comments);
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

}  // namespace lrisk
