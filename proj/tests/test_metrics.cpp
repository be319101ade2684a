#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "lrisk/metrics.hpp"
#include "oracles.hpp"

using namespace lrisk;

namespace {

ConfusionMatrix from_rows(std::size_t k, std::vector<std::int64_t> counts) {
  ConfusionMatrix c(k);
  c.counts = std::move(counts);
  return c;
}

ConfusionMatrix random_matrix(std::size_t k, std::mt19937_64& rng, int hi = 50) {
  std::uniform_int_distribution<int> d(0, hi);
  ConfusionMatrix c(k);
  for (auto& v : c.counts) v = d(rng);
  return c;
}

// Multiclass correlation from row and column marginals.
double rk_marginals(const ConfusionMatrix& c) {
  double s = 0.0, trace = 0.0, pt = 0.0, pp = 0.0, tt = 0.0;
  for (std::size_t i = 0; i < c.k; ++i) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < c.k; ++j) {
      row += static_cast<double>(c.at(i, j));
      col += static_cast<double>(c.at(j, i));
    }
    trace += static_cast<double>(c.at(i, i));
    s += row;
    pt += row * col;
    pp += col * col;
    tt += row * row;
  }
  const double den = std::sqrt((s * s - pp) * (s * s - tt));
  return den == 0.0 ? 0.0 : (trace * s - pt) / den;
}

}  // namespace

TEST_CASE("confusion examples") {
  const std::vector<int> t = {0, 1, 2};
  const ConfusionMatrix diag = confusion(t, t, 3);
  CHECK(diag.counts == std::vector<std::int64_t>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  const std::vector<int> zeros = {0, 0, 0};
  const ConfusionMatrix col = confusion(zeros, t, 3);
  CHECK(col.counts == std::vector<std::int64_t>{1, 0, 0, 1, 0, 0, 1, 0, 0});
  const ConfusionMatrix empty = confusion(std::vector<int>{}, std::vector<int>{}, 3);
  CHECK(empty.total() == 0);
  CHECK(empty.counts == std::vector<std::int64_t>(9, 0));
  CHECK(diag.class_names[2] == "class2");
  CHECK_THROWS(confusion(std::vector<int>{3}, std::vector<int>{0}, 3));
  CHECK_THROWS(confusion(std::vector<int>{0, 1}, std::vector<int>{0}, 3));
}

TEST_CASE("precision, recall and F-measure") {
  // class 0: TP 3, FP 1, FN 1
  const ConfusionMatrix c = from_rows(2, {3, 1, 1, 5});
  CHECK(precision(c, 0).value == 0.75);
  CHECK(recall(c, 0).value == 0.75);
  CHECK_FALSE(precision(c, 0).degenerate);
  const ClassTally t = tally(c, 0);
  CHECK(t.tp == 3);
  CHECK(t.fp == 1);
  CHECK(t.fn == 1);
  CHECK(t.tn == 5);

  const ConfusionMatrix half = from_rows(2, {1, 1, 1, 1});
  CHECK(f_measure(half, 0).value == doctest::Approx(0.5).epsilon(1e-15));

  const ConfusionMatrix absent = from_rows(3, {4, 1, 0, 2, 3, 0, 0, 0, 0});
  CHECK(precision(absent, 2).value == 0.0);
  CHECK(precision(absent, 2).degenerate);
  CHECK(recall(absent, 2).value == 0.0);
  CHECK(recall(absent, 2).degenerate);
  CHECK(f_measure(absent, 2).value == 0.0);
  CHECK(f_measure(absent, 2).degenerate);
}

TEST_CASE("accuracy") {
  CHECK(accuracy(from_rows(3, {60, 0, 0, 0, 120, 0, 0, 0, 180})) == 1.0);
  CHECK(accuracy(from_rows(3, {0, 5, 5, 5, 0, 5, 5, 5, 0})) == 0.0);
  const ConfusionMatrix c = from_rows(3, {28, 2, 0, 3, 55, 2, 1, 9, 80});
  CHECK(c.total() == 180);
  CHECK(accuracy(c) == doctest::Approx(163.0 / 180.0).epsilon(1e-15));
  CHECK(std::round(accuracy(c) * 1000.0) / 1000.0 == 0.906);
  CHECK(std::abs(accuracy(c) - 0.9056) < 5e-5);
}

TEST_CASE("rk of diagonal matrices is one") {
  CHECK(rk(from_rows(3, {60, 0, 0, 0, 120, 0, 0, 0, 180})).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rk(from_rows(3, {1, 0, 0, 0, 1, 0, 0, 0, 1})).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rk(from_rows(2, {7, 0, 0, 3})).value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rk with K=2 equals the Matthews correlation") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const ConfusionMatrix c = random_matrix(2, rng);
    const double tp = static_cast<double>(c.at(0, 0)), fn = static_cast<double>(c.at(0, 1));
    const double fp = static_cast<double>(c.at(1, 0)), tn = static_cast<double>(c.at(1, 1));
    const Score r = rk(c);
    CHECK(std::abs(r.value - oracle::mcc(tp, fn, fp, tn)) < 1e-12);
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("rk matches the marginal closed form for K=3") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    const ConfusionMatrix c = random_matrix(3, rng);
    CHECK(std::abs(rk(c).value - rk_marginals(c)) < 1e-12);
  }
}

TEST_CASE("rk of a rank-one matrix is zero") {
  CHECK(std::abs(rk(from_rows(3, std::vector<std::int64_t>(9, 4))).value) < 1e-12);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> d(1, 9);
  for (int i = 0; i < 100; ++i) {
    std::int64_t r[3], s[3];
    for (int j = 0; j < 3; ++j) {
      r[j] = d(rng);
      s[j] = d(rng);
    }
    ConfusionMatrix c(3);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t p = 0; p < 3; ++p) c.at(t, p) = r[t] * s[p];
    CHECK(std::abs(rk(c).value) < 1e-12);
  }
}

TEST_CASE("rk degenerate cases are flagged") {
  const Score one_column = rk(from_rows(3, {5, 0, 0, 4, 0, 0, 3, 0, 0}));
  CHECK(one_column.value == 0.0);
  CHECK(one_column.degenerate);
  const Score one_row = rk(from_rows(3, {0, 0, 0, 2, 5, 1, 0, 0, 0}));
  CHECK(one_row.value == 0.0);
  CHECK(one_row.degenerate);
  CHECK_FALSE(rk(from_rows(2, {1, 0, 0, 1})).degenerate);
  // total > 0 is a precondition
  CHECK_THROWS(rk(ConfusionMatrix(3)));
  CHECK_THROWS(accuracy(ConfusionMatrix(3)));
}

TEST_CASE("metric properties over random matrices") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    const ConfusionMatrix c = random_matrix(3, rng, 30);
    if (c.total() == 0) continue;
    const double r = rk(c).value;
    CHECK(r >= -1.0 - 1e-12);
    CHECK(r <= 1.0 + 1e-12);

    // relabel classes by a rotation of rows and columns
    ConfusionMatrix p(3);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t q = 0; q < 3; ++q) p.at((t + 1) % 3, (q + 1) % 3) = c.at(t, q);
    CHECK(std::abs(rk(p).value - r) < 1e-12);

    ConfusionMatrix scaled = c;
    for (auto& v : scaled.counts) v *= 7;
    CHECK(std::abs(rk(scaled).value - r) < 1e-12);

    double weighted = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      for (const Score s : {precision(c, k), recall(c, k), f_measure(c, k)}) {
        CHECK(s.value >= 0.0);
        CHECK(s.value <= 1.0);
      }
      double row = 0.0;
      for (std::size_t q = 0; q < 3; ++q) row += static_cast<double>(c.at(k, q));
      weighted += recall(c, k).value * row;
    }
    CHECK(std::abs(accuracy(c) - weighted / static_cast<double>(c.total())) < 1e-12);
  }
}

TEST_CASE("metrics CSV layout") {
  const ConfusionMatrix c = confusion(std::vector<int>{0, 1, 2, 2}, std::vector<int>{0, 1, 2, 1}, 3,
                                      {"low", "medium", "high"});
  const std::string s = metrics_csv(c, {"model vgg_b_avg"});
  CHECK(s.rfind("# model vgg_b_avg\n", 0) == 0);
  CHECK(s.find("# confusion medium: 0 1 1\n") != std::string::npos);
  CHECK(s.find("name,precision,recall,f_measure,value\n") != std::string::npos);
  CHECK(s.find("low,1,1,1,\n") != std::string::npos);
  CHECK(s.find("medium,1,0.5,") != std::string::npos);
  CHECK(s.find("accuracy,,,,0.75\n") != std::string::npos);
  CHECK(s.find("\nrk,,,,") != std::string::npos);
}
