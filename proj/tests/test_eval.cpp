#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "tibcad/error.hpp"
#include "tibcad/eval.hpp"
#include "tibcad/random.hpp"

using namespace tibcad;

namespace {

/// Scans with a mix of classes; feature 0 is `signal * label + noise`.
Dataset scan_dataset(std::uint64_t seed, double signal, int scans = 8, int perScan = 30) {
  Rng rng(seed);
  Dataset d;
  d.schema.names = {"f0", "f1"};
  for (int s = 0; s < scans; ++s)
    for (int i = 0; i < perScan; ++i) {
      const int label = (i % 3 == 0) ? 1 : 0;
      d.samples.push_back({"scan" + std::to_string(s), i, 0, 0, label,
                           {signal * label + rng.normal(), rng.normal()}});
    }
  return d;
}

} // namespace

TEST_SUITE("eval") {
  TEST_CASE("ROC of a small example") {
    const std::vector<double> s{0.9, 0.8, 0.7, 0.6};
    const std::vector<int> l{1, 0, 1, 0};
    const RocCurve r = roc(s, l);
    CHECK(r.auc == doctest::Approx(0.75));
    REQUIRE(r.points.size() == 5);
    CHECK(r.points.front().fpr == 0.0);
    CHECK(r.points.front().tpr == 0.0);
    CHECK(r.points[1].tpr == 0.5);
    CHECK(r.points[1].threshold == 0.9);
    CHECK(r.points[2].fpr == 0.5);
    CHECK(r.points.back().fpr == 1.0);
    CHECK(r.points.back().tpr == 1.0);
  }

  TEST_CASE("ties move together") {
    const std::vector<double> s{1, 1, 1, 0};
    const std::vector<int> l{1, 0, 1, 0};
    const RocCurve r = roc(s, l);
    REQUIRE(r.points.size() == 3);
    CHECK(r.points[1].tpr == 1.0);
    CHECK(r.points[1].fpr == 0.5);
    CHECK(r.auc == doctest::Approx(0.75));
    CHECK_THROWS_AS(roc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), DegenerateError);
  }

  TEST_CASE("AUC equals the Mann-Whitney statistic") {
    Rng rng(31);
    for (int t = 0; t < 100; ++t) {
      const int n = 5 + static_cast<int>(rng.uniform() * 60);
      std::vector<double> s;
      std::vector<int> l;
      for (int i = 0; i < n; ++i) {
        l.push_back(i < 2 ? i : (rng.uniform() < 0.4 ? 1 : 0));
        // Coarse scores force ties.
        s.push_back(std::round(rng.normal() * 3 + l.back()) / 2);
      }
      CHECK(std::abs(roc(s, l).auc - oracle::mann_whitney(s, l)) <= 1e-12);
    }
  }

  TEST_CASE("AUC is unchanged by a monotone transform") {
    Rng rng(32);
    std::vector<double> s, e;
    std::vector<int> l;
    for (int i = 0; i < 80; ++i) {
      l.push_back(i % 2);
      s.push_back(rng.normal() + 0.5 * l.back());
      e.push_back(std::exp(3 * s.back()) - 7);
    }
    CHECK(roc(s, l).auc == roc(e, l).auc);
  }

  TEST_CASE("operating threshold meets the specificity on negatives") {
    std::vector<double> s;
    std::vector<int> l;
    for (int i = 0; i < 40; ++i) {
      s.push_back(i);
      l.push_back(0);
    }
    s.push_back(100);
    l.push_back(1);
    const double t = operating_threshold(s, l, 0.95);
    int fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) fp += l[i] == 0 && s[i] >= t;
    CHECK(fp == 2);
    CHECK(t > 37.0);
    CHECK(t <= 38.0);
    CHECK(operating_threshold(s, l, 0.0) == -INFINITY);
    CHECK_THROWS_AS(operating_threshold(s, l, 1.5), ConfigError);
  }

  TEST_CASE("cross-validation with a perfect feature") {
    const Dataset d = scan_dataset(1, 20.0);
    const CvResult r = crossval(d, CvConfig{}, 5);
    CHECK(r.pooled.auc == 1.0);
    for (const auto& f : r.folds) CHECK(f.auc == 1.0);
  }

  TEST_CASE("cross-validation on noise is near chance") {
    double sum = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const Dataset d = scan_dataset(100 + seed, 0.0);
      sum += crossval(d, CvConfig{}, seed).pooled.auc;
    }
    const double mean = sum / 50;
    CHECK(mean >= 0.4);
    CHECK(mean <= 0.6);
  }

  TEST_CASE("folds split by scan without leakage") {
    const Dataset d = scan_dataset(2, 1.0, 9);
    CvConfig cfg;
    cfg.folds = 3;
    const CvResult r = crossval(d, cfg, 11);
    REQUIRE(r.folds.size() == 3);
    std::set<std::string> seen;
    std::size_t tested = 0;
    for (const auto& f : r.folds) {
      std::set<std::string> train(f.trainScans.begin(), f.trainScans.end());
      for (const auto& s : f.testScans) {
        CHECK(train.count(s) == 0);
        CHECK(seen.insert(s).second);
      }
      CHECK(f.nTrain + f.nTest == d.samples.size());
      tested += f.nTest;
    }
    CHECK(seen.size() == 9);
    CHECK(tested == d.samples.size());
    for (const auto& s : d.samples) CHECK(r.foldOfScan.count(s.scanId) == 1);
  }

  TEST_CASE("repeated runs share splits across datasets of the same scans") {
    const Dataset a = scan_dataset(3, 1.0);
    const Dataset b = scan_dataset(4, 2.0);
    const RepeatedCv ra = repeated_crossval(a, CvConfig{}, 9, 4);
    const RepeatedCv rb = repeated_crossval(b, CvConfig{}, 9, 4);
    REQUIRE(ra.runs.size() == 4);
    CHECK(ra.foldAucs.size() == 8);
    for (int r = 0; r < 4; ++r) {
      CHECK(ra.runs[r].foldOfScan == rb.runs[r].foldOfScan);
      CHECK(ra.runs[r].seed == derive_seed(9, 1000 + r));
    }
    double mean = 0;
    for (const auto& run : ra.runs) mean += run.pooled.auc;
    CHECK(ra.meanPooledAuc == doctest::Approx(mean / 4));
  }

  TEST_CASE("too few scans per class") {
    Dataset d = scan_dataset(5, 1.0, 3);
    for (auto& s : d.samples)
      if (s.scanId != "scan0") s.label = 0;
    CHECK_THROWS_AS(crossval(d, CvConfig{}, 1), DataError);
    CvConfig one;
    one.folds = 1;
    CHECK_THROWS_AS(crossval(scan_dataset(5, 1.0), one, 1), ConfigError);
  }

  TEST_CASE("paired t-test examples") {
    const std::vector<double> a{2, 4, 6}, b{1, 2, 3};
    const TTestResult r = paired_ttest(a, b);
    CHECK(r.df == 2);
    CHECK(r.t == doctest::Approx(3.4641).epsilon(1e-4));
    CHECK(r.p == doctest::Approx(0.0742).epsilon(1e-3));
    const TTestResult s = paired_ttest(b, a);
    CHECK(s.t == doctest::Approx(-r.t));
    CHECK(s.p == doctest::Approx(r.p));
    const std::vector<double> c{3, 4, 5};
    CHECK_THROWS_AS(paired_ttest(c, b), DegenerateError);
    CHECK_THROWS_AS(paired_ttest(std::vector<double>{1}, std::vector<double>{2}), DegenerateError);
    CHECK_THROWS_AS(paired_ttest(a, std::vector<double>{1}), DataError);
  }

  TEST_CASE("t tail matches numerical integration") {
    for (double df : {1.0, 2.0, 5.0, 19.0}) {
      for (double t : {0.0, 0.3, 1.0, 2.1, 4.0}) {
        CHECK(std::abs(student_t_two_sided(t, df) - oracle::t_two_sided(t, df)) <= 1e-6);
        CHECK(student_t_two_sided(-t, df) == doctest::Approx(student_t_two_sided(t, df)));
      }
    }
    CHECK(student_t_two_sided(0.0, 3.0) == doctest::Approx(1.0));
  }
}
