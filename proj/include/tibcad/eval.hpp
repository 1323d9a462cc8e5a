#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tibcad/dataset.hpp"
#include "tibcad/svm.hpp"

namespace tibcad {

struct RocPoint {
  double threshold = 0.0;  ///< scores >= threshold are called positive
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Operating points from (0, 0) to (1, 1), one per distinct score.
struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// Threshold sweep over distinct scores in descending order; tied scores move
/// together. The AUC is the trapezoidal area, accumulated in integer counts
/// so it equals the tie-corrected Mann-Whitney statistic. Labels are 0/1.
RocCurve roc(std::span<const double> scores, std::span<const int> labels);

/// Smallest threshold whose false-positive rate on the given negatives stays
/// within 1 - specificity.
double operating_threshold(std::span<const double> scores, std::span<const int> labels, double specificity);

struct CvConfig {
  SvmParams svm{};
  int folds = 2;
};

struct FoldResult {
  int fold = 0;
  std::vector<std::string> trainScans;
  std::vector<std::string> testScans;
  std::size_t nTrain = 0;
  std::size_t nTest = 0;
  double auc = 0.0;
};

struct CvResult {
  std::uint64_t seed = 0;
  int attempts = 0;                      ///< shuffles needed for a valid split
  std::map<std::string, int> foldOfScan;
  std::vector<FoldResult> folds;
  std::vector<double> scores;            ///< out-of-fold score per sample
  RocCurve pooled;
};

/// Splits scans (not patches) into folds by a seeded shuffle, retrying up to
/// 100 times until every fold holds both classes. Each fold is scored by a
/// model trained on the others; the pooled out-of-fold scores give one ROC.
CvResult crossval(const Dataset& data, const CvConfig& config, std::uint64_t seed);

struct RepeatedCv {
  std::vector<CvResult> runs;
  std::vector<double> foldAucs;  ///< run-major, folds inner
  double meanPooledAuc = 0.0;
};

/// `runs` cross-validations with seeds derived from `seed`; run r uses the same
/// split for every dataset built from the same scans, so fold AUCs pair up.
RepeatedCv repeated_crossval(const Dataset& data, const CvConfig& config, std::uint64_t seed, int runs);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  int df = 0;
};

/// Two-sided paired t-test on a - b. Throws DegenerateError when the
/// differences have zero variance.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

/// Two-sided tail probability of Student's t via the regularized incomplete beta.
double student_t_two_sided(double t, double df);

} // namespace tibcad
