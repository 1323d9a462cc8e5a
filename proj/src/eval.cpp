#include "tibcad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <boost/math/special_functions/beta.hpp>

#include "tibcad/error.hpp"
#include "tibcad/random.hpp"

namespace tibcad {

RocCurve roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  long long positives = 0, negatives = 0;
  for (int l : labels) {
    if (l == 1) ++positives;
    else if (l == 0) ++negatives;
    else throw DataError("ROC labels must be 0 or 1");
  }
  if (positives == 0 || negatives == 0) throw DegenerateError("ROC needs both classes");
  for (double s : scores)
    if (std::isnan(s)) throw DataError("NaN score");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  long long tp = 0, fp = 0;
  long long area2 = 0;  // twice the area in units of one (positive, negative) pair
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    long long dtp = 0, dfp = 0;
    while (i < order.size() && scores[order[i]] == threshold) {
      if (labels[order[i]] == 1) ++dtp;
      else ++dfp;
      ++i;
    }
    area2 += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    curve.points.push_back({threshold, static_cast<double>(fp) / static_cast<double>(negatives),
                            static_cast<double>(tp) / static_cast<double>(positives)});
  }
  curve.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
  return curve;
}

double operating_threshold(std::span<const double> scores, std::span<const int> labels, double specificity) {
  if (!(specificity >= 0.0 && specificity <= 1.0)) throw ConfigError("specificity must lie in [0, 1]");
  std::vector<double> negatives;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (labels[i] == 0) negatives.push_back(scores[i]);
  if (negatives.empty()) throw DegenerateError("operating point needs negative samples");
  std::sort(negatives.begin(), negatives.end(), std::greater<>());
  const auto allowed = static_cast<std::size_t>(std::floor((1.0 - specificity) * static_cast<double>(negatives.size()) + 1e-9));
  if (allowed >= negatives.size()) return -std::numeric_limits<double>::infinity();
  // Everything at or below the (allowed+1)-th largest negative is rejected.
  return std::nextafter(negatives[allowed], std::numeric_limits<double>::infinity());
}

CvResult crossval(const Dataset& data, const CvConfig& config, std::uint64_t seed) {
  data.validate();
  config.svm.validate();
  if (config.folds < 2) throw ConfigError("cross-validation needs at least two folds");

  std::map<std::string, std::pair<bool, bool>> scanClasses;  // has negative, has positive
  for (const auto& s : data.samples) {
    auto& c = scanClasses[s.scanId];
    (s.label == 1 ? c.second : c.first) = true;
  }
  int posScans = 0, negScans = 0;
  for (const auto& [id, c] : scanClasses) {
    negScans += c.first;
    posScans += c.second;
  }
  if (posScans < 2 || negScans < 2)
    throw DataError("cross-validation needs at least two scans per class");
  std::vector<std::string> scans;
  for (const auto& [id, c] : scanClasses) scans.push_back(id);

  CvResult result;
  result.seed = seed;
  bool valid = false;
  for (int attempt = 0; attempt < 100 && !valid; ++attempt) {
    std::vector<std::string> shuffled = scans;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    rng.shuffle(shuffled);
    result.foldOfScan.clear();
    for (std::size_t i = 0; i < shuffled.size(); ++i) result.foldOfScan[shuffled[i]] = static_cast<int>(i % config.folds);
    std::vector<std::pair<bool, bool>> foldClasses(static_cast<std::size_t>(config.folds), {false, false});
    for (const auto& [id, fold] : result.foldOfScan) {
      auto& fc = foldClasses[static_cast<std::size_t>(fold)];
      fc.first = fc.first || scanClasses[id].first;
      fc.second = fc.second || scanClasses[id].second;
    }
    valid = std::all_of(foldClasses.begin(), foldClasses.end(), [](auto c) { return c.first && c.second; });
    result.attempts = attempt + 1;
  }
  if (!valid) throw DataError("no fold assignment with both classes in every fold after 100 shuffles");

  result.scores.assign(data.samples.size(), 0.0);
  for (int fold = 0; fold < config.folds; ++fold) {
    FoldResult fr;
    fr.fold = fold;
    std::vector<std::size_t> trainRows, testRows;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      (result.foldOfScan.at(data.samples[i].scanId) == fold ? testRows : trainRows).push_back(i);
    }
    for (const auto& [id, f] : result.foldOfScan) (f == fold ? fr.testScans : fr.trainScans).push_back(id);
    const SvmModel model = train_svm(data, config.svm, trainRows);
    std::vector<double> foldScores;
    std::vector<int> foldLabels;
    for (auto r : testRows) {
      const double s = decision(model, data.samples[r].x);
      result.scores[r] = s;
      foldScores.push_back(s);
      foldLabels.push_back(data.samples[r].label);
    }
    fr.nTrain = trainRows.size();
    fr.nTest = testRows.size();
    fr.auc = roc(foldScores, foldLabels).auc;
    result.folds.push_back(std::move(fr));
  }
  std::vector<int> labels;
  labels.reserve(data.samples.size());
  for (const auto& s : data.samples) labels.push_back(s.label);
  result.pooled = roc(result.scores, labels);
  return result;
}

RepeatedCv repeated_crossval(const Dataset& data, const CvConfig& config, std::uint64_t seed, int runs) {
  if (runs < 1) throw ConfigError("need at least one cross-validation run");
  RepeatedCv out;
  double sum = 0.0;
  for (int r = 0; r < runs; ++r) {
    out.runs.push_back(crossval(data, config, derive_seed(seed, 1000u + static_cast<std::uint64_t>(r))));
    for (const auto& f : out.runs.back().folds) out.foldAucs.push_back(f.auc);
    sum += out.runs.back().pooled.auc;
  }
  out.meanPooledAuc = sum / runs;
  return out;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw ConfigError("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return boost::math::ibeta(0.5 * df, 0.5, df / (df + t * t));
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("paired t-test needs equally long samples");
  const std::size_t n = a.size();
  if (n < 2) throw DegenerateError("paired t-test needs at least two pairs");
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw DegenerateError("paired t-test is degenerate: differences have zero variance");
  TTestResult r;
  r.df = static_cast<int>(n - 1);
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p = student_t_two_sided(r.t, r.df);
  return r;
}

} // namespace tibcad
