#include "tibcad/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tibcad/error.hpp"
#include "tibcad/keyvalue.hpp"
#include "tibcad/random.hpp"

namespace tibcad {
namespace {

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    out += format_double(values[i]);
  }
  return out;
}

double hinge_sum(const std::vector<std::vector<double>>& z, const std::vector<int>& y, const std::vector<double>& w,
                 double b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double score = std::inner_product(w.begin(), w.end(), z[i].begin(), b);
    sum += std::max(0.0, 1.0 - y[i] * score);
  }
  return sum;
}

double primal(const std::vector<std::vector<double>>& z, const std::vector<int>& y, const std::vector<double>& w,
              double b, double C) {
  const double norm2 = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
  return 0.5 * norm2 + C * hinge_sum(z, y, w, b);
}

} // namespace

void SvmParams::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw ConfigError("SVM C must be positive");
  if (epochs < 1) throw ConfigError("SVM needs at least one epoch");
}

SvmModel train_svm(const std::vector<std::vector<double>>& x, const std::vector<int>& y, const SvmParams& params,
                   const std::string& schemaHash) {
  params.validate();
  if (x.empty() || x.size() != y.size()) throw DataError("SVM training needs equally many samples and labels");
  const std::size_t n = x.size();
  const std::size_t dim = x.front().size();
  bool hasPos = false, hasNeg = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i].size() != dim) throw DataError("SVM training rows differ in width");
    for (double v : x[i])
      if (std::isnan(v)) throw DataError("NaN feature in SVM training data");
    if (y[i] == 1) hasPos = true;
    else if (y[i] == -1) hasNeg = true;
    else throw DataError("SVM labels must be +1 or -1");
  }
  if (!hasPos || !hasNeg) throw DataError("SVM training needs both classes");

  SvmModel model;
  model.schemaHash = schemaHash;
  model.C = params.C;
  model.means.assign(dim, 0.0);
  model.stds.assign(dim, 1.0);
  std::vector<char> active(dim, 1);
  for (std::size_t j = 0; j < dim; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i][j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x[i][j] - mean) * (x[i][j] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    model.means[j] = mean;
    if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
      model.stds[j] = sd;
    } else {
      active[j] = 0;
    }
  }

  std::vector<std::vector<double>> z(n, std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      z[i][j] = active[j] ? (x[i][j] - model.means[j]) / model.stds[j] : 0.0;

  const double lambda = 1.0 / (params.C * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);
  std::vector<double> w(dim, 0.0), wSum(dim, 0.0), wAvg(dim, 0.0);
  double b = 0.0, bSum = 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(params.seed);

  std::vector<double> bestW(dim, 0.0);
  double bestB = 0.0;
  double bestObjective = primal(z, y, bestW, bestB, params.C);
  long long t = 0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    std::fill(wSum.begin(), wSum.end(), 0.0);
    bSum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      ++t;
      const std::size_t i = order[k];
      // Offsetting t by one epoch keeps the first steps from flinging the bias away.
      const double eta = 1.0 / (lambda * static_cast<double>(t + static_cast<long long>(n)));
      const double score = std::inner_product(w.begin(), w.end(), z[i].begin(), b);
      const double shrink = 1.0 - eta * lambda;
      for (auto& wj : w) wj *= shrink;
      if (y[i] * score < 1.0) {
        for (std::size_t j = 0; j < dim; ++j) w[j] += eta * y[i] * z[i][j];
        b += eta * y[i];
      }
      const double norm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
      if (norm > radius)
        for (auto& wj : w) wj *= radius / norm;
      for (std::size_t j = 0; j < dim; ++j) wSum[j] += w[j];
      bSum += b;
    }
    // Average of this epoch's iterates.
    for (std::size_t j = 0; j < dim; ++j) wAvg[j] = wSum[j] / static_cast<double>(n);
    const double bAvg = bSum / static_cast<double>(n);
    const double objective = primal(z, y, wAvg, bAvg, params.C);
    if (objective < bestObjective) {
      bestObjective = objective;
      bestW = wAvg;
      bestB = bAvg;
    }
    model.objectiveHistory.push_back(bestObjective);
  }

  model.weights = bestW;
  model.bias = bestB;
  model.objective = bestObjective;
  return model;
}

SvmModel train_svm(const Dataset& data, const SvmParams& params, std::span<const std::size_t> rows) {
  data.validate();
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  auto add = [&](const Sample& s) {
    x.push_back(s.x);
    y.push_back(s.label == 1 ? 1 : -1);
  };
  if (rows.empty()) {
    for (const auto& s : data.samples) add(s);
  } else {
    for (auto r : rows) add(data.samples.at(r));
  }
  return train_svm(x, y, params, data.schema.hash());
}

double decision(const SvmModel& model, std::span<const double> x) {
  if (x.size() != model.dim())
    throw DataError("feature vector has " + std::to_string(x.size()) + " values, model expects " +
                    std::to_string(model.dim()));
  double score = model.bias;
  for (std::size_t j = 0; j < x.size(); ++j) score += model.weights[j] * ((x[j] - model.means[j]) / model.stds[j]);
  return score;
}

void check_schema(const SvmModel& model, const FeatureSchema& schema) {
  if (schema.size() != model.dim())
    throw DataError("schema has " + std::to_string(schema.size()) + " features, model expects " +
                    std::to_string(model.dim()));
  if (!model.schemaHash.empty() && schema.hash() != model.schemaHash)
    throw DataError("feature schema " + schema.hash() + " does not match model schema " + model.schemaHash);
}

double svm_objective(const SvmModel& model, const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
  std::vector<std::vector<double>> z(x.size(), std::vector<double>(model.dim()));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < model.dim(); ++j) z[i][j] = (x[i][j] - model.means[j]) / model.stds[j];
  return primal(z, y, model.weights, model.bias, model.C);
}

void save_model(const std::filesystem::path& path, const SvmModel& model) {
  KeyValues kv;
  kv.set("format", std::string("tibcad-linear-svm-1"));
  kv.set("schema", model.schemaHash);
  kv.set("dim", static_cast<long long>(model.dim()));
  kv.set("C", model.C);
  kv.set("bias", model.bias);
  kv.set("threshold", model.threshold);
  kv.set("objective", model.objective);
  kv.set("means", join(model.means));
  kv.set("stds", join(model.stds));
  kv.set("weights", join(model.weights));
  kv.save(path);
}

SvmModel load_model(const std::filesystem::path& path) {
  const KeyValues kv = KeyValues::load(path);
  if (kv.get("format") != "tibcad-linear-svm-1") throw DataError(path.string() + ": not a tibcad SVM model");
  SvmModel model;
  model.schemaHash = kv.get("schema");
  model.C = kv.get_double("C");
  model.bias = kv.get_double("bias");
  model.threshold = kv.get_double_or("threshold", 0.0);
  model.objective = kv.get_double_or("objective", 0.0);
  const auto dim = static_cast<std::size_t>(kv.get_int("dim"));
  model.means = dim ? kv.get_doubles("means") : std::vector<double>{};
  model.stds = dim ? kv.get_doubles("stds") : std::vector<double>{};
  model.weights = dim ? kv.get_doubles("weights") : std::vector<double>{};
  if (model.means.size() != dim || model.stds.size() != dim || model.weights.size() != dim)
    throw DataError(path.string() + ": vector lengths disagree with dim");
  for (double s : model.stds)
    if (!(s > 0.0)) throw DataError(path.string() + ": standard deviations must be positive");
  return model;
}

} // namespace tibcad
