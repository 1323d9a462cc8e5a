#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tibcad/dataset.hpp"

namespace tibcad {

struct SvmParams {
  double C = 1.0;
  int epochs = 50;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Linear soft-margin SVM with its own feature standardization.
struct SvmModel {
  std::string schemaHash;
  std::vector<double> means;
  std::vector<double> stds;
  std::vector<double> weights;  ///< in standardized feature space
  double bias = 0.0;
  double C = 1.0;
  double objective = 0.0;                ///< primal objective of the returned model
  std::vector<double> objectiveHistory;  ///< reported objective after each epoch
  double threshold = 0.0;                ///< operating point on the decision score

  std::size_t dim() const { return weights.size(); }
};

/// Minimizes 1/2 |w|^2 + C sum_i hinge(y_i (w.x_i + b)) on standardized
/// features by epoch-shuffled stochastic subgradient steps of size
/// 1/(lambda (t + n)) with lambda = 1/(C n); the unregularized bias takes the
/// same step. After
/// each epoch the average of that epoch's iterates is scored and the best
/// model so far is kept, so objectiveHistory never increases. Features with zero variance get std 1 and weight 0.
/// Labels 1 map to +1, 0 to -1. `rows` selects a subset (all when empty).
SvmModel train_svm(const Dataset& data, const SvmParams& params, std::span<const std::size_t> rows = {});

/// Same, on a raw matrix with +/-1 labels and an explicit schema hash.
SvmModel train_svm(const std::vector<std::vector<double>>& x, const std::vector<int>& y, const SvmParams& params,
                   const std::string& schemaHash = {});

/// w . standardize(x) + b. Throws DataError on a dimension mismatch.
double decision(const SvmModel& model, std::span<const double> x);

/// Throws DataError unless the schema matches the model.
void check_schema(const SvmModel& model, const FeatureSchema& schema);

/// Primal objective of (w, b) on standardized data.
double svm_objective(const SvmModel& model, const std::vector<std::vector<double>>& x, const std::vector<int>& y);

void save_model(const std::filesystem::path& path, const SvmModel& model);
SvmModel load_model(const std::filesystem::path& path);

} // namespace tibcad
