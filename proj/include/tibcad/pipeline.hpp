#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tibcad/bscale.hpp"
#include "tibcad/eval.hpp"
#include "tibcad/fcseg.hpp"
#include "tibcad/features.hpp"
#include "tibcad/keyvalue.hpp"
#include "tibcad/phantom.hpp"
#include "tibcad/svm.hpp"

namespace tibcad {

struct PipelineConfig {
  LungSegmentationParams seg{};
  BScaleParams bscale{};
  FeatureParams features{};
  SvmParams svm{};
  FeatureMode mode = FeatureMode::ShapeGlcm;
  int patchSize = 9;
  double tau = 0.1;
  bool gating = true;
  double gateLoQuantile = 0.05;
  double gateHiQuantile = 0.95;
  double specificity = 0.95;  ///< operating point on training scores
  int folds = 2;
  int runs = 10;
  std::uint64_t seed = 7;     ///< cross-validation seed
  std::filesystem::path cacheDir;

  void validate() const;
  /// Missing keys keep their defaults; unknown keys are a ConfigError.
  static PipelineConfig from_key_values(const KeyValues& kv);
  KeyValues to_key_values() const;
};

/// Memoizes the segmentation and b-scale stages by a hash of the input
/// volume and the stage parameters, in memory and optionally on disk.
/// Safe to share between threads; lookups are serialized.
class StageCache {
public:
  explicit StageCache(std::filesystem::path dir = {});

  Mask lungs(const Volume& volume, const LungSegmentationParams& params);
  ScaleMap scale(const Volume& volume, const Mask& lungs, const BScaleParams& params);

  std::size_t hits() const;
  std::size_t misses() const;

private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::map<std::uint64_t, std::shared_ptr<const Mask>> lungs_;
  std::map<std::uint64_t, std::shared_ptr<const ScaleMap>> scales_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Outputs of the per-scan stages that precede feature extraction.
struct ScanStages {
  std::string scanId;
  Volume volume;
  Mask lungs;
  ScaleMap scale;
  Mask candidates;
  std::optional<Mask> tib;  ///< ground truth, when known

  ScanView view() const;
};

/// segment -> b-scale -> candidates. Errors carry the failing stage name.
ScanStages run_stages(std::string scanId, Volume volume, const PipelineConfig& config, StageCache* cache = nullptr,
                      std::optional<Mask> tib = std::nullopt);

/// The phantom suite: TIB scans, clean scans, and separate calibration scans
/// used only to learn the energy interval.
struct SuiteConfig {
  int tibScans = 20;
  int cleanScans = 10;
  std::uint64_t firstSeed = 1;
  std::vector<std::uint64_t> calibrationSeeds{1001, 1002, 1003, 1004};
  PhantomSpec base{};

  void validate() const;
  static SuiteConfig from_key_values(const KeyValues& kv);
};

struct Suite {
  std::vector<ScanStages> scans;
  std::vector<ScanStages> calibration;
};

/// Scan ids are "tib-<seed>" and "clean-<seed>"; the clean scans use seeds
/// following the TIB ones and carry no clusters.
Suite prepare_suite(const SuiteConfig& suite, const PipelineConfig& config, StageCache* cache = nullptr);

/// [loQuantile, hiQuantile] of the Willmore integrand over TIB pixels.
EnergyInterval learn_gate(const std::vector<ScanStages>& calibration, const PipelineConfig& config);

struct ExtractionStats {
  std::size_t tiles = 0;
  std::size_t skipped = 0;
  std::size_t ambiguous = 0;
  std::size_t abnormal = 0;
  std::size_t normal = 0;
};

/// Labelled features of every scan, scans in the given order.
Dataset build_dataset(const std::vector<ScanStages>& scans, const PipelineConfig& config,
                      const EnergyInterval& gate, ExtractionStats* stats = nullptr);

/// Trains on all rows and sets the threshold for the configured specificity
/// on the training scores.
SvmModel train_detector(const Dataset& data, const PipelineConfig& config);

struct SuiteEvaluation {
  EnergyInterval gate{};
  Dataset data;
  ExtractionStats stats;
  RepeatedCv cv;
  SvmModel model;
};

SuiteEvaluation evaluate_suite(const Suite& suite, const PipelineConfig& config);

struct Detection {
  ScanFeatures features;
  std::vector<double> scores;  ///< parallel to features.samples
  std::size_t detections = 0;  ///< scores at or above the model threshold
  Mask overlay;                ///< 1 over every detected patch
};

/// Scores every (gated) patch of one scan with a trained model.
Detection detect(const ScanStages& scan, const SvmModel& model, const PipelineConfig& config,
                 const EnergyInterval& gate);

struct Comparison {
  std::vector<FeatureMode> modes;
  std::vector<int> patchSizes;
  std::vector<std::vector<double>> az;           ///< [mode][size], mean pooled AUC over runs
  std::vector<std::vector<std::vector<double>>> foldAucs;  ///< [mode][size] run-major
  std::vector<int> bestSize;                     ///< index into patchSizes per mode
  /// [mode][mode] paired t-test on per-fold AUCs at each mode's best size;
  /// empty when the differences have zero variance.
  std::vector<std::vector<std::optional<TTestResult>>> p;
  std::vector<std::size_t> samplesPerSize;
};

/// Cross-validates every mode at every patch size over the same patches and
/// the same splits, then pairs per-fold AUCs across modes.
Comparison compare_feature_sets(const Suite& suite, const PipelineConfig& config, const std::vector<FeatureMode>& modes,
                                const std::vector<int>& patchSizes);

} // namespace tibcad
