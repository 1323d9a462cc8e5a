#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tibcad/dataset.hpp"
#include "tibcad/phantom.hpp"
#include "tibcad/shapefeat.hpp"
#include "tibcad/texfeat.hpp"
#include "tibcad/volio.hpp"

namespace tibcad {

enum class FeatureMode { Shape, Glcm, Wavelet, ShapeGlcm, ShapeWavelet };

/// Accepts shape, glcm, wavelet, shape+glcm, shape+wavelet.
FeatureMode parse_feature_mode(std::string_view text);
std::string_view to_string(FeatureMode mode);
bool uses_shape(FeatureMode mode);
bool uses_glcm(FeatureMode mode);
bool uses_wavelet(FeatureMode mode);

inline constexpr int kSupportedPatchSizes[] = {9, 13, 17};
/// Throws ConfigError unless n is 9, 13 or 17.
void validate_patch_size(int n);

struct FeatureParams {
  double shapeSigma = 1.5;    ///< pixels
  double waveletSigma = 1.5;  ///< pixels
  GlcmParams glcm{};
  void validate() const;
};

/// Column names for a mode and patch size: shape names, then GLCM names,
/// then wavelet responses named steer<deg>_<y>_<x>.
FeatureSchema feature_schema(FeatureMode mode, int n);

/// Energy interval persisted as key:value text (lo, hi).
void write_gate(const std::filesystem::path& path, const EnergyInterval& interval);
EnergyInterval read_gate(const std::filesystem::path& path);

/// The masks one scan contributes to feature extraction. tibMask may be null
/// for unlabelled data, in which case every patch is labelled normal.
struct ScanView {
  std::string scanId;
  const Volume* volume = nullptr;
  const Mask* lungMask = nullptr;
  const Mask* candidates = nullptr;
  const Mask* tibMask = nullptr;
};

struct ExtractionParams {
  FeatureMode mode = FeatureMode::ShapeGlcm;
  int patchSize = 9;
  FeatureParams features{};
  EnergyInterval interval{};
  bool gating = true;   ///< skip patches without candidates or in-interval energy
  double tau = 0.1;
  bool dropAmbiguous = true;
};

struct ScanFeatures {
  std::vector<Sample> samples;
  std::vector<PatchLabel> labels;  ///< parallel to samples
  std::size_t tiles = 0;
  std::size_t skipped = 0;         ///< removed by the gate
  std::size_t ambiguous = 0;       ///< dropped as ambiguous
};

/// Tiles the lung, applies the candidate/energy gate once per patch (the same
/// gate for every mode, so all modes see the same patches) and computes the
/// selected feature groups. Output is ordered like tile_patches and does not
/// depend on thread scheduling.
ScanFeatures extract_scan_features(const ScanView& scan, const ExtractionParams& params);

/// Per-pixel Willmore integrand values at TIB pixels, computed patch-locally
/// on the n x n tiling exactly as during extraction.
std::vector<double> tib_energy_samples(const ScanView& scan, int n, double sigma);

/// Keeps the named columns of a dataset, in the order given.
Dataset select_columns(const Dataset& data, const FeatureSchema& schema);

} // namespace tibcad
