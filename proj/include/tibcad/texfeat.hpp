#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "tibcad/filters.hpp"
#include "tibcad/volio.hpp"

namespace tibcad {

struct GlcmOffset {
  int dx = 0;
  int dy = 0;
};

struct GlcmParams {
  int levels = 32;
  double huLo = -1000.0;
  double huHi = 400.0;
  std::vector<GlcmOffset> offsets{{1, 0}, {0, 1}, {1, 1}, {1, -1}};

  void validate() const;
};

/// Normalized, symmetric co-occurrence matrix pooled over all offsets.
struct Glcm {
  int levels = 0;
  double huLo = 0.0;
  double huHi = 0.0;
  std::vector<GlcmOffset> offsets;
  std::vector<double> p;  ///< levels x levels, row i = reference level

  double operator()(int i, int j) const { return p[static_cast<std::size_t>(i) * levels + j]; }
};

/// Clamps to [huLo, huHi] and bins uniformly into `levels` gray levels.
std::vector<int> quantize(const Patch& patch, const GlcmParams& params);

/// Co-occurrences of already-binned levels (row-major w x h). Each in-image
/// pair (p, p + offset) counts once in each direction. Throws DataError when
/// no offset yields a pair.
Glcm glcm_from_levels(std::span<const int> levels, int w, int h, int levelCount,
                      const std::vector<GlcmOffset>& offsets);

Glcm compute_glcm(const Patch& patch, const GlcmParams& params);

inline constexpr std::size_t kGlcmFeatureCount = 18;
using TextureFeatures = std::array<double, kGlcmFeatureCount>;

const std::array<std::string_view, kGlcmFeatureCount>& glcm_feature_names();

/// Haralick-style statistics with gray levels numbered from 1 and natural
/// logarithms (0 log 0 = 0). Correlation is 0 and IMC1 is 0 when their
/// normalizers vanish.
TextureFeatures glcm_features(const Glcm& glcm);

/// x and y first-derivative-of-Gaussian responses (per mm).
struct SteerableBasis {
  Image2D rx;
  Image2D ry;
};

SteerableBasis steerable_basis(const Image2D& image, double sigma);

/// cos(theta) Rx + sin(theta) Ry.
Image2D steer(const SteerableBasis& basis, double theta);

inline constexpr int kSteerOrientations = 6;

/// Responses at 0, 30, ..., 150 degrees, orientation-major, 6 n^2 values.
std::vector<double> steerable_features(const Patch& patch, double sigma);
std::vector<double> steerable_features(const Image2D& image, double sigma);

} // namespace tibcad
