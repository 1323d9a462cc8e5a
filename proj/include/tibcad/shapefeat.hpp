#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "tibcad/filters.hpp"
#include "tibcad/volio.hpp"

namespace tibcad {

/// Per-pixel principal curvatures approximated by the eigenvalues of the
/// intensity Hessian, ordered |k1| >= |k2|. Units are intensity per mm^2.
struct HessianField {
  int w = 0;
  int h = 0;
  double sigma = 0.0;
  std::vector<double> k1;
  std::vector<double> k2;
};

/// Mean curvature H, Gaussian curvature K and the Willmore integrand H^2 - K.
struct CurvatureMaps {
  int w = 0;
  int h = 0;
  std::vector<double> H;
  std::vector<double> K;
  std::vector<double> W;
};

/// Eigenvalues of [[ixx, ixy], [ixy, iyy]] ordered by absolute value. A
/// half-gap at or below noiseFloor is treated as an exact double root.
std::pair<double, double> ordered_eigenvalues(double ixx, double ixy, double iyy, double noiseFloor = 0.0);

/// Hessian from analytic Gaussian-derivative kernels (radius ceil(3 sigma),
/// mirrored boundary), scaled by the pixel spacing. Needs sigma > 0 and an
/// image of at least 5 x 5 pixels.
HessianField hessian_eigen(const Image2D& image, double sigma);
HessianField hessian_eigen(const Patch& patch, double sigma);

CurvatureMaps curvature_maps(const HessianField& field);

/// Area-weighted sum of the Willmore integrand over region pixels. Throws on
/// an empty region.
double willmore_energy(const CurvatureMaps& maps, std::span<const std::uint8_t> region, double pixelArea);

/// (2/pi) atan((kmax + kmin) / (kmax - kmin)) on the signed-sorted pair, in
/// [-1, 1]. Umbilic points take the limit value sign(k): 1 for k > 0,
/// -1 for k < 0, 0 for a flat point.
double shape_index(double k1, double k2);

/// Closed interval of Willmore integrand values accepted by the gate.
struct EnergyInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double w) const { return w >= lo && w <= hi; }
};

/// Linear-interpolated quantiles of the samples (default 5th and 95th).
EnergyInterval learn_energy_interval(std::vector<double> samples, double loQuantile = 0.05,
                                     double hiQuantile = 0.95);

struct PatchGate {
  std::vector<std::uint8_t> candidateBits;  ///< candidate mask window, row-major
  EnergyInterval interval{};
  bool enforce = true;
};

inline constexpr std::size_t kShapeFeatureCount = 8;
using ShapeFeatures = std::array<double, kShapeFeatureCount>;

/// willmoreEnergy, meanH, meanK, shapeIndex, elongation, shear, compactness, distortion.
const std::array<std::string_view, kShapeFeatureCount>& shape_feature_names();

inline constexpr double kCurvatureEpsilon = 1e-6;
inline constexpr double kRatioClamp = 100.0;

/// Aggregates per-pixel shape quantities by the mean over gated pixels (lung
/// pixels whose W lies in the interval). Returns nullopt ("skip") when the
/// gate is enforced and the patch has no candidate voxel or no gated pixel.
/// With the gate off, a patch without gated pixels falls back to its lung
/// pixels (or every pixel when the lung window is empty); patches that pass
/// the gate get the same values either way.
std::optional<ShapeFeatures> shape_vector(const Patch& patch, const HessianField& field, const CurvatureMaps& maps,
                                          const PatchGate& gate);

} // namespace tibcad
