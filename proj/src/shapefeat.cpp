#include "tibcad/shapefeat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace tibcad {
namespace {

double floored(double value) {
  if (std::abs(value) >= kCurvatureEpsilon) return value;
  return value < 0.0 ? -kCurvatureEpsilon : kCurvatureEpsilon;
}

double clamp_ratio(double value) { return std::clamp(value, -kRatioClamp, kRatioClamp); }

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace

std::pair<double, double> ordered_eigenvalues(double ixx, double ixy, double iyy, double noiseFloor) {
  const double mean = 0.5 * (ixx + iyy);
  const double half = 0.5 * (ixx - iyy);
  double radius = std::sqrt(half * half + ixy * ixy);
  if (radius <= noiseFloor) radius = 0.0;
  // The larger magnitude eigenvalue shares the sign of the mean.
  if (mean >= 0.0) return {mean + radius, mean - radius};
  return {mean - radius, mean + radius};
}

HessianField hessian_eigen(const Image2D& image, double sigma) {
  if (image.w < 5 || image.h < 5) throw ConfigError("Hessian needs an image of at least 5 x 5 pixels");
  const Kernel1D g = gaussian_kernel(sigma);
  const Kernel1D d1 = gaussian_d1_kernel(sigma);
  const Kernel1D d2 = gaussian_d2_kernel(sigma);

  const Image2D ixx = correlate_separable(image, d2, g);
  const Image2D iyy = correlate_separable(image, g, d2);
  const Image2D ixy = correlate_separable(image, d1, d1);

  HessianField field;
  field.w = image.w;
  field.h = image.h;
  field.sigma = sigma;
  field.k1.resize(image.data.size());
  field.k2.resize(image.data.size());
  const double cxx = 1.0 / (image.sx * image.sx);
  const double cyy = 1.0 / (image.sy * image.sy);
  const double cxy = 1.0 / (image.sx * image.sy);

  // Round-off bound of the filter sums: a smaller eigenvalue split is noise
  // and would otherwise turn umbilic points into tiny saddles.
  const auto l1 = [](const Kernel1D& k) {
    double s = 0.0;
    for (double t : k.taps) s += std::abs(t);
    return s;
  };
  double peak = 0.0;
  for (double v : image.data) peak = std::max(peak, std::abs(v));
  const double noiseFloor = 64.0 * std::numeric_limits<double>::epsilon() * peak *
                            std::max({l1(d2) * l1(g), l1(d1) * l1(d1)}) * std::max({cxx, cyy, cxy});
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    auto [a, b] = ordered_eigenvalues(ixx.data[i] * cxx, ixy.data[i] * cxy, iyy.data[i] * cyy, noiseFloor);
    field.k1[i] = a;
    field.k2[i] = b;
  }
  return field;
}

HessianField hessian_eigen(const Patch& patch, double sigma) { return hessian_eigen(Image2D::from_patch(patch), sigma); }

CurvatureMaps curvature_maps(const HessianField& field) {
  CurvatureMaps maps;
  maps.w = field.w;
  maps.h = field.h;
  const std::size_t n = field.k1.size();
  maps.H.resize(n);
  maps.K.resize(n);
  maps.W.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double h = 0.5 * (field.k1[i] + field.k2[i]);
    const double k = field.k1[i] * field.k2[i];
    maps.H[i] = h;
    maps.K[i] = k;
    // H^2 - K rewritten without cancellation.
    const double d = 0.5 * (field.k1[i] - field.k2[i]);
    maps.W[i] = d * d;
  }
  return maps;
}

double willmore_energy(const CurvatureMaps& maps, std::span<const std::uint8_t> region, double pixelArea) {
  if (region.size() != maps.W.size()) throw DataError("region size does not match the curvature maps");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (!region[i]) continue;
    sum += maps.W[i];
    ++count;
  }
  if (count == 0) throw DataError("Willmore energy of an empty region");
  return sum * pixelArea;
}

double shape_index(double k1, double k2) {
  const double kmax = std::max(k1, k2);
  const double kmin = std::min(k1, k2);
  if (kmax == kmin) return kmax > 0.0 ? 1.0 : (kmax < 0.0 ? -1.0 : 0.0);
  return 2.0 / std::numbers::pi * std::atan((kmax + kmin) / (kmax - kmin));
}

EnergyInterval learn_energy_interval(std::vector<double> samples, double loQuantile, double hiQuantile) {
  if (samples.empty()) throw DataError("cannot learn an energy interval from zero samples");
  if (!(loQuantile >= 0.0 && loQuantile <= hiQuantile && hiQuantile <= 1.0))
    throw ConfigError("energy interval quantiles must satisfy 0 <= lo <= hi <= 1");
  std::sort(samples.begin(), samples.end());
  return EnergyInterval{quantile_sorted(samples, loQuantile), quantile_sorted(samples, hiQuantile)};
}

const std::array<std::string_view, kShapeFeatureCount>& shape_feature_names() {
  static const std::array<std::string_view, kShapeFeatureCount> names{
      "willmoreEnergy", "meanH", "meanK", "shapeIndex", "elongation", "shear", "compactness", "distortion"};
  return names;
}

std::optional<ShapeFeatures> shape_vector(const Patch& patch, const HessianField& field, const CurvatureMaps& maps,
                                          const PatchGate& gate) {
  const std::size_t n = maps.W.size();
  if (field.k1.size() != n || patch.maskBits.size() != n) throw DataError("patch and curvature maps disagree in size");

  if (gate.enforce) {
    if (gate.candidateBits.size() != n) throw DataError("candidate window does not match the patch");
    if (std::none_of(gate.candidateBits.begin(), gate.candidateBits.end(), [](auto b) { return b != 0; }))
      return std::nullopt;
  }

  std::vector<std::uint8_t> region(n, 0);
  std::size_t gated = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (patch.maskBits[i] && gate.interval.contains(maps.W[i])) {
      region[i] = 1;
      ++gated;
    }
  if (gated == 0) {
    if (gate.enforce) return std::nullopt;
    for (std::size_t i = 0; i < n; ++i) region[i] = patch.maskBits[i] ? 1 : 0;
    gated = static_cast<std::size_t>(std::count(region.begin(), region.end(), 1));
    if (gated == 0) {
      std::fill(region.begin(), region.end(), std::uint8_t{1});
      gated = n;
    }
  }

  double sumH = 0, sumK = 0, sumSI = 0, sumElong = 0, sumShear = 0, sumCompact = 0, sumDistort = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!region[i]) continue;
    const double k1 = field.k1[i];
    const double k2 = field.k2[i];
    sumH += maps.H[i];
    sumK += maps.K[i];
    sumSI += shape_index(k1, k2);
    sumElong += clamp_ratio(k1 / floored(k2));
    sumShear += 0.25 * (k1 - k2) * (k1 - k2);
    sumCompact += clamp_ratio(1.0 / floored(k1 * k2));
    sumDistort += k1 - k2;
  }
  const double count = static_cast<double>(gated);
  const double area = patch.spacing.sx * patch.spacing.sy;
  return ShapeFeatures{willmore_energy(maps, region, area),
                       sumH / count,
                       sumK / count,
                       sumSI / count,
                       sumElong / count,
                       sumShear / count,
                       sumCompact / count,
                       sumDistort / count};
}

} // namespace tibcad
