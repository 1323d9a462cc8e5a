#include "tibcad/texfeat.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tibcad {
namespace {

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

} // namespace

void GlcmParams::validate() const {
  if (levels < 2) throw ConfigError("GLCM needs at least two gray levels");
  if (!(huHi > huLo)) throw ConfigError("GLCM quantization window is empty");
  if (offsets.empty()) throw ConfigError("GLCM needs at least one offset");
}

std::vector<int> quantize(const Patch& patch, const GlcmParams& params) {
  params.validate();
  std::vector<int> levels(patch.pixels.size());
  const double width = params.huHi - params.huLo;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const double v = std::clamp(static_cast<double>(patch.pixels[i]), params.huLo, params.huHi);
    const int bin = static_cast<int>(std::floor((v - params.huLo) / width * params.levels));
    levels[i] = std::min(bin, params.levels - 1);
  }
  return levels;
}

Glcm glcm_from_levels(std::span<const int> levels, int w, int h, int levelCount,
                      const std::vector<GlcmOffset>& offsets) {
  if (levelCount < 2) throw ConfigError("GLCM needs at least two gray levels");
  if (offsets.empty()) throw ConfigError("GLCM needs at least one offset");
  if (levels.size() != static_cast<std::size_t>(w) * h) throw DataError("level image size mismatch");
  for (int v : levels)
    if (v < 0 || v >= levelCount) throw DataError("gray level outside [0, levels)");

  Glcm g;
  g.levels = levelCount;
  g.offsets = offsets;
  g.p.assign(static_cast<std::size_t>(levelCount) * levelCount, 0.0);
  std::vector<long long> counts(g.p.size(), 0);
  long long total = 0;
  for (const auto& o : offsets) {
    for (int y = 0; y < h; ++y) {
      const int y2 = y + o.dy;
      if (y2 < 0 || y2 >= h) continue;
      for (int x = 0; x < w; ++x) {
        const int x2 = x + o.dx;
        if (x2 < 0 || x2 >= w) continue;
        const int a = levels[static_cast<std::size_t>(y) * w + x];
        const int b = levels[static_cast<std::size_t>(y2) * w + x2];
        ++counts[static_cast<std::size_t>(a) * levelCount + b];
        ++counts[static_cast<std::size_t>(b) * levelCount + a];
        total += 2;
      }
    }
  }
  if (total == 0) throw DataError("GLCM has no pixel pairs: patch smaller than every offset");
  for (std::size_t i = 0; i < counts.size(); ++i) g.p[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  return g;
}

Glcm compute_glcm(const Patch& patch, const GlcmParams& params) {
  const auto levels = quantize(patch, params);
  Glcm g = glcm_from_levels(levels, patch.n, patch.n, params.levels, params.offsets);
  g.huLo = params.huLo;
  g.huHi = params.huHi;
  return g;
}

const std::array<std::string_view, kGlcmFeatureCount>& glcm_feature_names() {
  static const std::array<std::string_view, kGlcmFeatureCount> names{
      "autocorrelation", "contrast",           "correlation",       "clusterProminence", "clusterShade",
      "dissimilarity",   "energy",             "entropy",           "homogeneity",       "maxProbability",
      "variance",        "sumAverage",         "sumVariance",       "sumEntropy",        "differenceVariance",
      "differenceEntropy", "infoCorrelation1", "infoCorrelation2"};
  return names;
}

TextureFeatures glcm_features(const Glcm& g) {
  const int L = g.levels;
  std::vector<double> px(static_cast<std::size_t>(L), 0.0), py(static_cast<std::size_t>(L), 0.0);
  std::vector<double> pSum(static_cast<std::size_t>(2 * L + 1), 0.0);  // index k = i + j, levels from 1
  std::vector<double> pDiff(static_cast<std::size_t>(L), 0.0);         // index k = |i - j|

  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) {
      const double p = g(i, j);
      px[static_cast<std::size_t>(i)] += p;
      py[static_cast<std::size_t>(j)] += p;
      pSum[static_cast<std::size_t>(i + j + 2)] += p;
      pDiff[static_cast<std::size_t>(std::abs(i - j))] += p;
    }

  double mux = 0, muy = 0;
  for (int i = 0; i < L; ++i) {
    mux += (i + 1) * px[static_cast<std::size_t>(i)];
    muy += (i + 1) * py[static_cast<std::size_t>(i)];
  }
  double varx = 0, vary = 0;
  for (int i = 0; i < L; ++i) {
    varx += (i + 1 - mux) * (i + 1 - mux) * px[static_cast<std::size_t>(i)];
    vary += (i + 1 - muy) * (i + 1 - muy) * py[static_cast<std::size_t>(i)];
  }

  double autocorrelation = 0, contrast = 0, covariance = 0, prominence = 0, shade = 0, dissimilarity = 0;
  double energy = 0, entropy = 0, homogeneity = 0, maxProb = 0, variance = 0, hxy1 = 0, hxy2 = 0;
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) {
      const double p = g(i, j);
      const double a = i + 1, b = j + 1;
      const double d = a - b;
      const double s = a + b - mux - muy;
      autocorrelation += a * b * p;
      contrast += d * d * p;
      covariance += (a - mux) * (b - muy) * p;
      prominence += s * s * s * s * p;
      shade += s * s * s * p;
      dissimilarity += std::abs(d) * p;
      energy += p * p;
      entropy -= xlogx(p);
      homogeneity += p / (1.0 + d * d);
      maxProb = std::max(maxProb, p);
      variance += (a - mux) * (a - mux) * p;
      const double q = px[static_cast<std::size_t>(i)] * py[static_cast<std::size_t>(j)];
      if (q > 0.0) {
        hxy1 -= p * std::log(q);
        hxy2 -= q * std::log(q);
      }
    }

  double sumAverage = 0, sumEntropy = 0;
  for (int k = 2; k <= 2 * L; ++k) {
    sumAverage += k * pSum[static_cast<std::size_t>(k)];
    sumEntropy -= xlogx(pSum[static_cast<std::size_t>(k)]);
  }
  double sumVariance = 0;
  for (int k = 2; k <= 2 * L; ++k) sumVariance += (k - sumAverage) * (k - sumAverage) * pSum[static_cast<std::size_t>(k)];

  double diffMean = 0, diffEntropy = 0;
  for (int k = 0; k < L; ++k) {
    diffMean += k * pDiff[static_cast<std::size_t>(k)];
    diffEntropy -= xlogx(pDiff[static_cast<std::size_t>(k)]);
  }
  double diffVariance = 0;
  for (int k = 0; k < L; ++k) diffVariance += (k - diffMean) * (k - diffMean) * pDiff[static_cast<std::size_t>(k)];

  double hx = 0, hy = 0;
  for (int i = 0; i < L; ++i) {
    hx -= xlogx(px[static_cast<std::size_t>(i)]);
    hy -= xlogx(py[static_cast<std::size_t>(i)]);
  }

  const double sd = std::sqrt(varx * vary);
  const double correlation = sd > 0.0 ? covariance / sd : 0.0;
  const double hmax = std::max(hx, hy);
  const double imc1 = hmax > 0.0 ? (entropy - hxy1) / hmax : 0.0;
  const double imc2 = std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * (hxy2 - entropy))));

  return TextureFeatures{autocorrelation, contrast,    correlation, prominence,  shade,        dissimilarity,
                         energy,          entropy,     homogeneity, maxProb,     variance,     sumAverage,
                         sumVariance,     sumEntropy,  diffVariance, diffEntropy, imc1,        imc2};
}

SteerableBasis steerable_basis(const Image2D& image, double sigma) {
  const Kernel1D g = gaussian_kernel(sigma);
  const Kernel1D d1 = gaussian_d1_kernel(sigma);
  SteerableBasis basis{correlate_separable(image, d1, g), correlate_separable(image, g, d1)};
  for (auto& v : basis.rx.data) v /= image.sx;
  for (auto& v : basis.ry.data) v /= image.sy;
  return basis;
}

Image2D steer(const SteerableBasis& basis, double theta) {
  Image2D out(basis.rx.w, basis.rx.h, basis.rx.sx, basis.rx.sy);
  const double c = std::cos(theta), s = std::sin(theta);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = c * basis.rx.data[i] + s * basis.ry.data[i];
  return out;
}

std::vector<double> steerable_features(const Image2D& image, double sigma) {
  const SteerableBasis basis = steerable_basis(image, sigma);
  std::vector<double> features;
  features.reserve(static_cast<std::size_t>(kSteerOrientations) * image.data.size());
  for (int k = 0; k < kSteerOrientations; ++k) {
    const Image2D r = steer(basis, k * std::numbers::pi / kSteerOrientations);
    features.insert(features.end(), r.data.begin(), r.data.end());
  }
  return features;
}

std::vector<double> steerable_features(const Patch& patch, double sigma) {
  return steerable_features(Image2D::from_patch(patch), sigma);
}

} // namespace tibcad
