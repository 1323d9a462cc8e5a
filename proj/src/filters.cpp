#include "tibcad/filters.hpp"

#include <algorithm>
#include <cmath>

namespace tibcad {

Image2D Image2D::from_patch(const Patch& patch) {
  Image2D image(patch.n, patch.n, patch.spacing.sx, patch.spacing.sy);
  const int lowest = *std::min_element(patch.pixels.begin(), patch.pixels.end());
  for (std::size_t i = 0; i < patch.pixels.size(); ++i) image.data[i] = static_cast<double>(patch.pixels[i] - lowest);
  return image;
}

int kernel_radius(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("smoothing scale sigma must be positive and finite");
  return static_cast<int>(std::ceil(3.0 * sigma));
}

Kernel1D gaussian_kernel(double sigma) {
  const int r = kernel_radius(sigma);
  Kernel1D k{r, std::vector<double>(static_cast<std::size_t>(2 * r + 1))};
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k.taps[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (auto& v : k.taps) v /= sum;
  return k;
}

Kernel1D gaussian_d1_kernel(double sigma) {
  const Kernel1D g = gaussian_kernel(sigma);
  const int r = g.radius;
  double moment = 0.0;
  for (int i = -r; i <= r; ++i) moment += static_cast<double>(i) * i * g[i];
  Kernel1D k{r, std::vector<double>(g.taps.size())};
  for (int i = -r; i <= r; ++i) k.taps[static_cast<std::size_t>(i + r)] = i * g[i] / moment;
  return k;
}

Kernel1D gaussian_d2_kernel(double sigma) {
  const Kernel1D g = gaussian_kernel(sigma);
  const int r = g.radius;
  double m2 = 0.0, m4 = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double i2 = static_cast<double>(i) * i;
    m2 += i2 * g[i];
    m4 += i2 * i2 * g[i];
  }
  const double scale = 2.0 / (m4 - m2 * m2);
  Kernel1D k{r, std::vector<double>(g.taps.size())};
  for (int i = -r; i <= r; ++i)
    k.taps[static_cast<std::size_t>(i + r)] = scale * (static_cast<double>(i) * i - m2) * g[i];
  return k;
}

int mirror_index(int i, int n) {
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

Image2D correlate_separable(const Image2D& image, const Kernel1D& kx, const Kernel1D& ky) {
  Image2D tmp(image.w, image.h, image.sx, image.sy);
  for (int y = 0; y < image.h; ++y)
    for (int x = 0; x < image.w; ++x) {
      double acc = 0.0;
      for (int k = -kx.radius; k <= kx.radius; ++k) acc += kx[k] * image.at(mirror_index(x + k, image.w), y);
      tmp.at(x, y) = acc;
    }
  Image2D out(image.w, image.h, image.sx, image.sy);
  for (int y = 0; y < image.h; ++y)
    for (int x = 0; x < image.w; ++x) {
      double acc = 0.0;
      for (int k = -ky.radius; k <= ky.radius; ++k) acc += ky[k] * tmp.at(x, mirror_index(y + k, image.h));
      out.at(x, y) = acc;
    }
  return out;
}

} // namespace tibcad
