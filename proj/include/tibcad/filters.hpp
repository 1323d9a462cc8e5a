#pragma once

#include <vector>

#include "tibcad/volio.hpp"

namespace tibcad {

/// Real-valued 2D image, row-major, with physical pixel spacing.
struct Image2D {
  int w = 0;
  int h = 0;
  double sx = 1.0;
  double sy = 1.0;
  std::vector<double> data;

  Image2D() = default;
  Image2D(int width, int height, double spacingX = 1.0, double spacingY = 1.0)
      : w(width), h(height), sx(spacingX), sy(spacingY), data(static_cast<std::size_t>(width) * height, 0.0) {}

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * w + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * w + x]; }

  /// Patch intensities relative to the patch minimum. Derivatives do not see
  /// the offset, and integer HU differences stay exact so a constant shift of
  /// the input gives bit-identical filter responses.
  static Image2D from_patch(const Patch& patch);
};

/// Sampled 1D kernel on [-radius, radius], applied as a correlation.
struct Kernel1D {
  int radius = 0;
  std::vector<double> taps;
  double operator[](int k) const { return taps[static_cast<std::size_t>(k + radius)]; }
};

int kernel_radius(double sigma);  ///< ceil(3 sigma)

/// Gaussian with unit sum.
Kernel1D gaussian_kernel(double sigma);
/// First derivative of Gaussian, scaled so a unit ramp gives response 1.
Kernel1D gaussian_d1_kernel(double sigma);
/// Second derivative of Gaussian with zero sum, scaled so x^2/2 gives 1.
Kernel1D gaussian_d2_kernel(double sigma);

/// Half-sample mirror reflection (-1 -> 0, n -> n-1), valid for any i.
int mirror_index(int i, int n);

/// Correlates along x with kx, then along y with ky, mirrored boundary.
Image2D correlate_separable(const Image2D& image, const Kernel1D& kx, const Kernel1D& ky);

} // namespace tibcad
