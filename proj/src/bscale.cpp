#include "tibcad/bscale.hpp"

#include <cmath>
#include <cstdlib>

#include "tibcad/parallel.hpp"

namespace tibcad {

void BScaleParams::validate() const {
  if (!(intensityTol > 0.0)) throw ConfigError("b-scale intensity tolerance must be positive");
  if (!(fractionThreshold > 0.0 && fractionThreshold <= 1.0))
    throw ConfigError("b-scale fraction threshold must lie in (0, 1]");
  if (rMax < 1 || rMax > 255) throw ConfigError("b-scale rMax must lie in [1, 255]");
  if (candidateMaxScale < 1 || candidateMaxScale > rMax)
    throw ConfigError("candidate max scale must lie in [1, rMax]");
}

std::vector<Shell> ball_shells(int rMax, bool sphere3d) {
  std::vector<Shell> shells(static_cast<std::size_t>(rMax));
  const int zr = sphere3d ? rMax : 0;
  for (int dz = -zr; dz <= zr; ++dz)
    for (int dy = -rMax; dy <= rMax; ++dy)
      for (int dx = -rMax; dx <= rMax; ++dx) {
        const int d2 = dx * dx + dy * dy + dz * dz;
        if (d2 == 0) continue;
        for (int rho = 1; rho <= rMax; ++rho) {
          if ((rho - 1) * (rho - 1) < d2 && d2 <= rho * rho) {
            shells[static_cast<std::size_t>(rho - 1)].offsets.push_back({dx, dy, dz});
            break;
          }
        }
      }
  return shells;
}

int voxel_scale(const Volume& volume, int x, int y, int z, const std::vector<Shell>& shells,
                const BScaleParams& params) {
  const Dims& d = volume.dims();
  const int center = volume.at(x, y, z);
  int scale = 0;
  for (std::size_t s = 0; s < shells.size(); ++s) {
    const auto& offsets = shells[s].offsets;
    std::size_t homogeneous = 0;
    for (const auto& o : offsets) {
      const int ux = x + o.dx, uy = y + o.dy, uz = z + o.dz;
      if (!d.contains(ux, uy, uz)) continue;
      if (std::abs(volume.at(ux, uy, uz) - center) <= params.intensityTol) ++homogeneous;
    }
    const double fraction = static_cast<double>(homogeneous) / static_cast<double>(offsets.size());
    if (fraction < params.fractionThreshold) break;
    scale = static_cast<int>(s) + 1;
  }
  return scale < 1 ? 1 : scale;
}

ScaleMap bscale_map(const Volume& volume, const Mask& lungMask, const BScaleParams& params) {
  params.validate();
  if (!same_shape(volume, lungMask)) throw DataError("lung mask dimensions do not match the volume");
  const auto shells = ball_shells(params.rMax, params.sphere3d);
  const Dims& d = volume.dims();
  ScaleMap scale(d, volume.spacing(), std::uint8_t{0});
  parallel_for(static_cast<std::size_t>(d.nz), [&](std::size_t zi) {
    const int z = static_cast<int>(zi);
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x)
        if (lungMask.at(x, y, z))
          scale.at(x, y, z) = static_cast<std::uint8_t>(voxel_scale(volume, x, y, z, shells, params));
  });
  return scale;
}

Mask select_candidates(const ScaleMap& scale, const BScaleParams& params) {
  params.validate();
  Mask mask(scale.dims(), scale.spacing(), std::uint8_t{0});
  for (std::size_t i = 0; i < scale.size(); ++i)
    mask[i] = (scale[i] >= 1 && scale[i] <= params.candidateMaxScale) ? 1 : 0;
  return mask;
}

} // namespace tibcad
