#pragma once

#include <vector>

#include "tibcad/volio.hpp"

namespace tibcad {

struct BScaleParams {
  double intensityTol = 150.0;     ///< HU
  double fractionThreshold = 0.85; ///< in (0, 1]
  int rMax = 8;                    ///< voxels, at most 255
  int candidateMaxScale = 3;
  bool sphere3d = false;           ///< grow 3D spheres instead of in-slice disks

  void validate() const;
};

/// One digital shell: offsets u with (rho-1)^2 < |u|^2 <= rho^2.
struct Shell {
  struct Offset {
    int dx, dy, dz;
  };
  std::vector<Offset> offsets;
};

/// Shells 1..rMax (index 0 is shell 1).
std::vector<Shell> ball_shells(int rMax, bool sphere3d);

/// Ball scale of one voxel: the largest r <= rMax whose shells 1..r all have
/// a homogeneous fraction of at least fractionThreshold, and at least 1.
/// Shell voxels outside the volume count as inhomogeneous.
int voxel_scale(const Volume& volume, int x, int y, int z, const std::vector<Shell>& shells,
                const BScaleParams& params);

/// Scale of every lung voxel; 0 outside the mask. Slices are processed in
/// parallel, the result does not depend on scheduling.
ScaleMap bscale_map(const Volume& volume, const Mask& lungMask, const BScaleParams& params);

/// Voxels with 1 <= scale <= candidateMaxScale.
Mask select_candidates(const ScaleMap& scale, const BScaleParams& params);

} // namespace tibcad
