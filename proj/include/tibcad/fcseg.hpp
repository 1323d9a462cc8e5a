#pragma once

#include <cstddef>
#include <vector>

#include "tibcad/volio.hpp"

namespace tibcad {

/// Parameters of the fuzzy affinity between adjacent voxels: a homogeneity
/// Gaussian on the intensity difference times an object-feature Gaussian on
/// the pair mean.
struct Affinity {
  double sigmaIntensity = 100.0;
  double sigmaObject = 200.0;
  double meanObject = -750.0;

  double operator()(double a, double b) const;
  void validate() const;
};

enum class Adjacency { Six = 6, TwentySix = 26 };

/// Per-voxel max-min path strength to a seed set, values in [0, 1].
struct ConnectivityMap {
  Dims dims;
  std::vector<double> strength;
};

/// Seed voxels as linear indices, sorted and unique.
using SeedSet = std::vector<std::size_t>;

struct LungSeeds {
  SeedSet left;   ///< component with the smaller centroid x (image left)
  SeedSet right;
};

/// Connected components (6-adjacency) of voxels below airThreshold HU that
/// do not touch the in-plane border of the field of view. Sorted by size,
/// largest first. Each entry is the sorted list of linear indices.
std::vector<std::vector<std::size_t>> interior_air_components(const Volume& volume, double airThreshold = -400.0);

/// Places seeds in the two largest interior air components: the component
/// voxel nearest its centroid plus its 6-neighbours inside the component.
/// Throws DataError when fewer than two components exist.
LungSeeds auto_seeds(const Volume& volume, double airThreshold = -400.0);

/// Best-first (max-heap) propagation of max-min path strength. Heap ties are
/// broken by voxel index so the visiting order is reproducible.
ConnectivityMap fc_connectivity(const Volume& volume, const SeedSet& seeds, const Affinity& affinity,
                                Adjacency adjacency = Adjacency::Six);

/// Mask of voxels whose connectivity to the seeds is at least theta.
Mask fc_segment(const Volume& volume, const SeedSet& seeds, const Affinity& affinity, double theta,
                Adjacency adjacency = Adjacency::Six);

/// Fills background regions of each axial slice that are not 4-connected to
/// the slice border.
Mask fill_holes_per_slice(const Mask& mask);

struct LungSegmentationParams {
  Affinity affinity{};
  double theta = 0.5;
  double airThreshold = -400.0;
  Adjacency adjacency = Adjacency::Six;
  bool fillHoles = true;
};

/// auto_seeds, then fc_segment from the union of both seed sets, then
/// optional hole filling so vessels and lesions stay inside the lung mask.
Mask segment_lungs(const Volume& volume, const LungSegmentationParams& params = {});

} // namespace tibcad
