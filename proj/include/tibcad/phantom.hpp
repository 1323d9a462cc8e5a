#pragma once

#include <cstdint>
#include <vector>

#include "tibcad/keyvalue.hpp"
#include "tibcad/volio.hpp"

namespace tibcad {

/// Synthetic chest: a squarish body cross-section (superellipse cylinder)
/// holding two ellipsoidal lungs, decoy vessels, and tree-in-bud clusters
/// (short branching tubes with attached micro-nodules). Lengths are in mm.
struct PhantomSpec {
  Dims dims{64, 64, 24};
  Spacing spacing{0.7, 0.7, 5.0};

  double airHU = -1000.0;
  double bodyHU = 0.0;
  double lungHU = -800.0;
  double noiseSigma = 30.0;

  double bodySemiAxis = 21.7;   ///< in-plane, both axes
  double bodyExponent = 4.0;
  double lungOffsetX = 11.2;    ///< lung centres at FOV centre -/+ this
  double lungSemiX = 9.45;
  double lungSemiY = 18.9;
  double lungSemiZ = 100.0;

  int nTibClusters = 8;
  int branchSegmentsMin = 3;
  int branchSegmentsMax = 6;
  double branchThicknessMin = 0.6;
  double branchThicknessMax = 1.2;
  double branchLengthMin = 1.5;
  double branchLengthMax = 3.0;
  int nodulesMin = 4;
  int nodulesMax = 10;
  double noduleDiameterMin = 2.0;
  double noduleDiameterMax = 3.0;
  double clusterContrast = 750.0;  ///< HU above lung; lands on vessel density

  int nVessels = 20;
  double vesselDiameterMin = 1.5;
  double vesselDiameterMax = 3.0;
  double vesselLengthMin = 10.0;
  double vesselLengthMax = 30.0;
  double vesselHU = -50.0;

  std::uint64_t seed = 1;

  void validate() const;
  KeyValues to_key_values() const;
  /// Missing keys keep their defaults.
  static PhantomSpec from_key_values(const KeyValues& kv);
};

struct Phantom {
  Volume volume;
  Mask lungMask;
  Mask tibMask;
};

/// Deterministic in the PhantomSpec: the same seed yields byte-identical output.
/// Throws DataError when a cluster cannot be placed in 1000 attempts.
Phantom generate_phantom(const PhantomSpec& spec);

/// Number of 26-connected components of a mask.
std::size_t count_components(const Mask& mask);

enum class PatchLabel { Normal, Abnormal, Ambiguous };

/// Abnormal when the TIB fraction of the window reaches tau, normal when the
/// window holds no TIB voxel, ambiguous (excluded from training) otherwise.
std::vector<PatchLabel> label_patches(const std::vector<Patch>& patches, const Mask& tibMask, double tau);
PatchLabel label_patch(const Patch& patch, const Mask& tibMask, double tau);

} // namespace tibcad
