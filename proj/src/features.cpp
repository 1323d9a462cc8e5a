#include "tibcad/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "tibcad/error.hpp"
#include "tibcad/keyvalue.hpp"
#include "tibcad/parallel.hpp"

namespace tibcad {

FeatureMode parse_feature_mode(std::string_view text) {
  if (text == "shape") return FeatureMode::Shape;
  if (text == "glcm") return FeatureMode::Glcm;
  if (text == "wavelet") return FeatureMode::Wavelet;
  if (text == "shape+glcm") return FeatureMode::ShapeGlcm;
  if (text == "shape+wavelet") return FeatureMode::ShapeWavelet;
  throw ConfigError("unknown feature mode '" + std::string(text) +
                    "' (expected shape, glcm, wavelet, shape+glcm or shape+wavelet)");
}

std::string_view to_string(FeatureMode mode) {
  switch (mode) {
  case FeatureMode::Shape: return "shape";
  case FeatureMode::Glcm: return "glcm";
  case FeatureMode::Wavelet: return "wavelet";
  case FeatureMode::ShapeGlcm: return "shape+glcm";
  case FeatureMode::ShapeWavelet: return "shape+wavelet";
  }
  return "?";
}

bool uses_shape(FeatureMode m) {
  return m == FeatureMode::Shape || m == FeatureMode::ShapeGlcm || m == FeatureMode::ShapeWavelet;
}
bool uses_glcm(FeatureMode m) { return m == FeatureMode::Glcm || m == FeatureMode::ShapeGlcm; }
bool uses_wavelet(FeatureMode m) { return m == FeatureMode::Wavelet || m == FeatureMode::ShapeWavelet; }

void validate_patch_size(int n) {
  if (std::find(std::begin(kSupportedPatchSizes), std::end(kSupportedPatchSizes), n) == std::end(kSupportedPatchSizes))
    throw ConfigError("patch size " + std::to_string(n) + " is not supported (use 9, 13 or 17)");
}

void FeatureParams::validate() const {
  if (!(shapeSigma > 0.0) || !std::isfinite(shapeSigma)) throw ConfigError("shape sigma must be positive");
  if (!(waveletSigma > 0.0) || !std::isfinite(waveletSigma)) throw ConfigError("wavelet sigma must be positive");
  glcm.validate();
}

FeatureSchema feature_schema(FeatureMode mode, int n) {
  FeatureSchema schema;
  if (uses_shape(mode))
    for (auto name : shape_feature_names()) schema.names.emplace_back(name);
  if (uses_glcm(mode))
    for (auto name : glcm_feature_names()) schema.names.emplace_back(name);
  if (uses_wavelet(mode))
    for (int k = 0; k < kSteerOrientations; ++k)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
          schema.names.push_back("steer" + std::to_string(30 * k) + "_" + std::to_string(y) + "_" + std::to_string(x));
  return schema;
}

void write_gate(const std::filesystem::path& path, const EnergyInterval& interval) {
  KeyValues kv;
  kv.set("format", std::string("tibcad-energy-gate-1"));
  kv.set("lo", interval.lo);
  kv.set("hi", interval.hi);
  kv.save(path);
}

EnergyInterval read_gate(const std::filesystem::path& path) {
  const KeyValues kv = KeyValues::load(path);
  if (kv.get_or("format", "") != "tibcad-energy-gate-1") throw DataError(path.string() + ": not an energy gate file");
  EnergyInterval interval{kv.get_double("lo"), kv.get_double("hi")};
  if (!(interval.lo <= interval.hi)) throw DataError(path.string() + ": gate lo exceeds hi");
  return interval;
}

namespace {

void check_scan(const ScanView& scan, bool needCandidates) {
  if (!scan.volume || !scan.lungMask) throw DataError("scan " + scan.scanId + " lacks a volume or lung mask");
  if (!same_shape(*scan.volume, *scan.lungMask)) throw DataError("scan " + scan.scanId + ": lung mask geometry differs");
  if (needCandidates && !scan.candidates) throw DataError("scan " + scan.scanId + " lacks a candidate mask");
  if (scan.candidates && !same_shape(*scan.volume, *scan.candidates))
    throw DataError("scan " + scan.scanId + ": candidate mask geometry differs");
  if (scan.tibMask && !same_shape(*scan.volume, *scan.tibMask))
    throw DataError("scan " + scan.scanId + ": TIB mask geometry differs");
}

} // namespace

ScanFeatures extract_scan_features(const ScanView& scan, const ExtractionParams& params) {
  validate_patch_size(params.patchSize);
  params.features.validate();
  if (!(params.tau > 0.0 && params.tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  check_scan(scan, params.gating);

  const std::vector<Patch> tiles = tile_patches(*scan.volume, *scan.lungMask, params.patchSize);
  struct Slot {
    std::optional<Sample> sample;
    PatchLabel label = PatchLabel::Normal;
    bool skipped = false;
  };
  std::vector<Slot> slots(tiles.size());

  parallel_for(tiles.size(), [&](std::size_t i) {
    const Patch& patch = tiles[i];
    Slot& slot = slots[i];
    slot.label = scan.tibMask ? label_patch(patch, *scan.tibMask, params.tau) : PatchLabel::Normal;
    if (params.dropAmbiguous && slot.label == PatchLabel::Ambiguous) return;

    PatchGate gate;
    gate.interval = params.interval;
    gate.enforce = params.gating;
    if (params.gating) gate.candidateBits = extract_window(*scan.candidates, patch.z, patch.x0, patch.y0, patch.n);
    const HessianField field = hessian_eigen(patch, params.features.shapeSigma);
    const CurvatureMaps maps = curvature_maps(field);
    const auto shape = shape_vector(patch, field, maps, gate);
    if (!shape) {
      slot.skipped = true;
      return;
    }

    Sample s;
    s.scanId = scan.scanId;
    s.z = patch.z;
    s.x0 = patch.x0;
    s.y0 = patch.y0;
    s.label = slot.label == PatchLabel::Abnormal ? 1 : 0;
    if (uses_shape(params.mode)) s.x.insert(s.x.end(), shape->begin(), shape->end());
    if (uses_glcm(params.mode)) {
      const TextureFeatures t = glcm_features(compute_glcm(patch, params.features.glcm));
      s.x.insert(s.x.end(), t.begin(), t.end());
    }
    if (uses_wavelet(params.mode)) {
      const std::vector<double> w = steerable_features(patch, params.features.waveletSigma);
      s.x.insert(s.x.end(), w.begin(), w.end());
    }
    slot.sample = std::move(s);
  });

  ScanFeatures out;
  out.tiles = tiles.size();
  for (auto& slot : slots) {
    if (slot.skipped) {
      ++out.skipped;
    } else if (!slot.sample) {
      ++out.ambiguous;
    } else {
      out.samples.push_back(std::move(*slot.sample));
      out.labels.push_back(slot.label);
    }
  }
  return out;
}

std::vector<double> tib_energy_samples(const ScanView& scan, int n, double sigma) {
  check_scan(scan, false);
  if (!scan.tibMask) throw DataError("scan " + scan.scanId + " has no TIB mask to learn an energy interval from");
  const std::vector<Patch> tiles = tile_patches(*scan.volume, *scan.lungMask, n);
  std::vector<std::vector<double>> perTile(tiles.size());
  parallel_for(tiles.size(), [&](std::size_t i) {
    const Patch& patch = tiles[i];
    const auto tib = extract_window(*scan.tibMask, patch.z, patch.x0, patch.y0, patch.n);
    if (std::none_of(tib.begin(), tib.end(), [](auto b) { return b != 0; })) return;
    const CurvatureMaps maps = curvature_maps(hessian_eigen(patch, sigma));
    for (std::size_t k = 0; k < tib.size(); ++k)
      if (tib[k]) perTile[i].push_back(maps.W[k]);
  });
  std::vector<double> samples;
  for (const auto& v : perTile) samples.insert(samples.end(), v.begin(), v.end());
  return samples;
}

Dataset select_columns(const Dataset& data, const FeatureSchema& schema) {
  std::vector<std::size_t> columns;
  for (const auto& name : schema.names) {
    const auto it = std::find(data.schema.names.begin(), data.schema.names.end(), name);
    if (it == data.schema.names.end()) throw DataError("feature column '" + name + "' not present in the dataset");
    columns.push_back(static_cast<std::size_t>(it - data.schema.names.begin()));
  }
  Dataset out;
  out.schema = schema;
  out.samples.reserve(data.samples.size());
  for (const auto& s : data.samples) {
    Sample t = s;
    t.x.clear();
    for (auto c : columns) t.x.push_back(s.x[c]);
    out.samples.push_back(std::move(t));
  }
  return out;
}

} // namespace tibcad
