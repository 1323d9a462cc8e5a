#include "tibcad/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tibcad/error.hpp"
#include "tibcad/parallel.hpp"

namespace tibcad {
namespace {

/// Runs fn, prefixing any library error with the stage (and scan) name while
/// keeping its type, so exit codes survive.
template <class Fn>
auto in_stage(const std::string& stage, const std::string& scanId, Fn&& fn) -> decltype(fn()) {
  const std::string prefix = scanId.empty() ? stage + ": " : stage + " [" + scanId + "]: ";
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DegenerateError& e) {
    throw DegenerateError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  }
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "on" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "off" || text == "no" || text == "0") return false;
  throw ConfigError(key + ": expected a boolean, got '" + text + "'");
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "seg.sigmaIntensity", "seg.sigmaObject", "seg.meanObject", "seg.theta", "seg.airThreshold", "seg.adjacency",
      "seg.fillHoles", "bscale.intensityTol", "bscale.fractionThreshold", "bscale.rMax", "bscale.candidateMaxScale",
      "bscale.sphere3d", "features.shapeSigma", "features.waveletSigma", "glcm.levels", "glcm.huLo", "glcm.huHi",
      "svm.C", "svm.epochs", "svm.seed", "mode", "patchSize", "tau", "gating", "gate.loQuantile", "gate.hiQuantile",
      "specificity", "cv.folds", "cv.runs", "cv.seed", "cacheDir"};
  return keys;
}

std::string lungs_key_text(const Volume& v, const LungSegmentationParams& p) {
  return "lungs|" + hex64(checksum(v)) + "|" + format_double(p.affinity.sigmaIntensity) + "|" +
         format_double(p.affinity.sigmaObject) + "|" + format_double(p.affinity.meanObject) + "|" +
         format_double(p.theta) + "|" + format_double(p.airThreshold) + "|" +
         std::to_string(static_cast<int>(p.adjacency)) + "|" + (p.fillHoles ? "1" : "0");
}

std::string scale_key_text(const Volume& v, const Mask& lungs, const BScaleParams& p) {
  return "scale|" + hex64(checksum(v)) + "|" + hex64(checksum(lungs)) + "|" + format_double(p.intensityTol) + "|" +
         format_double(p.fractionThreshold) + "|" + std::to_string(p.rMax) + "|" + (p.sphere3d ? "1" : "0");
}

std::string spacing_text(const Spacing& s) {
  return format_double(s.sx) + "," + format_double(s.sy) + "," + format_double(s.sz);
}

} // namespace

void PipelineConfig::validate() const {
  seg.affinity.validate();
  if (!(seg.theta >= 0.0 && seg.theta <= 1.0)) throw ConfigError("seg.theta must lie in [0, 1]");
  bscale.validate();
  features.validate();
  svm.validate();
  validate_patch_size(patchSize);
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (!(gateLoQuantile >= 0.0 && gateLoQuantile <= gateHiQuantile && gateHiQuantile <= 1.0))
    throw ConfigError("gate quantiles must satisfy 0 <= lo <= hi <= 1");
  if (!(specificity >= 0.0 && specificity <= 1.0)) throw ConfigError("specificity must lie in [0, 1]");
  if (folds < 2) throw ConfigError("cv.folds must be at least 2");
  if (runs < 1) throw ConfigError("cv.runs must be at least 1");
}

PipelineConfig PipelineConfig::from_key_values(const KeyValues& kv) try {
  for (const auto& key : kv.keys())
    if (!known_keys().count(key)) throw ConfigError(kv.origin() + ": unknown configuration key '" + key + "'");
  PipelineConfig c;
  auto d = [&](const char* key, double& field) { field = kv.get_double_or(key, field); };
  auto i = [&](const char* key, int& field) { field = static_cast<int>(kv.get_int_or(key, field)); };
  auto b = [&](const char* key, bool& field) {
    if (kv.has(key)) field = parse_bool(kv.get(key), key);
  };
  d("seg.sigmaIntensity", c.seg.affinity.sigmaIntensity);
  d("seg.sigmaObject", c.seg.affinity.sigmaObject);
  d("seg.meanObject", c.seg.affinity.meanObject);
  d("seg.theta", c.seg.theta);
  d("seg.airThreshold", c.seg.airThreshold);
  if (kv.has("seg.adjacency")) {
    const auto a = kv.get_int("seg.adjacency");
    if (a != 6 && a != 26) throw ConfigError("seg.adjacency must be 6 or 26");
    c.seg.adjacency = a == 6 ? Adjacency::Six : Adjacency::TwentySix;
  }
  b("seg.fillHoles", c.seg.fillHoles);
  d("bscale.intensityTol", c.bscale.intensityTol);
  d("bscale.fractionThreshold", c.bscale.fractionThreshold);
  i("bscale.rMax", c.bscale.rMax);
  i("bscale.candidateMaxScale", c.bscale.candidateMaxScale);
  b("bscale.sphere3d", c.bscale.sphere3d);
  d("features.shapeSigma", c.features.shapeSigma);
  d("features.waveletSigma", c.features.waveletSigma);
  i("glcm.levels", c.features.glcm.levels);
  d("glcm.huLo", c.features.glcm.huLo);
  d("glcm.huHi", c.features.glcm.huHi);
  d("svm.C", c.svm.C);
  i("svm.epochs", c.svm.epochs);
  if (kv.has("svm.seed")) c.svm.seed = static_cast<std::uint64_t>(kv.get_int("svm.seed"));
  if (kv.has("mode")) c.mode = parse_feature_mode(kv.get("mode"));
  i("patchSize", c.patchSize);
  d("tau", c.tau);
  b("gating", c.gating);
  d("gate.loQuantile", c.gateLoQuantile);
  d("gate.hiQuantile", c.gateHiQuantile);
  d("specificity", c.specificity);
  i("cv.folds", c.folds);
  i("cv.runs", c.runs);
  if (kv.has("cv.seed")) c.seed = static_cast<std::uint64_t>(kv.get_int("cv.seed"));
  if (kv.has("cacheDir")) c.cacheDir = kv.get("cacheDir");
  c.validate();
  return c;
} catch (const DataError& e) {
  // Unparsable values in a configuration are configuration errors.
  throw ConfigError(e.what());
}

KeyValues PipelineConfig::to_key_values() const {
  KeyValues kv;
  kv.set("seg.sigmaIntensity", seg.affinity.sigmaIntensity);
  kv.set("seg.sigmaObject", seg.affinity.sigmaObject);
  kv.set("seg.meanObject", seg.affinity.meanObject);
  kv.set("seg.theta", seg.theta);
  kv.set("seg.airThreshold", seg.airThreshold);
  kv.set("seg.adjacency", static_cast<long long>(seg.adjacency));
  kv.set("seg.fillHoles", std::string(seg.fillHoles ? "true" : "false"));
  kv.set("bscale.intensityTol", bscale.intensityTol);
  kv.set("bscale.fractionThreshold", bscale.fractionThreshold);
  kv.set("bscale.rMax", static_cast<long long>(bscale.rMax));
  kv.set("bscale.candidateMaxScale", static_cast<long long>(bscale.candidateMaxScale));
  kv.set("bscale.sphere3d", std::string(bscale.sphere3d ? "true" : "false"));
  kv.set("features.shapeSigma", features.shapeSigma);
  kv.set("features.waveletSigma", features.waveletSigma);
  kv.set("glcm.levels", static_cast<long long>(features.glcm.levels));
  kv.set("glcm.huLo", features.glcm.huLo);
  kv.set("glcm.huHi", features.glcm.huHi);
  kv.set("svm.C", svm.C);
  kv.set("svm.epochs", static_cast<long long>(svm.epochs));
  kv.set("svm.seed", std::to_string(svm.seed));
  kv.set("mode", std::string(to_string(mode)));
  kv.set("patchSize", static_cast<long long>(patchSize));
  kv.set("tau", tau);
  kv.set("gating", std::string(gating ? "true" : "false"));
  kv.set("gate.loQuantile", gateLoQuantile);
  kv.set("gate.hiQuantile", gateHiQuantile);
  kv.set("specificity", specificity);
  kv.set("cv.folds", static_cast<long long>(folds));
  kv.set("cv.runs", static_cast<long long>(runs));
  kv.set("cv.seed", std::to_string(seed));
  if (!cacheDir.empty()) kv.set("cacheDir", cacheDir.string());
  return kv;
}

StageCache::StageCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

Mask StageCache::lungs(const Volume& volume, const LungSegmentationParams& params) {
  const std::uint64_t key =
      fnv1a(lungs_key_text(volume, params) + "|" + spacing_text(volume.spacing()));
  const std::filesystem::path file = dir_.empty() ? std::filesystem::path{} : dir_ / (hex64(key) + "_lungs.hdr");
  {
    std::lock_guard lock(mutex_);
    if (auto it = lungs_.find(key); it != lungs_.end()) {
      ++hits_;
      return *it->second;
    }
    if (!file.empty() && std::filesystem::exists(file)) {
      auto mask = std::make_shared<const Mask>(read_mask(file));
      lungs_.emplace(key, mask);
      ++hits_;
      return *mask;
    }
    ++misses_;
  }
  auto mask = std::make_shared<const Mask>(segment_lungs(volume, params));
  std::lock_guard lock(mutex_);
  if (!file.empty()) write_mask(file, *mask);
  lungs_.emplace(key, mask);
  return *mask;
}

ScaleMap StageCache::scale(const Volume& volume, const Mask& lungs, const BScaleParams& params) {
  const std::uint64_t key = fnv1a(scale_key_text(volume, lungs, params) + "|" + spacing_text(volume.spacing()));
  const std::filesystem::path file = dir_.empty() ? std::filesystem::path{} : dir_ / (hex64(key) + "_scale.hdr");
  {
    std::lock_guard lock(mutex_);
    if (auto it = scales_.find(key); it != scales_.end()) {
      ++hits_;
      return *it->second;
    }
    if (!file.empty() && std::filesystem::exists(file)) {
      auto map = std::make_shared<const ScaleMap>(read_scale_map(file));
      scales_.emplace(key, map);
      ++hits_;
      return *map;
    }
    ++misses_;
  }
  auto map = std::make_shared<const ScaleMap>(bscale_map(volume, lungs, params));
  std::lock_guard lock(mutex_);
  if (!file.empty()) write_scale_map(file, *map);
  scales_.emplace(key, map);
  return *map;
}

std::size_t StageCache::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

std::size_t StageCache::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}

ScanView ScanStages::view() const {
  return ScanView{scanId, &volume, &lungs, &candidates, tib ? &*tib : nullptr};
}

ScanStages run_stages(std::string scanId, Volume volume, const PipelineConfig& config, StageCache* cache,
                      std::optional<Mask> tib) {
  ScanStages s;
  s.scanId = std::move(scanId);
  s.volume = std::move(volume);
  s.tib = std::move(tib);
  s.lungs = in_stage("segment", s.scanId, [&] {
    return cache ? cache->lungs(s.volume, config.seg) : segment_lungs(s.volume, config.seg);
  });
  s.scale = in_stage("bscale", s.scanId, [&] {
    return cache ? cache->scale(s.volume, s.lungs, config.bscale) : bscale_map(s.volume, s.lungs, config.bscale);
  });
  s.candidates = in_stage("candidates", s.scanId, [&] { return select_candidates(s.scale, config.bscale); });
  return s;
}

void SuiteConfig::validate() const {
  if (tibScans < 2 || cleanScans < 0) throw ConfigError("suite needs at least two TIB scans");
  if (calibrationSeeds.empty()) throw ConfigError("suite needs at least one calibration seed");
  base.validate();
}

SuiteConfig SuiteConfig::from_key_values(const KeyValues& kv) try {
  SuiteConfig s;
  KeyValues phantomKeys;
  for (const auto& key : kv.keys()) {
    if (key == "suite.tibScans") s.tibScans = static_cast<int>(kv.get_int(key));
    else if (key == "suite.cleanScans") s.cleanScans = static_cast<int>(kv.get_int(key));
    else if (key == "suite.firstSeed") s.firstSeed = static_cast<std::uint64_t>(kv.get_int(key));
    else if (key == "suite.calibrationSeeds") {
      s.calibrationSeeds.clear();
      for (auto v : kv.get_ints(key)) s.calibrationSeeds.push_back(static_cast<std::uint64_t>(v));
    } else if (key.rfind("phantom.", 0) == 0) phantomKeys.set(key.substr(8), kv.get(key));
  }
  s.base = PhantomSpec::from_key_values(phantomKeys);
  s.validate();
  return s;
} catch (const DataError& e) {
  throw ConfigError(e.what());
}

Suite prepare_suite(const SuiteConfig& suite, const PipelineConfig& config, StageCache* cache) {
  suite.validate();
  config.validate();
  struct Job {
    std::string id;
    PhantomSpec spec;
    bool calibration;
  };
  std::vector<Job> jobs;
  for (int i = 0; i < suite.tibScans; ++i) {
    PhantomSpec spec = suite.base;
    spec.seed = suite.firstSeed + static_cast<std::uint64_t>(i);
    jobs.push_back({"tib-" + std::to_string(spec.seed), spec, false});
  }
  for (int i = 0; i < suite.cleanScans; ++i) {
    PhantomSpec spec = suite.base;
    spec.seed = suite.firstSeed + static_cast<std::uint64_t>(suite.tibScans + i);
    spec.nTibClusters = 0;
    jobs.push_back({"clean-" + std::to_string(spec.seed), spec, false});
  }
  for (auto seed : suite.calibrationSeeds) {
    PhantomSpec spec = suite.base;
    spec.seed = seed;
    jobs.push_back({"calib-" + std::to_string(seed), spec, true});
  }

  std::vector<ScanStages> done(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    Phantom ph = in_stage("phantom", jobs[i].id, [&] { return generate_phantom(jobs[i].spec); });
    done[i] = run_stages(jobs[i].id, std::move(ph.volume), config, cache, std::move(ph.tibMask));
  });

  Suite out;
  for (std::size_t i = 0; i < jobs.size(); ++i)
    (jobs[i].calibration ? out.calibration : out.scans).push_back(std::move(done[i]));
  return out;
}

EnergyInterval learn_gate(const std::vector<ScanStages>& calibration, const PipelineConfig& config) {
  return in_stage("gate", "", [&] {
    std::vector<double> samples;
    for (const auto& scan : calibration) {
      const auto s = tib_energy_samples(scan.view(), config.patchSize, config.features.shapeSigma);
      samples.insert(samples.end(), s.begin(), s.end());
    }
    return learn_energy_interval(std::move(samples), config.gateLoQuantile, config.gateHiQuantile);
  });
}

Dataset build_dataset(const std::vector<ScanStages>& scans, const PipelineConfig& config, const EnergyInterval& gate,
                      ExtractionStats* stats) {
  ExtractionParams ep;
  ep.mode = config.mode;
  ep.patchSize = config.patchSize;
  ep.features = config.features;
  ep.interval = gate;
  ep.gating = config.gating;
  ep.tau = config.tau;
  ep.dropAmbiguous = true;

  Dataset data;
  data.schema = feature_schema(config.mode, config.patchSize);
  ExtractionStats local;
  for (const auto& scan : scans) {
    ScanFeatures f = in_stage("features", scan.scanId, [&] { return extract_scan_features(scan.view(), ep); });
    local.tiles += f.tiles;
    local.skipped += f.skipped;
    local.ambiguous += f.ambiguous;
    for (auto& s : f.samples) {
      (s.label ? local.abnormal : local.normal) += 1;
      data.samples.push_back(std::move(s));
    }
  }
  if (stats) *stats = local;
  return data;
}

SvmModel train_detector(const Dataset& data, const PipelineConfig& config) {
  return in_stage("train", "", [&] {
    SvmModel model = train_svm(data, config.svm);
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& s : data.samples) {
      scores.push_back(decision(model, s.x));
      labels.push_back(s.label);
    }
    model.threshold = operating_threshold(scores, labels, config.specificity);
    return model;
  });
}

SuiteEvaluation evaluate_suite(const Suite& suite, const PipelineConfig& config) {
  config.validate();
  SuiteEvaluation ev;
  ev.gate = learn_gate(suite.calibration, config);
  ev.data = build_dataset(suite.scans, config, ev.gate, &ev.stats);
  ev.cv = in_stage("evaluate", "", [&] {
    return repeated_crossval(ev.data, CvConfig{config.svm, config.folds}, config.seed, config.runs);
  });
  ev.model = train_detector(ev.data, config);
  return ev;
}

Detection detect(const ScanStages& scan, const SvmModel& model, const PipelineConfig& config,
                 const EnergyInterval& gate) {
  ExtractionParams ep;
  ep.mode = config.mode;
  ep.patchSize = config.patchSize;
  ep.features = config.features;
  ep.interval = gate;
  ep.gating = config.gating;
  ep.tau = config.tau;
  ep.dropAmbiguous = false;

  Detection det;
  det.features = in_stage("features", scan.scanId, [&] { return extract_scan_features(scan.view(), ep); });
  check_schema(model, feature_schema(config.mode, config.patchSize));
  det.overlay = Mask(scan.volume.dims(), scan.volume.spacing(), std::uint8_t{0});
  const int n = config.patchSize;
  in_stage("score", scan.scanId, [&] {
    for (const auto& s : det.features.samples) {
      const double score = decision(model, s.x);
      det.scores.push_back(score);
      if (score < model.threshold) continue;
      ++det.detections;
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) det.overlay.at(s.x0 + x, s.y0 + y, s.z) = 1;
    }
  });
  return det;
}

Comparison compare_feature_sets(const Suite& suite, const PipelineConfig& config, const std::vector<FeatureMode>& modes,
                                const std::vector<int>& patchSizes) {
  if (modes.size() < 2) throw ConfigError("comparison needs at least two feature modes");
  if (patchSizes.empty()) throw ConfigError("comparison needs at least one patch size");
  for (int n : patchSizes) validate_patch_size(n);

  Comparison cmp;
  cmp.modes = modes;
  cmp.patchSizes = patchSizes;
  cmp.az.assign(modes.size(), std::vector<double>(patchSizes.size(), 0.0));
  cmp.foldAucs.assign(modes.size(), std::vector<std::vector<double>>(patchSizes.size()));

  bool anyGlcm = false, anyWavelet = false;
  for (auto m : modes) {
    anyGlcm = anyGlcm || uses_glcm(m);
    anyWavelet = anyWavelet || uses_wavelet(m);
  }

  for (std::size_t si = 0; si < patchSizes.size(); ++si) {
    // One extraction per size with every needed group; modes are column subsets.
    PipelineConfig c = config;
    c.patchSize = patchSizes[si];
    const EnergyInterval gate = learn_gate(suite.calibration, c);
    c.mode = anyWavelet ? FeatureMode::ShapeWavelet : FeatureMode::Shape;
    const Dataset withWavelet = build_dataset(suite.scans, c, gate);
    Dataset withGlcm;
    if (anyGlcm) {
      c.mode = FeatureMode::ShapeGlcm;
      withGlcm = build_dataset(suite.scans, c, gate);
    }
    cmp.samplesPerSize.push_back(withWavelet.samples.size());

    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
      const FeatureSchema schema = feature_schema(modes[mi], patchSizes[si]);
      const Dataset& source = uses_glcm(modes[mi]) ? withGlcm : withWavelet;
      const Dataset data = select_columns(source, schema);
      const RepeatedCv cv = in_stage("compare " + std::string(to_string(modes[mi])), "", [&] {
        return repeated_crossval(data, CvConfig{config.svm, config.folds}, config.seed, config.runs);
      });
      cmp.az[mi][si] = cv.meanPooledAuc;
      cmp.foldAucs[mi][si] = cv.foldAucs;
    }
  }

  for (std::size_t mi = 0; mi < modes.size(); ++mi) {
    const auto& row = cmp.az[mi];
    cmp.bestSize.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  cmp.p.assign(modes.size(), std::vector<std::optional<TTestResult>>(modes.size()));
  for (std::size_t a = 0; a < modes.size(); ++a)
    for (std::size_t b = 0; b < modes.size(); ++b) {
      const auto& fa = cmp.foldAucs[a][static_cast<std::size_t>(cmp.bestSize[a])];
      const auto& fb = cmp.foldAucs[b][static_cast<std::size_t>(cmp.bestSize[b])];
      try {
        cmp.p[a][b] = paired_ttest(fa, fb);
      } catch (const DegenerateError&) {
        cmp.p[a][b] = std::nullopt;
      }
    }
  return cmp;
}

} // namespace tibcad
