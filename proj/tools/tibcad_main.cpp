// Command-line front end. Exit codes: 0 ok, 2 configuration error, 3 data
// error, 4 degenerate statistics.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tibcad/bscale.hpp"
#include "tibcad/dataset.hpp"
#include "tibcad/error.hpp"
#include "tibcad/eval.hpp"
#include "tibcad/fcseg.hpp"
#include "tibcad/features.hpp"
#include "tibcad/phantom.hpp"
#include "tibcad/pipeline.hpp"
#include "tibcad/report.hpp"
#include "tibcad/svm.hpp"
#include "tibcad/volio.hpp"

using namespace tibcad;
namespace fs = std::filesystem;

namespace {

/// --config plus the flags that override its keys.
struct Settings {
  std::string configPath;
  std::optional<std::string> mode;
  std::optional<int> patchSize;
  std::optional<double> theta;
  std::optional<double> c;
  std::optional<int> epochs;
  std::optional<long long> svmSeed;
  std::optional<int> folds;
  std::optional<int> runs;
  std::optional<long long> seed;
  std::optional<double> tau;
  std::optional<double> specificity;
  std::optional<std::string> cacheDir;
  bool noGating = false;

  KeyValues pipeline_keys;
  KeyValues suite_keys;

  void load() {
    KeyValues all;
    if (!configPath.empty()) {
      try {
        all = KeyValues::load(configPath);
      } catch (const DataError& e) {
        throw ConfigError(e.what());
      }
    }
    for (const auto& key : all.keys()) {
      if (key.rfind("suite.", 0) == 0 || key.rfind("phantom.", 0) == 0)
        suite_keys.set(key, all.get(key));
      else
        pipeline_keys.set(key, all.get(key));
    }
    auto& kv = pipeline_keys;
    if (mode) kv.set("mode", *mode);
    if (patchSize) kv.set("patchSize", static_cast<long long>(*patchSize));
    if (theta) kv.set("seg.theta", *theta);
    if (c) kv.set("svm.C", *c);
    if (epochs) kv.set("svm.epochs", static_cast<long long>(*epochs));
    if (svmSeed) kv.set("svm.seed", *svmSeed);
    if (folds) kv.set("cv.folds", static_cast<long long>(*folds));
    if (runs) kv.set("cv.runs", static_cast<long long>(*runs));
    if (seed) kv.set("cv.seed", *seed);
    if (tau) kv.set("tau", *tau);
    if (specificity) kv.set("specificity", *specificity);
    if (cacheDir) kv.set("cacheDir", *cacheDir);
    if (noGating) kv.set("gating", std::string("false"));
  }

  PipelineConfig pipeline() const { return PipelineConfig::from_key_values(pipeline_keys); }
  SuiteConfig suite() const { return SuiteConfig::from_key_values(suite_keys); }
};

void add_config(CLI::App* cmd, Settings& s) {
  cmd->add_option("--config", s.configPath, "key:value configuration file")->check(CLI::ExistingFile);
}

void log(const std::string& line) { std::cerr << line << '\n'; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

fs::path sibling_schema(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".schema");
  return p;
}

/// Curvature maps of every lung tile, written as three float volumes.
void export_curvature(const ScanView& scan, int n, double sigma, const std::string& prefix) {
  FloatMap h(scan.volume->dims(), scan.volume->spacing(), 0.0f);
  FloatMap k = h, w = h;
  for (const auto& patch : tile_patches(*scan.volume, *scan.lungMask, n)) {
    const CurvatureMaps maps = curvature_maps(hessian_eigen(patch, sigma));
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * n + x;
        h.at(patch.x0 + x, patch.y0 + y, patch.z) = static_cast<float>(maps.H[i]);
        k.at(patch.x0 + x, patch.y0 + y, patch.z) = static_cast<float>(maps.K[i]);
        w.at(patch.x0 + x, patch.y0 + y, patch.z) = static_cast<float>(maps.W[i]);
      }
  }
  write_float_map(prefix + "_H.hdr", h);
  write_float_map(prefix + "_K.hdr", k);
  write_float_map(prefix + "_W.hdr", w);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-in-bud pattern detection on chest CT volumes"};
  app.require_subcommand(1);
  Settings settings;

  // phantom
  std::string phantomSpec, outPrefix;
  std::optional<long long> phantomSeed;
  std::optional<int> phantomClusters;
  auto* phantomCmd = app.add_subcommand("phantom", "Generate a synthetic chest volume with ground truth");
  phantomCmd->add_option("--spec", phantomSpec, "phantom spec (key:value)")->check(CLI::ExistingFile);
  phantomCmd->add_option("--out-prefix", outPrefix, "writes <prefix>.hdr, <prefix>_lungs.hdr, <prefix>_tib.hdr")
      ->required();
  phantomCmd->add_option("--seed", phantomSeed, "override the phantom seed");
  phantomCmd->add_option("--clusters", phantomClusters, "override the number of TIB clusters");

  // segment
  std::string inPath, outPath, lungsPath, candPath, scalePath;
  auto* segmentCmd = app.add_subcommand("segment", "Fuzzy-connectedness lung segmentation");
  segmentCmd->add_option("--in", inPath, "volume header")->required()->check(CLI::ExistingFile);
  segmentCmd->add_option("--out", outPath, "lung mask header")->required();
  segmentCmd->add_option("--theta", settings.theta, "connectivity threshold in [0, 1]");
  add_config(segmentCmd, settings);

  // candidates
  auto* candCmd = app.add_subcommand("candidates", "Ball-scale map and TIB candidate voxels");
  candCmd->add_option("--in", inPath, "volume header")->required()->check(CLI::ExistingFile);
  candCmd->add_option("--lungs", lungsPath, "lung mask header")->required()->check(CLI::ExistingFile);
  candCmd->add_option("--out", scalePath, "scale map header")->required();
  candCmd->add_option("--candidates", candPath, "candidate mask header")->required();
  add_config(candCmd, settings);

  // features
  std::string tibPath, scanId, gatePath, learnGatePath, curvaturePrefix, schemaPath;
  bool append = false;
  auto* featCmd = app.add_subcommand("features", "Gated per-patch feature extraction to CSV");
  featCmd->add_option("--in", inPath, "volume header")->required()->check(CLI::ExistingFile);
  featCmd->add_option("--lungs", lungsPath, "lung mask header")->required()->check(CLI::ExistingFile);
  featCmd->add_option("--candidates", candPath, "candidate mask header")->check(CLI::ExistingFile);
  featCmd->add_option("--tib", tibPath, "ground-truth TIB mask for labels")->check(CLI::ExistingFile);
  featCmd->add_option("--scan-id", scanId, "scan identifier (default: volume file stem)");
  featCmd->add_option("--mode", settings.mode, "shape|glcm|wavelet|shape+glcm|shape+wavelet");
  featCmd->add_option("--patch-size", settings.patchSize, "9, 13 or 17");
  featCmd->add_option("--tau", settings.tau, "TIB overlap fraction for an abnormal label");
  featCmd->add_option("--gate", gatePath, "energy interval file")->check(CLI::ExistingFile);
  featCmd->add_option("--learn-gate", learnGatePath, "learn the energy interval from --tib and write it here");
  featCmd->add_flag("--no-gating", settings.noGating, "process every lung patch");
  featCmd->add_option("--out", outPath, "feature CSV")->required();
  featCmd->add_option("--schema", schemaPath, "feature-order manifest (default: CSV path with .schema)");
  featCmd->add_flag("--append", append, "append rows to an existing CSV with the same schema");
  featCmd->add_option("--curvature", curvaturePrefix, "also write <prefix>_H/_K/_W float volumes");
  add_config(featCmd, settings);

  // train
  std::string featuresPath, modelPath;
  auto* trainCmd = app.add_subcommand("train", "Train the linear SVM on a feature CSV");
  trainCmd->add_option("--features", featuresPath, "feature CSV")->required()->check(CLI::ExistingFile);
  trainCmd->add_option("--out", modelPath, "model file")->required();
  trainCmd->add_option("--c", settings.c, "regularization C");
  trainCmd->add_option("--epochs", settings.epochs, "training epochs");
  trainCmd->add_option("--seed", settings.svmSeed, "shuffling seed");
  trainCmd->add_option("--specificity", settings.specificity, "operating point on training scores");
  add_config(trainCmd, settings);

  // evaluate
  std::string rocPath, svgPath;
  auto* evalCmd = app.add_subcommand("evaluate", "Repeated scan-level cross-validation of a feature CSV");
  evalCmd->add_option("--features", featuresPath, "feature CSV")->required()->check(CLI::ExistingFile);
  evalCmd->add_option("--folds", settings.folds, "folds per run");
  evalCmd->add_option("--runs", settings.runs, "repeated runs");
  evalCmd->add_option("--seed", settings.seed, "split seed");
  evalCmd->add_option("--c", settings.c, "regularization C");
  evalCmd->add_option("--out", outPath, "text report")->required();
  evalCmd->add_option("--roc", rocPath, "ROC CSV of the first run");
  evalCmd->add_option("--svg", svgPath, "ROC plot");
  add_config(evalCmd, settings);

  // compare
  std::vector<std::string> modeNames{"shape", "glcm", "wavelet", "shape+glcm", "shape+wavelet"};
  std::vector<int> sizes{17, 13, 9};
  std::string azCsv, pCsv;
  auto* compareCmd = app.add_subcommand("compare", "Compare feature sets on the phantom suite");
  compareCmd->add_option("--modes", modeNames, "feature modes")->delimiter(',');
  compareCmd->add_option("--sizes", sizes, "patch sizes")->delimiter(',');
  compareCmd->add_option("--runs", settings.runs, "repeated runs");
  compareCmd->add_option("--seed", settings.seed, "split seed");
  compareCmd->add_option("--cache-dir", settings.cacheDir, "stage cache directory");
  compareCmd->add_option("--out", outPath, "text report")->required();
  compareCmd->add_option("--az-csv", azCsv, "Az grid CSV");
  compareCmd->add_option("--p-csv", pCsv, "p-value matrix CSV");
  add_config(compareCmd, settings);

  // run
  std::string outDir;
  auto* runCmd = app.add_subcommand(
      "run", "End-to-end pipeline: on the phantom suite, or on one volume with --in, --model and --gate");
  runCmd->add_option("--in", inPath, "volume header to score")->check(CLI::ExistingFile);
  runCmd->add_option("--tib", tibPath, "ground-truth TIB mask of --in")->check(CLI::ExistingFile);
  runCmd->add_option("--model", modelPath, "trained model for --in")->check(CLI::ExistingFile);
  runCmd->add_option("--gate", gatePath, "energy interval for --in")->check(CLI::ExistingFile);
  runCmd->add_option("--out-dir", outDir, "output directory")->required();
  runCmd->add_option("--mode", settings.mode, "feature mode");
  runCmd->add_option("--patch-size", settings.patchSize, "9, 13 or 17");
  runCmd->add_option("--runs", settings.runs, "repeated cross-validation runs");
  runCmd->add_option("--seed", settings.seed, "split seed");
  runCmd->add_option("--cache-dir", settings.cacheDir, "stage cache directory");
  runCmd->add_flag("--no-gating", settings.noGating, "process every lung patch");
  add_config(runCmd, settings);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    settings.load();

    if (phantomCmd->parsed()) {
      PhantomSpec spec;
      if (!phantomSpec.empty()) {
        KeyValues kv;
        try {
          kv = KeyValues::load(phantomSpec);
        } catch (const DataError& e) {
          throw ConfigError(e.what());
        }
        spec = PhantomSpec::from_key_values(kv);
      }
      if (phantomSeed) spec.seed = static_cast<std::uint64_t>(*phantomSeed);
      if (phantomClusters) spec.nTibClusters = *phantomClusters;
      const Phantom ph = generate_phantom(spec);
      write_volume(outPrefix + ".hdr", ph.volume);
      write_mask(outPrefix + "_lungs.hdr", ph.lungMask);
      write_mask(outPrefix + "_tib.hdr", ph.tibMask);
      log("phantom seed " + std::to_string(spec.seed) + ": " + std::to_string(count_components(ph.tibMask)) +
          " TIB clusters, volume checksum " + hex64(checksum(ph.volume)));
      return 0;
    }

    const PipelineConfig config = settings.pipeline();

    if (segmentCmd->parsed()) {
      const Volume volume = read_volume(inPath);
      const Mask lungs = segment_lungs(volume, config.seg);
      write_mask(outPath, lungs);
      log("lung voxels: " + std::to_string(count_nonzero(lungs)));
      return 0;
    }

    if (candCmd->parsed()) {
      const Volume volume = read_volume(inPath);
      const Mask lungs = read_mask(lungsPath);
      if (!same_shape(volume, lungs)) throw DataError("volume and lung mask dimensions differ");
      const ScaleMap scale = bscale_map(volume, lungs, config.bscale);
      const Mask cand = select_candidates(scale, config.bscale);
      write_scale_map(scalePath, scale);
      write_mask(candPath, cand);
      log("candidate voxels: " + std::to_string(count_nonzero(cand)) + " of " + std::to_string(count_nonzero(lungs)) +
          " lung voxels");
      return 0;
    }

    if (featCmd->parsed()) {
      const Volume volume = read_volume(inPath);
      const Mask lungs = read_mask(lungsPath);
      std::optional<Mask> cand, tib;
      if (!candPath.empty()) cand = read_mask(candPath);
      if (!tibPath.empty()) tib = read_mask(tibPath);
      if (scanId.empty()) scanId = fs::path(inPath).stem().string();
      const ScanView view{scanId, &volume, &lungs, cand ? &*cand : nullptr, tib ? &*tib : nullptr};

      EnergyInterval gate{};
      if (!learnGatePath.empty()) {
        gate = learn_energy_interval(tib_energy_samples(view, config.patchSize, config.features.shapeSigma),
                                     config.gateLoQuantile, config.gateHiQuantile);
        write_gate(learnGatePath, gate);
      } else if (!gatePath.empty()) {
        gate = read_gate(gatePath);
      } else if (config.gating) {
        throw ConfigError("gated extraction needs --gate or --learn-gate (or --no-gating)");
      }

      ExtractionParams ep;
      ep.mode = config.mode;
      ep.patchSize = config.patchSize;
      ep.features = config.features;
      ep.interval = gate;
      ep.gating = config.gating;
      ep.tau = config.tau;
      const ScanFeatures f = extract_scan_features(view, ep);

      Dataset data;
      data.schema = feature_schema(config.mode, config.patchSize);
      if (append && fs::exists(outPath)) {
        Dataset existing = read_dataset_csv(outPath);
        if (!(existing.schema == data.schema)) throw DataError(outPath + ": existing columns differ from this mode");
        data.samples = std::move(existing.samples);
      }
      data.samples.insert(data.samples.end(), f.samples.begin(), f.samples.end());
      write_dataset_csv(fs::path(outPath), data);
      write_schema(schemaPath.empty() ? sibling_schema(outPath) : fs::path(schemaPath), data.schema,
                   "mode " + std::string(to_string(config.mode)) + ", patch " + std::to_string(config.patchSize));
      if (!curvaturePrefix.empty()) export_curvature(view, config.patchSize, config.features.shapeSigma, curvaturePrefix);
      log(std::to_string(f.tiles) + " patches tiled, " + std::to_string(f.skipped) + " skipped by gating, " +
          std::to_string(f.ambiguous) + " ambiguous, " + std::to_string(f.samples.size()) + " written");
      return 0;
    }

    if (trainCmd->parsed()) {
      const Dataset data = read_dataset_csv(featuresPath);
      const SvmModel model = train_detector(data, config);
      save_model(modelPath, model);
      log("trained on " + std::to_string(data.samples.size()) + " rows, objective " + format_double(model.objective));
      return 0;
    }

    if (evalCmd->parsed()) {
      const Dataset data = read_dataset_csv(featuresPath);
      const RepeatedCv cv = repeated_crossval(data, CvConfig{config.svm, config.folds}, config.seed, config.runs);
      write_text(outPath, cv_report(data, cv, config));
      if (!rocPath.empty()) write_roc_csv(rocPath, cv.runs.front().pooled);
      if (!svgPath.empty()) write_roc_svg(svgPath, {{"run 0", cv.runs.front().pooled}});
      log("mean pooled Az " + format_double(cv.meanPooledAuc));
      return 0;
    }

    if (compareCmd->parsed()) {
      std::vector<FeatureMode> modes;
      for (const auto& m : modeNames) modes.push_back(parse_feature_mode(m));
      StageCache cache(config.cacheDir);
      const Suite suite = prepare_suite(settings.suite(), config, &cache);
      const Comparison cmp = compare_feature_sets(suite, config, modes, sizes);
      write_text(outPath, comparison_report(cmp, config));
      if (!azCsv.empty() || !pCsv.empty())
        write_comparison_csv(azCsv.empty() ? fs::path(outPath).replace_extension(".az.csv") : fs::path(azCsv),
                             pCsv.empty() ? fs::path(outPath).replace_extension(".p.csv") : fs::path(pCsv), cmp);
      return 0;
    }

    if (runCmd->parsed()) {
      fs::create_directories(outDir);
      const fs::path dir(outDir);
      StageCache cache(config.cacheDir);
      if (!inPath.empty()) {
        if (modelPath.empty() || gatePath.empty()) throw ConfigError("run --in needs --model and --gate");
        const SvmModel model = load_model(modelPath);
        const EnergyInterval gate = read_gate(gatePath);
        std::optional<Mask> tib;
        if (!tibPath.empty()) tib = read_mask(tibPath);
        const std::string id = fs::path(inPath).stem().string();
        const ScanStages scan = run_stages(id, read_volume(inPath), config, &cache, tib);
        const Detection det = detect(scan, model, config, gate);
        write_mask(dir / "lungs.hdr", scan.lungs);
        write_mask(dir / "candidates.hdr", scan.candidates);
        write_mask(dir / "overlay.hdr", det.overlay);
        write_scores_csv(dir / "scores.csv", det);
        write_text(dir / "report.txt", detection_report(id, det, model));
        log(std::to_string(det.detections) + " patches above threshold, " + std::to_string(det.features.skipped) +
            " skipped by gating");
        return 0;
      }
      const Suite suite = prepare_suite(settings.suite(), config, &cache);
      const SuiteEvaluation ev = evaluate_suite(suite, config);
      write_dataset_csv(dir / "features.csv", ev.data);
      write_schema(dir / "features.schema", ev.data.schema,
                   "mode " + std::string(to_string(config.mode)) + ", patch " + std::to_string(config.patchSize));
      write_gate(dir / "gate.txt", ev.gate);
      save_model(dir / "model.txt", ev.model);
      write_text(dir / "report.txt", evaluation_report(ev, config));
      write_roc_csv(dir / "roc.csv", ev.cv.runs.front().pooled);
      write_roc_svg(dir / "roc.svg", {{std::string(to_string(config.mode)), ev.cv.runs.front().pooled}});
      log("mean pooled Az " + format_double(ev.cv.meanPooledAuc) + ", " + std::to_string(ev.stats.skipped) +
          " patches skipped by gating");
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
