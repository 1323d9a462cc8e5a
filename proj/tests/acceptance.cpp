// Acceptance checks, one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tibcad/bscale.hpp"
#include "tibcad/eval.hpp"
#include "tibcad/fcseg.hpp"
#include "tibcad/pipeline.hpp"
#include "tibcad/random.hpp"
#include "tibcad/report.hpp"
#include "tibcad/shapefeat.hpp"
#include "tibcad/texfeat.hpp"

using namespace tibcad;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void verdict(int id, bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s %d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Patch random_patch(int n, Rng& rng, int lo, int hi) {
  Patch p;
  p.n = n;
  p.spacing = Spacing{0.7, 0.7, 5};
  p.pixels.resize(static_cast<std::size_t>(n) * n);
  p.maskBits.assign(p.pixels.size(), 1);
  for (auto& v : p.pixels) v = static_cast<std::int16_t>(lo + static_cast<int>(rng.uniform() * (hi - lo + 1)));
  return p;
}

// ---------------------------------------------------------------------------

void criterion1() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::string detail;
  bool ok = true;

  double glcmErr = 0, featErr = 0;
  const GlcmParams gp;
  for (int t = 0; t < 100; ++t) {
    const Patch p = random_patch(8, rng, -1100, 500);
    const Glcm g = compute_glcm(p, gp);
    const auto ref = oracle::glcm(quantize(p, gp), 8, 8, gp.levels, gp.offsets);
    for (std::size_t k = 0; k < ref.size(); ++k) glcmErr = std::max(glcmErr, std::abs(g.p[k] - ref[k]));
    const auto f = glcm_features(g);
    const auto h = oracle::haralick(ref, gp.levels);
    for (std::size_t k = 0; k < f.size(); ++k)
      featErr = std::max(featErr, std::abs(f[k] - h[k]) / std::max(1.0, std::abs(h[k])));
  }
  ok = ok && glcmErr <= 1e-9 && featErr <= 1e-9;
  detail += "glcm " + fmt("%.1e", glcmErr) + ", features " + fmt("%.1e", featErr);

  double aucErr = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 10 + static_cast<int>(rng.uniform() * 90);
    std::vector<double> s;
    std::vector<int> l;
    for (int i = 0; i < n; ++i) {
      l.push_back(i < 2 ? i : (rng.uniform() < 0.3 ? 1 : 0));
      s.push_back(std::round(4 * rng.normal() + 2 * l.back()) / 4);
    }
    aucErr = std::max(aucErr, std::abs(roc(s, l).auc - oracle::mann_whitney(s, l)));
  }
  ok = ok && aucErr <= 1e-12;
  detail += ", auc " + fmt("%.1e", aucErr);

  std::size_t scaleMismatch = 0;
  for (unsigned t = 0; t < 20; ++t) {
    Volume v(Dims{16, 16, 1}, Spacing{1, 1, 1}, std::int16_t{0});
    const int block = 2 + static_cast<int>(rng.uniform() * 5);
    std::vector<int> level(64);
    for (auto& x : level) x = static_cast<int>(rng.uniform() * 4) * 200 - 800;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        v.at(x, y, 0) = static_cast<std::int16_t>(level[(y / block) * 8 + x / block] + static_cast<int>(rng.uniform() * 61) - 30);
    const BScaleParams bp;
    const ScaleMap s = bscale_map(v, Mask(v.dims(), v.spacing(), std::uint8_t{1}), bp);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        scaleMismatch += s.at(x, y, 0) != oracle::ball_scale(v, x, y, 0, bp.intensityTol, bp.fractionThreshold, bp.rMax);
  }
  ok = ok && scaleMismatch == 0;
  detail += ", b-scale mismatches " + std::to_string(scaleMismatch);

  // Simple-path walk with dominance pruning: the max-min value over simple
  // paths equals that over all walks, so pruning keeps the maximum exact.
  std::size_t fcMismatch = 0;
  for (unsigned t = 0; t < 20; ++t) {
    const Volume v = random_volume({4, 4, 2}, 700 + t, -1000, 0);
    const SeedSet seeds{static_cast<std::size_t>(rng.uniform() * 32)};
    const auto got = fc_connectivity(v, seeds, Affinity{}).strength;
    const auto want = oracle::fc_paths(v, seeds, Affinity{}, true);
    for (std::size_t i = 0; i < got.size(); ++i) fcMismatch += got[i] != want[i];
  }
  ok = ok && fcMismatch == 0;
  detail += ", fc mismatches " + std::to_string(fcMismatch);

  double tErr = 0;
  for (int t = 0; t < 40; ++t) {
    const int n = 3 + static_cast<int>(rng.uniform() * 18);
    std::vector<double> a, b;
    for (int i = 0; i < n; ++i) {
      a.push_back(rng.normal());
      b.push_back(rng.normal() + 0.3);
    }
    const TTestResult r = paired_ttest(a, b);
    tErr = std::max(tErr, std::abs(r.p - oracle::t_two_sided(r.t, r.df)));
  }
  ok = ok && tErr <= 1e-6;
  detail += ", t-test p " + fmt("%.1e", tErr);

  const double secs = seconds_since(t0);
  ok = ok && secs < 60;
  detail += ", " + fmt("%.1f s", secs);
  verdict(1, ok, "oracle equivalences", detail);
}

// ---------------------------------------------------------------------------

Image2D sampled(int n, double h, const std::function<double(double, double)>& f) {
  Image2D img(n, n, h, h);
  const int c = n / 2;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) img.at(x, y) = f((x - c) * h, (y - c) * h);
  return img;
}

void criterion2() {
  bool ok = true;
  double worstRel = 0;
  for (double h : {1.0, 0.7}) {
    for (double sign : {1.0, -1.0}) {
      const Image2D img = sampled(31, h, [&](double x, double y) { return 0.5 * (x * x + sign * y * y); });
      const HessianField f = hessian_eigen(img, 1.5);
      const std::size_t c = 15 * 31 + 15;
      // Compare as sorted pairs: a saddle has no magnitude order.
      const double lo = std::min(f.k1[c], f.k2[c]), hi = std::max(f.k1[c], f.k2[c]);
      const double wantLo = std::min(1.0, sign), wantHi = 1.0;
      worstRel = std::max({worstRel, std::abs(lo - wantLo) / std::abs(wantLo), std::abs(hi - wantHi) / wantHi});
    }
  }
  ok = ok && worstRel <= 0.05;

  double minW = 0;
  Rng rng(202);
  for (int t = 0; t < 1000; ++t) {
    // Random sums of Gaussians and low-frequency waves.
    struct Term { double a, cx, cy, s, kx, ky, ph; };
    std::vector<Term> terms;
    for (int k = 0; k < 4; ++k)
      terms.push_back({rng.normal() * 300, rng.uniform() * 10 - 5, rng.uniform() * 10 - 5, 1 + rng.uniform() * 4,
                       rng.normal() * 0.5, rng.normal() * 0.5, rng.uniform() * 6.3});
    const Image2D img = sampled(17, 0.7, [&](double x, double y) {
      double v = 0;
      for (const auto& q : terms)
        v += q.a * std::exp(-((x - q.cx) * (x - q.cx) + (y - q.cy) * (y - q.cy)) / (2 * q.s * q.s)) +
             0.3 * q.a * std::cos(q.kx * x + q.ky * y + q.ph);
      return v;
    });
    const CurvatureMaps m = curvature_maps(hessian_eigen(img, 1.5));
    for (double w : m.W) minW = std::min(minW, w);
  }
  ok = ok && minW >= -1e-9;

  std::size_t umbilicNonzero = 0;
  for (double h : {1.0, 0.7, 0.5}) {
    const Image2D img = sampled(31, h, [](double x, double y) { return 0.5 * (x * x + y * y); });
    const CurvatureMaps m = curvature_maps(hessian_eigen(img, 1.5));
    const int r = kernel_radius(1.5);
    for (int y = r; y < 31 - r; ++y)
      for (int x = r; x < 31 - r; ++x) umbilicNonzero += m.W[static_cast<std::size_t>(y) * 31 + x] != 0.0;
  }
  ok = ok && umbilicNonzero == 0;

  verdict(2, ok, "analytic curvature",
          "quadratic kappa rel err " + fmt("%.4f", worstRel) + ", min W over 1000 images " + fmt("%.2e", minW) +
              ", nonzero umbilic W " + std::to_string(umbilicNonzero));
}

// ---------------------------------------------------------------------------

ShapeFeatures shape_of(const Patch& p) {
  const HessianField f = hessian_eigen(p, 1.5);
  const PatchGate gate{std::vector<std::uint8_t>(f.k1.size(), 1), EnergyInterval{-1e300, 1e300}, true};
  return *shape_vector(p, f, curvature_maps(f), gate);
}

void criterion3() {
  Rng rng(303);
  double rotErr = 0;
  bool shiftExact = true;
  for (int n : {9, 13, 17}) {
    for (int t = 0; t < 20; ++t) {
      const Patch p = random_patch(n, rng, -950, -200);
      Patch r = p, s = p;
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
          r.pixels[static_cast<std::size_t>(x) * n + (n - 1 - y)] = p.pixels[static_cast<std::size_t>(y) * n + x];
      for (auto& v : s.pixels) v = static_cast<std::int16_t>(v + 137);
      const ShapeFeatures a = shape_of(p), b = shape_of(r), c = shape_of(s);
      for (std::size_t k = 0; k < kShapeFeatureCount; ++k) {
        rotErr = std::max(rotErr, std::abs(a[k] - b[k]) / std::max(1.0, std::abs(a[k])));
        shiftExact = shiftExact && std::abs(a[k] - c[k]) <= 1e-9 * std::max(1.0, std::abs(a[k]));
      }
    }
  }

  double worstRatio = 1.0;
  for (double s : {1.5, 2.0, 3.0}) {
    const auto energy = [&](double h) {
      const int n = static_cast<int>(std::lround(24.0 / h)) + 1;
      const Image2D img = sampled(n, h, [&](double x, double y) { return 300.0 * std::exp(-(x * x + y * y) / (2 * s * s)); });
      const CurvatureMaps m = curvature_maps(hessian_eigen(img, 1.05 / h));
      double e = 0;
      for (double w : m.W) e += w;
      return e * h * h;
    };
    const double ratio = energy(0.7) / energy(0.35);
    if (std::abs(ratio - 1) > std::abs(worstRatio - 1)) worstRatio = ratio;
  }
  const bool ok = rotErr <= 1e-9 && shiftExact && std::abs(worstRatio - 1) <= 0.10;
  verdict(3, ok, "invariance",
          "rotation rel err " + fmt("%.1e", rotErr) + ", shift " + (shiftExact ? "identical" : "differs") +
              ", bump energy h/(h/2) " + fmt("%.4f", worstRatio));
}

// ---------------------------------------------------------------------------

void criterion4(const SuiteConfig& sc) {
  const auto t0 = Clock::now();
  PipelineConfig cfg;
  const Suite suite = prepare_suite(sc, cfg);

  std::size_t tib = 0, tibKept = 0, lung = 0, lungDropped = 0;
  for (const auto& s : suite.scans) {
    for (std::size_t i = 0; i < s.lungs.size(); ++i) {
      if ((*s.tib)[i]) {
        ++tib;
        tibKept += s.candidates[i] != 0;
      }
      if (s.lungs[i]) {
        ++lung;
        lungDropped += s.candidates[i] == 0;
      }
    }
  }
  const double recall = static_cast<double>(tibKept) / static_cast<double>(tib);
  const double dropped = static_cast<double>(lungDropped) / static_cast<double>(lung);
  const bool a = recall >= 0.95 && dropped >= 0.50;

  const Comparison cmp =
      compare_feature_sets(suite, cfg, {FeatureMode::Shape, FeatureMode::Glcm, FeatureMode::ShapeGlcm}, {9});
  const double azShape = cmp.az[0][0], azGlcm = cmp.az[1][0], azBoth = cmp.az[2][0];
  const bool b = azBoth >= 0.85;
  const bool c = azBoth >= azShape && azBoth >= azGlcm;
  const double secs = seconds_since(t0);
  const bool d = secs < 300;

  verdict(4, a && b && c && d, "phantom end-to-end",
          "(a) TIB recall " + fmt("%.4f", recall) + ", lung discarded " + fmt("%.4f", dropped) + "; (b) Az shape+glcm " +
              fmt("%.4f", azBoth) + "; (c) shape " + fmt("%.4f", azShape) + ", glcm " + fmt("%.4f", azGlcm) +
              "; (d) " + fmt("%.1f s", secs));
}

// ---------------------------------------------------------------------------

struct RunArtifacts {
  std::string csv;
  std::string model;
  std::string report;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunArtifacts full_run(const SuiteConfig& sc, const PipelineConfig& cfg, const std::filesystem::path& dir, SuiteEvaluation* keep) {
  const Suite suite = prepare_suite(sc, cfg);
  SuiteEvaluation ev = evaluate_suite(suite, cfg);
  write_dataset_csv(dir / "features.csv", ev.data);
  save_model(dir / "model.txt", ev.model);
  std::ofstream(dir / "report.txt") << evaluation_report(ev, cfg);
  RunArtifacts out{slurp(dir / "features.csv"), slurp(dir / "model.txt"), slurp(dir / "report.txt")};
  if (keep) *keep = std::move(ev);
  return out;
}

void criterion5_6(const SuiteConfig& sc) {
  PipelineConfig cfg;
  SuiteEvaluation ev;
  const RunArtifacts first = full_run(sc, cfg, scratch_dir("acceptance_run1"), &ev);
  const RunArtifacts second = full_run(sc, cfg, scratch_dir("acceptance_run2"), nullptr);
  const bool same = !first.csv.empty() && first.csv == second.csv && first.model == second.model &&
                    first.report == second.report;
  verdict(5, same, "determinism",
          std::string("features.csv ") + (first.csv == second.csv ? "identical" : "differs") + " (" +
              std::to_string(first.csv.size()) + " bytes), model " + (first.model == second.model ? "identical" : "differs") +
              ", report " + (first.report == second.report ? "identical" : "differs"));

  // Gating off must score a superset with bit-identical shared entries.
  const Suite suite = prepare_suite(sc, cfg);
  PipelineConfig off = cfg;
  off.gating = false;
  std::size_t shared = 0, missing = 0, changed = 0, gatedRows = 0, ungatedRows = 0;
  for (const auto& scan : suite.scans) {
    const Detection on = detect(scan, ev.model, cfg, ev.gate);
    const Detection all = detect(scan, ev.model, off, ev.gate);
    gatedRows += on.scores.size();
    ungatedRows += all.scores.size();
    std::map<std::tuple<int, int, int>, std::size_t> index;
    for (std::size_t i = 0; i < all.features.samples.size(); ++i) {
      const Sample& x = all.features.samples[i];
      index[{x.z, x.y0, x.x0}] = i;
    }
    for (std::size_t i = 0; i < on.features.samples.size(); ++i) {
      const Sample& x = on.features.samples[i];
      const auto it = index.find({x.z, x.y0, x.x0});
      if (it == index.end()) {
        ++missing;
        continue;
      }
      ++shared;
      const Sample& y = all.features.samples[it->second];
      if (y.x != x.x || all.scores[it->second] != on.scores[i]) ++changed;
    }
  }
  verdict(6, missing == 0 && changed == 0 && shared > 0 && ungatedRows > gatedRows, "gating soundness",
          std::to_string(gatedRows) + " gated rows, " + std::to_string(ungatedRows) + " ungated, " +
              std::to_string(missing) + " missing, " + std::to_string(changed) + " changed");
}

} // namespace

int main() {
  const auto guarded = [](int id, const std::function<void()>& f) {
    try {
      f();
    } catch (const std::exception& e) {
      verdict(id, false, "error", e.what());
    }
  };
  const SuiteConfig suite;  // 20 TIB + 10 clean phantoms, seeds 1-30, 64x64x24
  guarded(1, criterion1);
  guarded(2, criterion2);
  guarded(3, criterion3);
  guarded(4, [&] { criterion4(suite); });
  guarded(5, [&] { criterion5_6(suite); });
  return failures;
}
