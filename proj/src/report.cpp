#include "tibcad/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "tibcad/error.hpp"

namespace tibcad {
namespace {

std::string fixed(double v, int precision) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
  return std::string(buf, r.ptr);
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string size_label(int n) { return std::to_string(n) + "x" + std::to_string(n); }

} // namespace

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve) {
  auto out = open_out(path);
  out << "threshold,fpr,tpr\n";
  for (const auto& p : curve.points)
    out << format_double(p.threshold) << ',' << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
}

std::string roc_svg(const std::vector<std::pair<std::string, RocCurve>>& curves) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  constexpr double size = 400.0, margin = 50.0;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * margin << "\" height=\""
    << size + 2 * margin << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\"" << size
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << margin << "\" y1=\"" << margin + size << "\" x2=\"" << margin + size << "\" y2=\"" << margin
    << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 4\"/>\n";
  s << "<text x=\"" << margin + size / 2 << "\" y=\"" << size + 1.7 * margin
    << "\" text-anchor=\"middle\">false positive rate</text>\n";
  s << "<text x=\"15\" y=\"" << margin + size / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
    << margin + size / 2 << ")\">true positive rate</text>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* color = colors[c % std::size(colors)];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : curves[c].second.points)
      s << fixed(margin + p.fpr * size, 2) << ',' << fixed(margin + (1.0 - p.tpr) * size, 2) << ' ';
    s << "\"/>\n";
    const double y = margin + size - 20.0 * static_cast<double>(curves.size() - c);
    s << "<text x=\"" << margin + size - 10 << "\" y=\"" << y << "\" text-anchor=\"end\" fill=\"" << color << "\">"
      << curves[c].first << " (Az " << fixed(curves[c].second.auc, 4) << ")</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void write_roc_svg(const std::filesystem::path& path, const std::vector<std::pair<std::string, RocCurve>>& curves) {
  auto out = open_out(path);
  out << roc_svg(curves);
}

std::string cv_report(const Dataset& data, const RepeatedCv& cv, const PipelineConfig& config) {
  std::ostringstream s;
  std::size_t pos = 0;
  std::set<std::string> scans;
  for (const auto& x : data.samples) {
    pos += x.label == 1;
    scans.insert(x.scanId);
  }
  s << "features        " << data.schema.size() << " columns, schema " << data.schema.hash() << "\n";
  s << "samples         " << data.samples.size() << " (" << pos << " abnormal, " << data.samples.size() - pos
    << " normal) from " << scans.size() << " scans\n";
  s << "cross-validation " << config.folds << "-fold by scan, " << cv.runs.size() << " runs, seed " << config.seed
    << "\n";
  s << "svm             C " << format_double(config.svm.C) << ", epochs " << config.svm.epochs << ", seed "
    << config.svm.seed << "\n\n";
  s << "run  seed                  attempts  pooled Az  fold Az\n";
  for (std::size_t r = 0; r < cv.runs.size(); ++r) {
    const auto& run = cv.runs[r];
    s << pad(std::to_string(r), 5) << pad(std::to_string(run.seed), 22) << pad(std::to_string(run.attempts), 10)
      << pad(fixed(run.pooled.auc, 4), 11);
    for (const auto& f : run.folds) s << fixed(f.auc, 4) << ' ';
    s << "\n";
  }
  s << "\nmean pooled Az  " << fixed(cv.meanPooledAuc, 6) << "\n";
  return s.str();
}

std::string evaluation_report(const SuiteEvaluation& ev, const PipelineConfig& config) {
  std::ostringstream s;
  s << "tree-in-bud detection report\n\n";
  s << "mode            " << to_string(config.mode) << ", patch " << size_label(config.patchSize) << "\n";
  s << "energy gate     [" << format_double(ev.gate.lo) << ", " << format_double(ev.gate.hi) << "]"
    << (config.gating ? "" : " (gating disabled)") << "\n";
  s << "patches         " << ev.stats.tiles << " tiled, " << ev.stats.skipped << " skipped by gating, "
    << ev.stats.ambiguous << " ambiguous dropped\n";
  s << "operating point threshold " << format_double(ev.model.threshold) << " for specificity "
    << format_double(config.specificity) << " on training scores\n";
  s << "model objective " << format_double(ev.model.objective) << "\n";
  s << cv_report(ev.data, ev.cv, config);
  return s.str();
}

std::string detection_report(const std::string& scanId, const Detection& det, const SvmModel& model) {
  std::ostringstream s;
  std::size_t truePos = 0, abnormal = 0;
  for (std::size_t i = 0; i < det.scores.size(); ++i) {
    const bool isAbnormal = det.features.labels[i] == PatchLabel::Abnormal;
    abnormal += isAbnormal;
    truePos += isAbnormal && det.scores[i] >= model.threshold;
  }
  s << "scan            " << scanId << "\n";
  s << "patches         " << det.features.tiles << " tiled, " << det.features.skipped << " skipped by gating, "
    << det.scores.size() << " scored\n";
  s << "threshold       " << format_double(model.threshold) << "\n";
  s << "detections      " << det.detections << "\n";
  if (abnormal > 0) s << "ground truth    " << truePos << " of " << abnormal << " abnormal patches detected\n";
  return s.str();
}

std::string comparison_report(const Comparison& cmp, const PipelineConfig& config) {
  std::ostringstream s;
  s << "Az (mean pooled area under ROC over " << config.runs << " runs of " << config.folds
    << "-fold cross-validation)\n\n";
  s << pad("features", 16);
  for (int n : cmp.patchSizes) s << pad(size_label(n), 20);
  s << "\n";
  for (std::size_t m = 0; m < cmp.modes.size(); ++m) {
    s << pad(std::string(to_string(cmp.modes[m])), 16);
    for (std::size_t k = 0; k < cmp.patchSizes.size(); ++k) {
      const auto dim = feature_schema(cmp.modes[m], cmp.patchSizes[k]).size();
      s << pad(fixed(cmp.az[m][k], 4) + " (dim " + std::to_string(dim) + ")", 20);
    }
    s << "\n";
  }
  s << "\np-values of paired t-tests (two-sided)\n";
  s << "pairing: per-fold AUCs of the repeated cross-validation runs, each mode at its best patch size;\n"
       "this pairing is a stand-in chosen here, not a documented protocol\n\n";
  s << pad("", 16);
  for (auto m : cmp.modes) s << pad(std::string(to_string(m)), 16);
  s << "\n";
  for (std::size_t a = 0; a < cmp.modes.size(); ++a) {
    s << pad(std::string(to_string(cmp.modes[a])), 16);
    for (std::size_t b = 0; b < cmp.modes.size(); ++b)
      s << pad(cmp.p[a][b] ? fixed(cmp.p[a][b]->p, 6) : std::string("degenerate"), 16);
    s << "\n";
  }
  return s.str();
}

void write_comparison_csv(const std::filesystem::path& azPath, const std::filesystem::path& pPath,
                          const Comparison& cmp) {
  auto az = open_out(azPath);
  az << "mode,patchSize,dim,az\n";
  for (std::size_t m = 0; m < cmp.modes.size(); ++m)
    for (std::size_t k = 0; k < cmp.patchSizes.size(); ++k)
      az << to_string(cmp.modes[m]) << ',' << cmp.patchSizes[k] << ','
         << feature_schema(cmp.modes[m], cmp.patchSizes[k]).size() << ',' << format_double(cmp.az[m][k]) << '\n';
  auto p = open_out(pPath);
  p << "a,b,t,df,p\n";
  for (std::size_t a = 0; a < cmp.modes.size(); ++a)
    for (std::size_t b = 0; b < cmp.modes.size(); ++b) {
      p << to_string(cmp.modes[a]) << ',' << to_string(cmp.modes[b]) << ',';
      if (cmp.p[a][b])
        p << format_double(cmp.p[a][b]->t) << ',' << cmp.p[a][b]->df << ',' << format_double(cmp.p[a][b]->p) << '\n';
      else
        p << ",,degenerate\n";
    }
}

void write_scores_csv(const std::filesystem::path& path, const Detection& det) {
  auto out = open_out(path);
  out << "scanId,z,x0,y0,label,score\n";
  for (std::size_t i = 0; i < det.scores.size(); ++i) {
    const auto& s = det.features.samples[i];
    const char* label = det.features.labels[i] == PatchLabel::Abnormal    ? "abnormal"
                        : det.features.labels[i] == PatchLabel::Ambiguous ? "ambiguous"
                                                                           : "normal";
    out << s.scanId << ',' << s.z << ',' << s.x0 << ',' << s.y0 << ',' << label << ',' << format_double(det.scores[i])
        << '\n';
  }
}

} // namespace tibcad
