#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tibcad/eval.hpp"
#include "tibcad/pipeline.hpp"

namespace tibcad {

/// Columns threshold,fpr,tpr; the first point has threshold +inf.
void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve);

/// Self-contained SVG line plot of one or more labelled ROC curves.
std::string roc_svg(const std::vector<std::pair<std::string, RocCurve>>& curves);
void write_roc_svg(const std::filesystem::path& path, const std::vector<std::pair<std::string, RocCurve>>& curves);

/// Text report of a suite evaluation. Contains no timings, so identical
/// inputs give identical bytes.
std::string evaluation_report(const SuiteEvaluation& ev, const PipelineConfig& config);

/// Text report of cross-validating a feature file.
std::string cv_report(const Dataset& data, const RepeatedCv& cv, const PipelineConfig& config);

/// Detection summary for one scan.
std::string detection_report(const std::string& scanId, const Detection& det, const SvmModel& model);

/// Az grid (modes x patch sizes) and the p-value matrix.
std::string comparison_report(const Comparison& cmp, const PipelineConfig& config);
void write_comparison_csv(const std::filesystem::path& azPath, const std::filesystem::path& pPath,
                          const Comparison& cmp);

/// Per-patch scores: scanId,z,x0,y0,label,score.
void write_scores_csv(const std::filesystem::path& path, const Detection& det);

} // namespace tibcad
