#pragma once

#include "pedcascade/data.hpp"
#include "pedcascade/geometry.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace pedcascade {

/// Sampled metric curve. kind is one of mr_fppi, recall_iou, pr, histogram.
struct EvalCurve {
  std::string kind;
  std::vector<double> x;  // strictly increasing
  std::vector<double> y;
  double summary = 0.0;
  nlohmann::json meta = nlohmann::json::object();
};

/// Caltech protocol constants.
struct LamrConfig {
  std::vector<double> fppi_points = default_points();  // 10^-2 ... 10^0, 9 log-spaced
  double match_iou = 0.5;
  double mr_floor = 1e-5;

  static std::vector<double> default_points() {
    std::vector<double> p;
    for (int k = 0; k < 9; ++k) p.push_back(std::pow(10.0, -2.0 + 0.25 * k));
    return p;
  }
  void validate() const;
};

using FrameDets = std::vector<std::vector<Detection>>;

/// Detections reordered to match `frames` by id; frames without an entry get
/// none. Throws DataError for detection frames that are not annotated.
FrameDets align_by_id(const std::vector<FrameDetections>& dets, const std::vector<FrameAnnotation>& frames);

/// One operating point of a score sweep.
struct OperatingPoint {
  double threshold;  // detections with score >= threshold are kept (+inf keeps none)
  std::size_t tp, fp;
};

/// Operating points for every distinct score plus the empty point, highest
/// threshold first. Matching is per frame at cfg.match_iou; ignored detections
/// count as neither TP nor FP.
std::vector<OperatingPoint> operating_points(const FrameDets& dets, const std::vector<FrameAnnotation>& frames,
                                             double match_iou, std::size_t* n_gt = nullptr);

/// Log-average miss rate. MR at a reference FPPI is the lowest MR among
/// operating points whose FPPI does not exceed it; summary is
/// exp(mean(ln(max(MR, mr_floor)))). The curve is MR vs FPPI; meta holds the
/// reference points and their MRs. Throws DataError with no frames or no GT.
EvalCurve lamr(const FrameDets& dets, const std::vector<FrameAnnotation>& frames, const LamrConfig& cfg = {});

/// 11-point interpolated average precision at match_iou; curve is precision vs recall.
EvalCurve average_precision(const FrameDets& dets, const std::vector<FrameAnnotation>& frames,
                            int interp_points = 11, double match_iou = 0.5);

/// Fraction of GT matched (greedy, no ignore handling) at each IoU threshold.
/// meta.avg_proposals is the mean number of proposals per frame.
EvalCurve recall_vs_iou(const FrameDets& proposals, const std::vector<FrameAnnotation>& frames,
                        const std::vector<double>& thresholds);

/// Evenly spaced thresholds 0.5, 0.5 + step, ..., 1.0.
std::vector<double> iou_grid(double step = 0.05);

/// Histogram of max IoU with GT over false positives with IoU > 0. Bin k is
/// (k / n_bins, (k + 1) / n_bins]; x holds bin centers.
EvalCurve fp_overlap_histogram(const FrameDets& dets, const std::vector<FrameAnnotation>& frames, int n_bins = 10,
                               double match_iou = 0.5);

struct TouchingFpResult {
  double mr_standard = 0.0;
  double mr_filtered = 0.0;
  double delta = 0.0;  // mr_standard - mr_filtered
  std::size_t removed = 0;
  EvalCurve standard, filtered;
};

/// LAMR before and after deleting every false positive whose IoU with any
/// annotation (GT or ignore) is > 0.
TouchingFpResult touching_fp_analysis(const FrameDets& dets, const std::vector<FrameAnnotation>& frames,
                                      const LamrConfig& cfg = {});

/// GT height counts in bins [k * w, (k + 1) * w), from bin 0 to the last
/// occupied bin; x holds bin centers. Empty input gives an empty curve.
EvalCurve height_histogram(const std::vector<FrameAnnotation>& frames, double bin_width);

/// "# kind=<kind> summary=<summary> key=value..." then "x,y" rows (%.17g).
std::string curve_csv(const EvalCurve& curve);
/// Self-contained SVG line (or bar, for histograms) plot.
std::string curve_svg(const EvalCurve& curve);

}  // namespace pedcascade
