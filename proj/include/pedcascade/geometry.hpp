#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace pedcascade {

/// Axis-aligned rectangle in continuous pixel coordinates; (x, y) is the
/// top-left corner. Area is w*h, no pixel-grid convention is implied.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const noexcept { return x + w; }
  double bottom() const noexcept { return y + h; }
  double area() const noexcept { return w * h; }
  double center_x() const noexcept { return x + 0.5 * w; }
  double center_y() const noexcept { return y + 0.5 * h; }

  /// w > 0, h > 0 and all coordinates finite.
  bool valid() const noexcept;

  friend bool operator==(const Box&, const Box&) = default;
};

/// Builds a box and throws std::invalid_argument if it violates the Box invariant.
Box make_box(double x, double y, double w, double h);

/// Integer rectangle used for pooling regions.
struct IntRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const IntRect&, const IntRect&) = default;
  friend auto operator<=>(const IntRect&, const IntRect&) = default;
};

struct Detection {
  Box box;
  double score = 0.0;
  std::int64_t source_id = 0;
};

/// Partition of detections and ground truth produced by match_detections.
/// All indices refer to the caller's input order.
struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (detection, gt)
  std::vector<std::size_t> unmatched_detections;
  std::vector<std::size_t> unmatched_gt;
  std::vector<std::size_t> ignored_detections;
};

double intersection_area(const Box& a, const Box& b) noexcept;

/// Intersection over union, in [0, 1]; 0 for disjoint boxes.
double iou(const Box& a, const Box& b) noexcept;

/// Deterministic processing order: score descending, then x ascending,
/// y ascending, input index ascending.
std::vector<std::size_t> score_order(std::span<const Detection> dets);

/// Greedy non-maximum suppression. A detection is dropped when its IoU with an
/// already kept one is strictly greater than iou_threshold. Output follows
/// score_order.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold);

/// Same as nms but returns the kept input indices.
std::vector<std::size_t> nms_indices(std::span<const Detection> dets, double iou_threshold);

/// Greedy detection to ground-truth matching (Caltech protocol).
///
/// Detections are visited in score_order. Each one takes the not-yet-matched
/// GT with the highest IoU >= iou_threshold (lowest index on ties). A detection
/// that matches no GT but overlaps some ignore region with IoU >= iou_threshold
/// is ignored; otherwise it is unmatched (a false positive).
MatchResult match_detections(std::span<const Detection> dets, std::span<const Box> gt,
                             std::span<const Box> ignore, double iou_threshold);

/// Model-window layout: a window of window_h x window_w pixels in which the
/// pedestrian occupies the central ped_h x ped_w area.
struct WindowGeometry {
  double window_h = 128.0;
  double window_w = 64.0;
  double ped_h = 96.0;
  double ped_w = 48.0;

  double context_scale() const noexcept { return window_h / ped_h; }
};

/// A model window placed in an image: top-left origin and scale factor
/// (scale 1 means window_h x window_w pixels).
struct WindowPlacement {
  double x = 0.0;
  double y = 0.0;
  double scale = 1.0;
};

/// Window whose pedestrian extent has the height and center of `box`.
WindowPlacement window_for_box(const Box& box, const WindowGeometry& geom = {});

/// Pedestrian-extent box of a placed window.
Box box_for_window(const WindowPlacement& win, const WindowGeometry& geom = {});

}  // namespace pedcascade
