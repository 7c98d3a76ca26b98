#include "pedcascade/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pedcascade {

bool Box::valid() const noexcept {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0.0 &&
         h > 0.0;
}

Box make_box(double x, double y, double w, double h) {
  Box b{x, y, w, h};
  if (!b.valid()) {
    throw std::invalid_argument("invalid box (" + std::to_string(x) + ", " + std::to_string(y) +
                                ", " + std::to_string(w) + ", " + std::to_string(h) + ")");
  }
  return b;
}

double intersection_area(const Box& a, const Box& b) noexcept {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const Box& a, const Box& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const Detection& a = dets[i];
    const Detection& b = dets[j];
    if (a.score != b.score) return a.score > b.score;
    if (a.box.x != b.box.x) return a.box.x < b.box.x;
    if (a.box.y != b.box.y) return a.box.y < b.box.y;
    return i < j;
  });
  return order;
}

std::vector<std::size_t> nms_indices(std::span<const Detection> dets, double iou_threshold) {
  std::vector<std::size_t> kept;
  for (std::size_t i : score_order(dets)) {
    const Box& candidate = dets[i].box;
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return iou(dets[k].box, candidate) > iou_threshold;
    });
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
  std::vector<Detection> out;
  for (std::size_t i : nms_indices(dets, iou_threshold)) out.push_back(dets[i]);
  return out;
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const Box> gt,
                             std::span<const Box> ignore, double iou_threshold) {
  MatchResult result;
  std::vector<bool> taken(gt.size(), false);

  for (std::size_t d : score_order(dets)) {
    const Box& box = dets[d].box;
    std::size_t best = gt.size();
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (taken[g]) continue;
      const double o = iou(box, gt[g]);
      if (o >= iou_threshold && o > best_iou) {
        best = g;
        best_iou = o;
      }
    }
    if (best < gt.size()) {
      taken[best] = true;
      result.pairs.emplace_back(d, best);
      continue;
    }
    const bool on_ignore = std::any_of(ignore.begin(), ignore.end(), [&](const Box& ig) {
      return iou(box, ig) >= iou_threshold;
    });
    if (on_ignore) {
      result.ignored_detections.push_back(d);
    } else {
      result.unmatched_detections.push_back(d);
    }
  }
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (!taken[g]) result.unmatched_gt.push_back(g);
  }
  return result;
}

WindowPlacement window_for_box(const Box& box, const WindowGeometry& geom) {
  const double scale = box.h / geom.ped_h;
  return {box.center_x() - 0.5 * geom.window_w * scale, box.center_y() - 0.5 * geom.window_h * scale,
          scale};
}

Box box_for_window(const WindowPlacement& win, const WindowGeometry& geom) {
  const double s = win.scale;
  return {win.x + 0.5 * (geom.window_w - geom.ped_w) * s, win.y + 0.5 * (geom.window_h - geom.ped_h) * s,
          geom.ped_w * s, geom.ped_h * s};
}

}  // namespace pedcascade
