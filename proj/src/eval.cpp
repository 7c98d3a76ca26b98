#include "pedcascade/eval.hpp"

#include "pedcascade/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace pedcascade {

void LamrConfig::validate() const {
  if (fppi_points.empty()) throw std::invalid_argument("LAMR needs at least one FPPI point");
  for (std::size_t i = 0; i < fppi_points.size(); ++i) {
    if (!(fppi_points[i] > 0.0) || (i > 0 && !(fppi_points[i] > fppi_points[i - 1]))) {
      throw std::invalid_argument("FPPI points must be positive and increasing");
    }
  }
  if (!(match_iou > 0.0 && match_iou <= 1.0)) throw std::invalid_argument("match_iou must be in (0, 1]");
  if (!(mr_floor > 0.0)) throw std::invalid_argument("mr_floor must be > 0");
}

FrameDets align_by_id(const std::vector<FrameDetections>& dets, const std::vector<FrameAnnotation>& frames) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < frames.size(); ++i) index[frames[i].id] = i;
  FrameDets out(frames.size());
  for (const auto& f : dets) {
    auto it = index.find(f.id);
    if (it == index.end()) throw DataError("detections reference unannotated frame '" + f.id + "'");
    out[it->second].insert(out[it->second].end(), f.detections.begin(), f.detections.end());
  }
  return out;
}

namespace {

enum class Outcome { Tp, Fp, Ignored };

struct Scored {
  double score;
  Outcome outcome;
};

void check_frames(const FrameDets& dets, const std::vector<FrameAnnotation>& frames) {
  if (frames.empty()) throw DataError("evaluation needs at least one frame");
  if (dets.size() != frames.size()) throw std::invalid_argument("detections and annotations are not aligned");
}

std::size_t count_gt(const std::vector<FrameAnnotation>& frames) {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.gt.size();
  return n;
}

std::vector<Scored> classify_all(const FrameDets& dets, const std::vector<FrameAnnotation>& frames, double match_iou) {
  std::vector<Scored> all;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& d = dets[f];
    const MatchResult m = match_detections(d, frames[f].gt, frames[f].ignore, match_iou);
    for (const auto& [di, gi] : m.pairs) all.push_back({d[di].score, Outcome::Tp});
    for (std::size_t di : m.unmatched_detections) all.push_back({d[di].score, Outcome::Fp});
    for (std::size_t di : m.ignored_detections) all.push_back({d[di].score, Outcome::Ignored});
  }
  std::stable_sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
  return all;
}

}  // namespace

std::vector<OperatingPoint> operating_points(const FrameDets& dets, const std::vector<FrameAnnotation>& frames,
                                             double match_iou, std::size_t* n_gt) {
  check_frames(dets, frames);
  if (n_gt != nullptr) *n_gt = count_gt(frames);
  const auto all = classify_all(dets, frames, match_iou);
  std::vector<OperatingPoint> pts{{std::numeric_limits<double>::infinity(), 0, 0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < all.size();) {
    const double s = all[i].score;
    for (; i < all.size() && all[i].score == s; ++i) {
      if (all[i].outcome == Outcome::Tp) ++tp;
      if (all[i].outcome == Outcome::Fp) ++fp;
    }
    pts.push_back({s, tp, fp});
  }
  return pts;
}

EvalCurve lamr(const FrameDets& dets, const std::vector<FrameAnnotation>& frames, const LamrConfig& cfg) {
  cfg.validate();
  std::size_t n_gt = 0;
  const auto pts = operating_points(dets, frames, cfg.match_iou, &n_gt);
  if (n_gt == 0) throw DataError("LAMR is undefined without ground truth");
  const double n_frames = static_cast<double>(frames.size());

  EvalCurve c;
  c.kind = "mr_fppi";
  for (const auto& p : pts) {
    const double fppi = static_cast<double>(p.fp) / n_frames;
    const double mr = 1.0 - static_cast<double>(p.tp) / static_cast<double>(n_gt);
    if (!c.x.empty() && c.x.back() == fppi) {
      c.y.back() = std::min(c.y.back(), mr);
    } else {
      c.x.push_back(fppi);
      c.y.push_back(mr);
    }
  }
  std::vector<double> ref_mr;
  double log_sum = 0.0;
  for (double r : cfg.fppi_points) {
    double best = 1.0;
    for (std::size_t i = 0; i < c.x.size() && c.x[i] <= r; ++i) best = std::min(best, c.y[i]);
    ref_mr.push_back(best);
    log_sum += std::log(std::max(best, cfg.mr_floor));
  }
  c.summary = std::exp(log_sum / static_cast<double>(cfg.fppi_points.size()));
  c.meta["fppi_points"] = cfg.fppi_points;
  c.meta["mr_at_points"] = ref_mr;
  c.meta["n_gt"] = n_gt;
  c.meta["n_frames"] = frames.size();
  return c;
}

EvalCurve average_precision(const FrameDets& dets, const std::vector<FrameAnnotation>& frames, int interp_points,
                            double match_iou) {
  if (interp_points < 2) throw std::invalid_argument("interp_points must be >= 2");
  std::size_t n_gt = 0;
  const auto pts = operating_points(dets, frames, match_iou, &n_gt);
  if (n_gt == 0) throw DataError("AP is undefined without ground truth");
  EvalCurve c;
  c.kind = "pr";
  std::vector<std::pair<double, double>> rp;  // recall, precision
  for (const auto& p : pts) {
    if (p.tp + p.fp == 0) continue;
    const double recall = static_cast<double>(p.tp) / static_cast<double>(n_gt);
    const double precision = static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp);
    rp.emplace_back(recall, precision);
    if (!c.x.empty() && c.x.back() == recall) {
      c.y.back() = std::max(c.y.back(), precision);
    } else {
      c.x.push_back(recall);
      c.y.push_back(precision);
    }
  }
  double sum = 0.0;
  for (int k = 0; k < interp_points; ++k) {
    const double r = static_cast<double>(k) / (interp_points - 1);
    double best = 0.0;
    for (const auto& [rec, prec] : rp) {
      if (rec >= r) best = std::max(best, prec);
    }
    sum += best;
  }
  c.summary = sum / interp_points;
  c.meta["interp_points"] = interp_points;
  c.meta["n_gt"] = n_gt;
  return c;
}

std::vector<double> iou_grid(double step) {
  if (!(step > 0.0) || step > 0.5) throw std::invalid_argument("IoU grid step must be in (0, 0.5]");
  const int n = static_cast<int>(std::lround(0.5 / step));
  std::vector<double> out;
  for (int k = 0; k <= n; ++k) out.push_back(k == n ? 1.0 : 0.5 + k * step);
  return out;
}

EvalCurve recall_vs_iou(const FrameDets& proposals, const std::vector<FrameAnnotation>& frames,
                        const std::vector<double>& thresholds) {
  check_frames(proposals, frames);
  const std::size_t n_gt = count_gt(frames);
  if (n_gt == 0) throw DataError("recall is undefined without ground truth");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) throw std::invalid_argument("thresholds must increase");
  }
  EvalCurve c;
  c.kind = "recall_iou";
  std::size_t n_props = 0;
  for (const auto& p : proposals) n_props += p.size();
  for (double t : thresholds) {
    std::size_t matched = 0;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      matched += match_detections(proposals[f], frames[f].gt, {}, t).pairs.size();
    }
    c.x.push_back(t);
    c.y.push_back(static_cast<double>(matched) / static_cast<double>(n_gt));
  }
  c.summary = c.y.empty() ? 0.0 : c.y.front();
  c.meta["avg_proposals"] = static_cast<double>(n_props) / static_cast<double>(frames.size());
  return c;
}

EvalCurve fp_overlap_histogram(const FrameDets& dets, const std::vector<FrameAnnotation>& frames, int n_bins,
                               double match_iou) {
  check_frames(dets, frames);
  if (n_bins < 1) throw std::invalid_argument("n_bins must be >= 1");
  EvalCurve c;
  c.kind = "histogram";
  c.y.assign(static_cast<std::size_t>(n_bins), 0.0);
  for (int k = 0; k < n_bins; ++k) c.x.push_back((k + 0.5) / n_bins);
  double total = 0.0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const MatchResult m = match_detections(dets[f], frames[f].gt, frames[f].ignore, match_iou);
    for (std::size_t di : m.unmatched_detections) {
      double best = 0.0;
      for (const Box& g : frames[f].gt) best = std::max(best, iou(dets[f][di].box, g));
      if (best <= 0.0) continue;
      const int k = std::clamp(static_cast<int>(std::ceil(best * n_bins)) - 1, 0, n_bins - 1);
      c.y[static_cast<std::size_t>(k)] += 1.0;
      total += 1.0;
    }
  }
  c.summary = total;
  c.meta["bin_width"] = 1.0 / n_bins;
  return c;
}

TouchingFpResult touching_fp_analysis(const FrameDets& dets, const std::vector<FrameAnnotation>& frames,
                                      const LamrConfig& cfg) {
  check_frames(dets, frames);
  TouchingFpResult r;
  r.standard = lamr(dets, frames, cfg);
  FrameDets kept(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const MatchResult m = match_detections(dets[f], frames[f].gt, frames[f].ignore, cfg.match_iou);
    std::vector<bool> drop(dets[f].size(), false);
    for (std::size_t di : m.unmatched_detections) {
      bool touches = false;
      for (const Box& g : frames[f].gt) touches = touches || iou(dets[f][di].box, g) > 0.0;
      for (const Box& g : frames[f].ignore) touches = touches || iou(dets[f][di].box, g) > 0.0;
      if (touches) {
        drop[di] = true;
        ++r.removed;
      }
    }
    for (std::size_t i = 0; i < dets[f].size(); ++i) {
      if (!drop[i]) kept[f].push_back(dets[f][i]);
    }
  }
  r.filtered = lamr(kept, frames, cfg);
  r.mr_standard = r.standard.summary;
  r.mr_filtered = r.filtered.summary;
  r.delta = r.mr_standard - r.mr_filtered;
  return r;
}

EvalCurve height_histogram(const std::vector<FrameAnnotation>& frames, double bin_width) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin_width must be > 0");
  EvalCurve c;
  c.kind = "histogram";
  c.meta["bin_width"] = bin_width;
  std::vector<double> counts;
  double total = 0.0;
  for (const auto& f : frames) {
    for (const Box& g : f.gt) {
      const auto k = static_cast<std::size_t>(std::floor(g.h / bin_width));
      if (k >= counts.size()) counts.resize(k + 1, 0.0);
      counts[k] += 1.0;
      total += 1.0;
    }
  }
  for (std::size_t k = 0; k < counts.size(); ++k) {
    c.x.push_back((static_cast<double>(k) + 0.5) * bin_width);
    c.y.push_back(counts[k]);
  }
  c.summary = total;
  return c;
}

namespace {

std::string fmt(double v, const char* f = "%.17g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

std::string curve_csv(const EvalCurve& c) {
  std::string out = "# kind=" + c.kind + " summary=" + fmt(c.summary) + "\n";
  if (!c.meta.empty()) out += "# meta=" + c.meta.dump() + "\n";
  out += "x,y\n";
  for (std::size_t i = 0; i < c.x.size(); ++i) out += fmt(c.x[i]) + "," + fmt(c.y[i]) + "\n";
  return out;
}

std::string curve_svg(const EvalCurve& c) {
  constexpr double W = 480, H = 360, L = 60, R = 20, T = 30, B = 50;
  const bool log_x = c.kind == "mr_fppi";
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < c.x.size(); ++i) {
    if (log_x && !(c.x[i] > 0.0)) continue;
    xs.push_back(log_x ? std::log10(c.x[i]) : c.x[i]);
    ys.push_back(c.y[i]);
  }
  double x0 = log_x ? -2.0 : 0.0, x1 = log_x ? 0.0 : 1.0, y0 = 0.0, y1 = 1.0;
  if (!xs.empty() && !log_x) {
    x0 = std::min(x0, *std::min_element(xs.begin(), xs.end()));
    x1 = std::max(x1, *std::max_element(xs.begin(), xs.end()));
  }
  if (!ys.empty()) y1 = std::max(y1, *std::max_element(ys.begin(), ys.end()));
  if (log_x && !xs.empty()) {
    x0 = std::min(x0, std::floor(*std::min_element(xs.begin(), xs.end())));
    x1 = std::max(x1, std::ceil(*std::max_element(xs.begin(), xs.end())));
  }
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << L << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">" << c.kind
    << " summary=" << fmt(c.summary, "%.5f") << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0;
    const double yv = y0 + (y1 - y0) * k / 4.0;
    s << "<text x=\"" << fmt(px(xv), "%.1f") << "\" y=\"" << H - B + 18
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">"
      << fmt(log_x ? std::pow(10.0, xv) : xv, "%.3g") << "</text>\n";
    s << "<text x=\"" << L - 6 << "\" y=\"" << fmt(py(yv) + 3, "%.1f")
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << fmt(yv, "%.3g") << "</text>\n";
  }
  if (c.kind == "histogram" && !xs.empty()) {
    const double bw = xs.size() > 1 ? (xs[1] - xs[0]) : 1.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double left = px(xs[i] - 0.45 * bw);
      const double right = px(xs[i] + 0.45 * bw);
      s << "<rect x=\"" << fmt(left, "%.2f") << "\" y=\"" << fmt(py(ys[i]), "%.2f") << "\" width=\""
        << fmt(right - left, "%.2f") << "\" height=\"" << fmt(py(0) - py(ys[i]), "%.2f")
        << "\" fill=\"steelblue\"/>\n";
    }
  } else if (!xs.empty()) {
    s << "<polyline fill=\"none\" stroke=\"crimson\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      s << (i ? " " : "") << fmt(px(xs[i]), "%.2f") << ',' << fmt(py(ys[i]), "%.2f");
    }
    s << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace pedcascade
