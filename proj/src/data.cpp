#include "pedcascade/data.hpp"

#include "pedcascade/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pedcascade {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Files

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw DataError(path.string() + ": write failed");
}

// ---------------------------------------------------------------------------
// KITTI

namespace {

double parse_number(const std::string& tok, const std::string& where) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v)) throw DataError(where + ": '" + tok + "' is not a number");
  return v;
}

enum class KittiClass { Gt, Ignore, Drop, Unknown };

KittiClass classify(const std::string& type) {
  if (type == "Pedestrian") return KittiClass::Gt;
  if (type == "Person_sitting" || type == "Cyclist" || type == "DontCare") return KittiClass::Ignore;
  for (const char* t : {"Car", "Van", "Truck", "Tram", "Misc"}) {
    if (type == t) return KittiClass::Drop;
  }
  return KittiClass::Unknown;
}

}  // namespace

FrameAnnotation parse_kitti(const std::string& text, const std::string& frame_id, const std::string& source_name,
                            std::vector<std::string>* warnings) {
  FrameAnnotation frame;
  frame.id = frame_id;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string where = source_name + ":" + std::to_string(lineno);
    if (tok.size() < 15) {
      throw DataError(where + ": expected at least 15 fields, got " + std::to_string(tok.size()));
    }
    for (std::size_t i = 1; i < tok.size(); ++i) parse_number(tok[i], where);
    const double occ = parse_number(tok[2], where);
    const double l = parse_number(tok[4], where);
    const double t = parse_number(tok[5], where);
    const double r = parse_number(tok[6], where);
    const double b = parse_number(tok[7], where);
    const Box box{l, t, r - l, b - t};
    if (!box.valid()) throw DataError(where + ": degenerate bounding box");
    switch (classify(tok[0])) {
      case KittiClass::Gt:
        frame.gt.push_back(box);
        frame.occlusion.push_back(static_cast<int>(occ));
        break;
      case KittiClass::Ignore: frame.ignore.push_back(box); break;
      case KittiClass::Drop: break;
      case KittiClass::Unknown:
        frame.ignore.push_back(box);
        if (warnings != nullptr) warnings->push_back(where + ": unknown type '" + tok[0] + "' treated as ignore");
        break;
    }
  }
  return frame;
}

std::vector<FrameAnnotation> load_annotations(const fs::path& path, AnnotationFormat format,
                                              std::vector<std::string>* warnings) {
  if (format == AnnotationFormat::Json) return annotations_from_json(read_json_file(path));

  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  std::vector<FrameAnnotation> frames;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw DataError(f.string() + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    frames.push_back(parse_kitti(ss.str(), f.stem().string(), f.string(), warnings));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// JSON annotations

namespace {

nlohmann::json box_json(const Box& b) { return nlohmann::json::array({b.x, b.y, b.w, b.h}); }

Box box_from(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw DataError(where + ": box must be [x, y, w, h]");
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw DataError(where + ": invalid box");
  return b;
}

void check_version(const nlohmann::json& j, const char* what) {
  if (!j.contains("version") || j.at("version").get<int>() != 1) {
    throw DataError(std::string(what) + ": missing or unsupported version");
  }
}

}  // namespace

nlohmann::json annotations_to_json(const std::vector<FrameAnnotation>& frames) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : frames) {
    nlohmann::json gt = nlohmann::json::array();
    for (std::size_t i = 0; i < f.gt.size(); ++i) {
      gt.push_back({{"box", box_json(f.gt[i])}, {"occlusion", i < f.occlusion.size() ? f.occlusion[i] : 0}});
    }
    nlohmann::json ign = nlohmann::json::array();
    for (const auto& b : f.ignore) ign.push_back(box_json(b));
    arr.push_back({{"id", f.id}, {"image", f.image}, {"gt", gt}, {"ignore", ign}});
  }
  return {{"version", 1}, {"frames", arr}};
}

std::vector<FrameAnnotation> annotations_from_json(const nlohmann::json& j) {
  try {
    check_version(j, "annotations");
    std::vector<FrameAnnotation> out;
    for (const auto& fj : j.at("frames")) {
      FrameAnnotation f;
      f.id = fj.at("id").get<std::string>();
      f.image = fj.value("image", std::string{});
      const std::string where = "frame '" + f.id + "'";
      for (const auto& g : fj.value("gt", nlohmann::json::array())) {
        f.gt.push_back(box_from(g.at("box"), where));
        f.occlusion.push_back(g.value("occlusion", 0));
      }
      for (const auto& b : fj.value("ignore", nlohmann::json::array())) f.ignore.push_back(box_from(b, where));
      out.push_back(std::move(f));
    }
    for (std::size_t a = 0; a < out.size(); ++a)
      for (std::size_t b = a + 1; b < out.size(); ++b)
        if (out[a].id == out[b].id) throw DataError("duplicate frame id '" + out[a].id + "'");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed annotations JSON: ") + e.what());
  }
}

void save_annotations(const fs::path& path, const std::vector<FrameAnnotation>& frames) {
  write_text_file(path, annotations_to_json(frames).dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// Subsets

std::vector<FrameAnnotation> reasonable_filter(const std::vector<FrameAnnotation>& frames, double min_height,
                                               int max_occlusion) {
  std::vector<FrameAnnotation> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    FrameAnnotation g;
    g.id = f.id;
    g.image = f.image;
    g.ignore = f.ignore;
    for (std::size_t i = 0; i < f.gt.size(); ++i) {
      const int occ = i < f.occlusion.size() ? f.occlusion[i] : 0;
      if (f.gt[i].h >= min_height && occ <= max_occlusion) {
        g.gt.push_back(f.gt[i]);
        g.occlusion.push_back(occ);
      } else {
        g.ignore.push_back(f.gt[i]);
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<FrameAnnotation> resample_frames(const std::vector<FrameAnnotation>& frames, int stride) {
  if (stride < 1) throw std::invalid_argument("resample stride must be >= 1");
  std::vector<FrameAnnotation> out;
  for (std::size_t i = 0; i < frames.size(); i += static_cast<std::size_t>(stride)) out.push_back(frames[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Labeling

void LabelingPolicy::validate() const {
  if (!(neg_iou >= 0.0 && neg_iou <= 1.0)) throw std::invalid_argument("neg_iou must be in [0, 1]");
  if (positive_source == PositiveSource::GtPlusProposals && !pos_iou) {
    throw std::invalid_argument("GT-plus-proposals labeling needs pos_iou");
  }
  if (pos_iou) {
    if (!(*pos_iou >= 0.0 && *pos_iou <= 1.0)) throw std::invalid_argument("pos_iou must be in [0, 1]");
    if (neg_iou > *pos_iou) throw std::invalid_argument("neg_iou must not exceed pos_iou");
  }
}

std::vector<ProposalLabel> label_proposals(std::span<const Box> proposals, std::span<const Box> gt,
                                           const LabelingPolicy& policy, std::span<const Box> ignore) {
  policy.validate();
  std::vector<ProposalLabel> out;
  out.reserve(proposals.size());
  for (const Box& p : proposals) {
    double best_gt = 0.0;
    for (const Box& g : gt) best_gt = std::max(best_gt, iou(p, g));
    double best_any = best_gt;
    for (const Box& g : ignore) best_any = std::max(best_any, iou(p, g));
    if (policy.positive_source == PositiveSource::GtPlusProposals && best_gt > *policy.pos_iou) {
      out.push_back(ProposalLabel::Positive);
    } else if (best_any < policy.neg_iou) {
      out.push_back(ProposalLabel::Negative);
    } else {
      out.push_back(ProposalLabel::Ignore);
    }
  }
  return out;
}

std::vector<LabeledBox> training_boxes(std::span<const Box> proposals, const FrameAnnotation& frame,
                                       const LabelingPolicy& policy) {
  std::vector<LabeledBox> out;
  for (const Box& g : frame.gt) out.push_back({g, 1});
  const auto labels = label_proposals(proposals, frame.gt, policy, frame.ignore);
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (labels[i] == ProposalLabel::Ignore) continue;
    out.push_back({proposals[i], labels[i] == ProposalLabel::Positive ? 1 : 0});
  }
  return out;
}

std::vector<Box> random_negatives(const FrameAnnotation& frame, int image_w, int image_h, int count,
                                  double min_height, double max_height, double neg_iou, std::mt19937_64& rng,
                                  const WindowGeometry& geom) {
  std::vector<Box> out;
  if (count <= 0) return out;
  const double aspect = geom.ped_w / geom.ped_h;
  max_height = std::min(max_height, static_cast<double>(image_h));
  if (!(min_height > 0.0) || min_height > max_height) return out;
  std::uniform_real_distribution<double> hd(min_height, max_height);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int max_tries = 100 * count;
  for (int tries = 0; tries < max_tries && static_cast<int>(out.size()) < count; ++tries) {
    const double h = hd(rng);
    const double w = h * aspect;
    if (w > image_w) continue;
    const Box b{unit(rng) * (image_w - w), unit(rng) * (image_h - h), w, h};
    bool ok = true;
    for (const Box& g : frame.gt) ok = ok && iou(b, g) < neg_iou;
    for (const Box& g : frame.ignore) ok = ok && iou(b, g) < neg_iou;
    if (ok) out.push_back(b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Windows

Box context_box(const Box& target, const WindowGeometry& geom) {
  const double H = target.h * geom.context_scale();
  const double W = H * geom.window_w / geom.window_h;
  return {target.center_x() - 0.5 * W, target.center_y() - 0.5 * H, W, H};
}

Image extract_window(const Image& img, const Box& target, const WindowGeometry& geom) {
  if (!target.valid()) throw std::invalid_argument("extract_window: invalid target box");
  const Box c = context_box(target, geom);
  const int ow = static_cast<int>(geom.window_w);
  const int oh = static_cast<int>(geom.window_h);
  Image out(ow, oh, img.planes);
  const double sx = c.w / ow;
  const double sy = c.h / oh;
  for (int v = 0; v < oh; ++v) {
    const double y = c.y + (v + 0.5) * sy - 0.5;
    for (int u = 0; u < ow; ++u) {
      const double x = c.x + (u + 0.5) * sx - 0.5;
      for (int p = 0; p < img.planes; ++p) out.at(u, v, p) = img.bilinear(x, y, p);
    }
  }
  return out;
}

std::vector<double> window_tensor(const Image& crop, const ChannelConfig& cfg) {
  const ChannelStack s = compute_channels(crop, cfg);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(s.size()) * s.width() * s.height());
  for (int c = 0; c < s.size(); ++c)
    for (double v : s.channel(c)) out.push_back(v - 0.5);
  return out;
}

// ---------------------------------------------------------------------------
// Detections JSON

nlohmann::json detections_to_json(const std::vector<FrameDetections>& frames) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : frames) {
    nlohmann::json dets = nlohmann::json::array();
    for (const auto& d : f.detections) dets.push_back({{"box", box_json(d.box)}, {"score", d.score}});
    arr.push_back({{"id", f.id}, {"detections", dets}});
  }
  return {{"version", 1}, {"frames", arr}};
}

std::vector<FrameDetections> detections_from_json(const nlohmann::json& j) {
  try {
    check_version(j, "detections");
    std::vector<FrameDetections> out;
    for (const auto& fj : j.at("frames")) {
      FrameDetections f;
      f.id = fj.at("id").get<std::string>();
      for (const auto& dj : fj.at("detections")) {
        Detection d;
        d.box = box_from(dj.at("box"), "frame '" + f.id + "'");
        d.score = dj.at("score").get<double>();
        if (!std::isfinite(d.score)) throw DataError("frame '" + f.id + "': non-finite score");
        d.source_id = static_cast<std::int64_t>(f.detections.size());
        f.detections.push_back(d);
      }
      out.push_back(std::move(f));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed detections JSON: ") + e.what());
  }
}

void save_detections(const fs::path& path, const std::vector<FrameDetections>& frames) {
  write_text_file(path, detections_to_json(frames).dump(1) + "\n");
}

std::vector<FrameDetections> load_detections(const fs::path& path) {
  return detections_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Synthetic data

void SynthSpec::validate() const {
  if (n_frames < 0 || width < 64 || height < 128) throw std::invalid_argument("synth: bad frame count or size");
  if (pedestrians_per_frame < 0 || impostors_per_frame < 0) throw std::invalid_argument("synth: negative counts");
  if (!(min_height > 0.0) || max_height < min_height) throw std::invalid_argument("synth: bad height range");
  if (max_height * 4.0 / 3.0 > height || max_height * 2.0 / 3.0 > width) {
    throw std::invalid_argument("synth: context window of the tallest pedestrian does not fit the image");
  }
  if (clutter < 0.0 || noise < 0.0) throw std::invalid_argument("synth: clutter and noise must be >= 0");
}

namespace {

using Rgb = std::array<double, 3>;

struct Glyph {
  Box box;
  Rgb head, torso, legs;
};

enum class Part { None, Head, Torso, Legs };

// Silhouette part at pixel center (px, py).
Part glyph_part(const Box& b, double px, double py) {
  const double u = (px - b.x) / b.w;  // [0,1) across
  const double v = (py - b.y) / b.h;  // [0,1) down
  if (u < 0.0 || u >= 1.0 || v < 0.0 || v >= 1.0) return Part::None;
  const double hu = (u - 0.5) / 0.2;
  const double hv = (v - 0.11) / 0.1;
  if (hu * hu + hv * hv <= 1.0) return Part::Head;
  if (v >= 0.21 && v < 0.58 && u >= 0.18 && u < 0.82) return Part::Torso;
  if (v >= 0.58 && ((u >= 0.22 && u < 0.46) || (u >= 0.54 && u < 0.78))) return Part::Legs;
  return Part::None;
}

void draw_glyph(Image& img, const Glyph& g, bool checker) {
  const int x0 = std::max(0, static_cast<int>(std::floor(g.box.x)));
  const int y0 = std::max(0, static_cast<int>(std::floor(g.box.y)));
  const int x1 = std::min(img.width, static_cast<int>(std::ceil(g.box.right())) + 1);
  const int y1 = std::min(img.height, static_cast<int>(std::ceil(g.box.bottom())) + 1);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const Part part = glyph_part(g.box, x + 0.5, y + 0.5);
      if (part == Part::None) continue;
      const Rgb& c = part == Part::Head ? g.head : part == Part::Torso ? g.torso : g.legs;
      const double s = ((x + y) % 2 == 0) ? 1.0 : -1.0;
      for (int p = 0; p < 3; ++p) {
        double v = c[static_cast<std::size_t>(p)];
        if (checker) v += s * std::min({0.3, v, 1.0 - v});
        img.at(x, y, p) = v;
      }
    }
  }
}

void fill_rect(Image& img, double x, double y, double w, double h, const Rgb& c) {
  const int x0 = std::max(0, static_cast<int>(std::lround(x)));
  const int y0 = std::max(0, static_cast<int>(std::lround(y)));
  const int x1 = std::min(img.width, static_cast<int>(std::lround(x + w)));
  const int y1 = std::min(img.height, static_cast<int>(std::lround(y + h)));
  for (int yy = y0; yy < y1; ++yy)
    for (int xx = x0; xx < x1; ++xx)
      for (int p = 0; p < 3; ++p) img.at(xx, yy, p) = c[static_cast<std::size_t>(p)];
}

void fill_ellipse(Image& img, double cx, double cy, double rx, double ry, const Rgb& c) {
  const int x0 = std::max(0, static_cast<int>(cx - rx));
  const int x1 = std::min(img.width, static_cast<int>(cx + rx) + 1);
  const int y0 = std::max(0, static_cast<int>(cy - ry));
  const int y1 = std::min(img.height, static_cast<int>(cy + ry) + 1);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const double dx = (x + 0.5 - cx) / rx;
      const double dy = (y + 0.5 - cy) / ry;
      if (dx * dx + dy * dy <= 1.0)
        for (int p = 0; p < 3; ++p) img.at(x, y, p) = c[static_cast<std::size_t>(p)];
    }
}

}  // namespace

SynthDataset synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * unit(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);

  SynthDataset ds;
  for (int f = 0; f < spec.n_frames; ++f) {
    Image img(spec.width, spec.height, 3);

    // Sky / ground split with vertical shading.
    const double horizon = uni(0.3, 0.6) * spec.height;
    const Rgb sky{uni(0.4, 0.8), uni(0.4, 0.8), uni(0.5, 0.9)};
    const Rgb ground{uni(0.2, 0.5), uni(0.2, 0.5), uni(0.2, 0.5)};
    for (int y = 0; y < spec.height; ++y) {
      const bool up = y < horizon;
      const double shade = up ? 1.0 - 0.3 * y / horizon : 0.8 + 0.2 * (y - horizon) / (spec.height - horizon);
      for (int x = 0; x < spec.width; ++x)
        for (int p = 0; p < 3; ++p) img.at(x, y, p) = (up ? sky : ground)[static_cast<std::size_t>(p)] * shade;
    }

    // Clutter: boxes, poles and blobs.
    std::poisson_distribution<int> n_clutter(6.0 * spec.clutter);
    const int clutter = spec.clutter > 0.0 ? n_clutter(rng) : 0;
    for (int i = 0; i < clutter; ++i) {
      const Rgb c{unit(rng), unit(rng), unit(rng)};
      const double kind = unit(rng);
      if (kind < 0.4) {
        fill_rect(img, uni(0, spec.width), uni(0, spec.height), uni(8, 70), uni(8, 50), c);
      } else if (kind < 0.75) {
        const double h = uni(40, 160);
        fill_rect(img, uni(0, spec.width), uni(0, spec.height - h / 2), uni(2, 9), h, c);
      } else {
        fill_ellipse(img, uni(0, spec.width), uni(0, spec.height), uni(4, 24), uni(4, 24), c);
      }
    }

    // Objects (pedestrians first, then impostors), context windows inside the image, no overlaps.
    FrameAnnotation ann;
    char id[32];
    std::snprintf(id, sizeof id, "frame_%04d", f);
    ann.id = id;
    ann.image = std::string(id) + ".ppm";
    std::vector<Box> placed;
    const int n_objects = spec.pedestrians_per_frame + spec.impostors_per_frame;
    for (int k = 0; k < n_objects; ++k) {
      const bool real = k < spec.pedestrians_per_frame;
      Box box;
      bool ok = false;
      for (int tries = 0; tries < 10000 && !ok; ++tries) {
        const double h = uni(spec.min_height, spec.max_height);
        const double H = h * 4.0 / 3.0;
        const double W = H / 2.0;
        const double cx = uni(W / 2.0, spec.width - W / 2.0);
        const double cy = uni(H / 2.0, spec.height - H / 2.0);
        box = {cx - h / 4.0, cy - h / 2.0, h / 2.0, h};
        ok = true;
        for (const Box& o : placed) {
          const Box grown{o.x - 4, o.y - 4, o.w + 8, o.h + 8};
          ok = ok && intersection_area(box, grown) == 0.0;
        }
      }
      if (!ok) throw std::invalid_argument("synth: could not place objects without overlap; image too crowded");
      placed.push_back(box);
      Glyph g;
      g.box = box;
      g.head = {uni(0.65, 0.9), uni(0.45, 0.7), uni(0.35, 0.6)};
      g.torso = {uni(0.05, 0.95), uni(0.05, 0.95), uni(0.05, 0.95)};
      g.legs = {uni(0.05, 0.4), uni(0.05, 0.4), uni(0.1, 0.5)};
      draw_glyph(img, g, !real);
      if (real) {
        ann.gt.push_back(box);
        ann.occlusion.push_back(0);
      }
    }

    if (spec.noise > 0.0) {
      for (double& v : img.data) v = std::clamp(v + spec.noise * gauss(rng), 0.0, 1.0);
    }
    ds.images.push_back(std::move(img));
    ds.frames.push_back(std::move(ann));
  }
  return ds;
}

nlohmann::json synth_spec_to_json(const SynthSpec& s) {
  return {{"n_frames", s.n_frames},
          {"width", s.width},
          {"height", s.height},
          {"pedestrians_per_frame", s.pedestrians_per_frame},
          {"min_height", s.min_height},
          {"max_height", s.max_height},
          {"impostors_per_frame", s.impostors_per_frame},
          {"clutter", s.clutter},
          {"noise", s.noise}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  check_keys(j, {"n_frames", "width", "height", "pedestrians_per_frame", "min_height", "max_height",
                 "impostors_per_frame", "clutter", "noise"},
             "synth spec");
  SynthSpec s;
  try {
    s.n_frames = j.value("n_frames", s.n_frames);
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.pedestrians_per_frame = j.value("pedestrians_per_frame", s.pedestrians_per_frame);
    s.min_height = j.value("min_height", s.min_height);
    s.max_height = j.value("max_height", s.max_height);
    s.impostors_per_frame = j.value("impostors_per_frame", s.impostors_per_frame);
    s.clutter = j.value("clutter", s.clutter);
    s.noise = j.value("noise", s.noise);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed synth spec: ") + e.what());
  }
  return s;
}

void save_dataset(const fs::path& dir, const SynthDataset& ds) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < ds.images.size(); ++i) write_pnm(dir / ds.frames[i].image, ds.images[i]);
  save_annotations(dir / "annotations.json", ds.frames);
}

SynthDataset load_dataset(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "annotations.json" : path;
  SynthDataset ds;
  ds.frames = annotations_from_json(read_json_file(file));
  for (const auto& f : ds.frames) {
    if (f.image.empty()) throw DataError("frame '" + f.id + "' has no image path");
    ds.images.push_back(read_pnm(file.parent_path() / f.image));
  }
  return ds;
}

}  // namespace pedcascade
