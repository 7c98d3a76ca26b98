#pragma once

#include "pedcascade/channels.hpp"
#include "pedcascade/geometry.hpp"
#include "pedcascade/image.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace pedcascade {

/// Occlusion levels follow KITTI: 0 visible, 1 partly, 2 largely, 3 unknown.
struct FrameAnnotation {
  std::string id;
  std::string image;  // path relative to the annotation file, may be empty
  std::vector<Box> gt;
  std::vector<int> occlusion;  // parallel to gt
  std::vector<Box> ignore;
};

enum class AnnotationFormat { KittiTxt, Json };

/// KITTI: `path` is one label file or a directory of *.txt files (one frame
/// each, sorted by name, id = file stem). "Pedestrian" becomes gt;
/// Person_sitting, Cyclist and DontCare become ignore regions; the other KITTI
/// classes are dropped and unrecognised types are ignored with a warning.
/// Throws DataError naming file:line for malformed lines.
std::vector<FrameAnnotation> load_annotations(const std::filesystem::path& path, AnnotationFormat format,
                                              std::vector<std::string>* warnings = nullptr);

FrameAnnotation parse_kitti(const std::string& text, const std::string& frame_id, const std::string& source_name,
                            std::vector<std::string>* warnings = nullptr);

/// {"version":1,"frames":[{"id","image","gt":[{"box":[x,y,w,h],"occlusion":0}],"ignore":[[x,y,w,h]]}]}
nlohmann::json annotations_to_json(const std::vector<FrameAnnotation>& frames);
std::vector<FrameAnnotation> annotations_from_json(const nlohmann::json& j);
void save_annotations(const std::filesystem::path& path, const std::vector<FrameAnnotation>& frames);

/// Keeps gt with height >= min_height and occlusion <= max_occlusion; the rest
/// become ignore regions.
std::vector<FrameAnnotation> reasonable_filter(const std::vector<FrameAnnotation>& frames, double min_height = 50.0,
                                               int max_occlusion = 1);

/// Frames at indices divisible by stride. Throws std::invalid_argument for stride < 1.
std::vector<FrameAnnotation> resample_frames(const std::vector<FrameAnnotation>& frames, int stride);

enum class PositiveSource { Gt, GtPlusProposals };

struct LabelingPolicy {
  PositiveSource positive_source = PositiveSource::Gt;
  std::optional<double> pos_iou;  // required for GtPlusProposals
  double neg_iou = 0.5;

  void validate() const;
};

enum class ProposalLabel { Negative = 0, Positive = 1, Ignore = 2 };

/// Positive if proposals are positive sources and max IoU with gt > pos_iou;
/// negative if max IoU with every gt and ignore box < neg_iou; ignore otherwise.
std::vector<ProposalLabel> label_proposals(std::span<const Box> proposals, std::span<const Box> gt,
                                           const LabelingPolicy& policy, std::span<const Box> ignore = {});

struct LabeledBox {
  Box box;
  int label = 0;  // 1 positive, 0 negative
};

/// Training boxes of one frame: the gt boxes (positives), then every proposal
/// that label_proposals did not mark ignore.
std::vector<LabeledBox> training_boxes(std::span<const Box> proposals, const FrameAnnotation& frame,
                                       const LabelingPolicy& policy);

/// Uniform random pedestrian-aspect boxes fully inside the image whose IoU
/// with every annotation is below neg_iou.
std::vector<Box> random_negatives(const FrameAnnotation& frame, int image_w, int image_h, int count,
                                  double min_height, double max_height, double neg_iou, std::mt19937_64& rng,
                                  const WindowGeometry& geom = {});

/// Context window around a pedestrian box: height h * context_scale, width
/// height * window_w / window_h, same center.
Box context_box(const Box& target, const WindowGeometry& geom = {});

/// Crop of the context window resampled to window_h x window_w. Bilinear
/// sampling at x0 + (u + 0.5) * W / window_w - 0.5, border replicated.
Image extract_window(const Image& img, const Box& target, const WindowGeometry& geom = {});

/// Network input for a window crop: channels of `cfg` in CHW order, shifted by -0.5.
std::vector<double> window_tensor(const Image& crop, const ChannelConfig& cfg);

struct FrameDetections {
  std::string id;
  std::vector<Detection> detections;
};

/// {"version":1,"frames":[{"id","detections":[{"box":[x,y,w,h],"score":s}]}]}
nlohmann::json detections_to_json(const std::vector<FrameDetections>& frames);
std::vector<FrameDetections> detections_from_json(const nlohmann::json& j);
void save_detections(const std::filesystem::path& path, const std::vector<FrameDetections>& frames);
std::vector<FrameDetections> load_detections(const std::filesystem::path& path);

/// Reads a JSON file, throwing DataError on I/O or parse errors.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

struct SynthSpec {
  int n_frames = 100;
  int width = 320;
  int height = 240;
  int pedestrians_per_frame = 1;
  double min_height = 50.0;
  double max_height = 100.0;
  /// Checkerboard-textured pedestrian silhouettes per frame (hard negatives).
  int impostors_per_frame = 1;
  /// Expected number of clutter shapes per frame is 6 * clutter.
  double clutter = 1.0;
  double noise = 0.02;  // std of additive pixel noise

  void validate() const;
};

struct SynthDataset {
  std::vector<Image> images;
  std::vector<FrameAnnotation> frames;
};

/// Deterministic synthetic street scenes. Pedestrians are solid head/torso/leg
/// glyphs of box aspect 2:1; impostors share the silhouette but are filled with
/// a one-pixel checkerboard whose local mean equals the glyph colour. Every
/// object lies with its whole context window inside the image.
SynthDataset synth_dataset(const SynthSpec& spec, std::uint64_t seed);

nlohmann::json synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

/// Writes images as frame_XXXX.ppm plus annotations.json into dir.
void save_dataset(const std::filesystem::path& dir, const SynthDataset& ds);
/// Loads annotations.json and the images it references.
SynthDataset load_dataset(const std::filesystem::path& dir);

}  // namespace pedcascade
