#pragma once

#include "pedcascade/convnet.hpp"
#include "pedcascade/data.hpp"
#include "pedcascade/eval.hpp"
#include "pedcascade/forest.hpp"
#include "pedcascade/forest2nn.hpp"
#include "pedcascade/svm.hpp"

#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace pedcascade {

enum class RescorerKind { Identity, Softmax, SvmHead, Compiled };
enum class ScoreBlend { Replace, None };

std::string to_string(RescorerKind kind);
RescorerKind parse_rescorer_kind(const std::string& s);

/// Second stage. Identity keeps the proposal score; Softmax uses the net's
/// pedestrian probability; SvmHead applies the SVM to the net's
/// `svm_cfg.feature_layer` output; Compiled evaluates the compiled forest on
/// the proposal model's channels.
struct Rescorer {
  RescorerKind kind = RescorerKind::Identity;
  NetModel net;
  ChannelConfig net_channels{ChannelKind::RGB, 6, false};
  LinearSvm svm;
  SvmConfig svm_cfg;
  ForestModel compiled_forest;  // source of `compiled`, kept for saving
  CompiledNet compiled;
};

Rescorer compiled_rescorer(const ForestModel& forest, double sharpness = std::numeric_limits<double>::infinity());

struct CascadeConfig {
  ForestModel proposal_model;
  SlidingWindowConfig sliding;
  Rescorer rescorer;
  double proposal_filter_avg = 3.0;
  double final_nms_iou = 0.5;
  bool final_nms = true;
  ScoreBlend score_blend = ScoreBlend::Replace;

  void validate() const;
};

/// Per-image averages over the processed images; windows are rescored proposals.
struct TimingReport {
  double ms_per_window = 0.0;
  double ms_per_image_proposals = 0.0;
  double ms_per_image_rescoring = 0.0;
  double ms_per_image_total = 0.0;
  std::size_t windows_scored = 0;
  std::size_t images = 0;

  /// total == proposals + rescoring and ms_per_window * windows == rescoring * images (to 1e-6 ms).
  bool consistent() const;
  nlohmann::json to_json() const;
};

struct CascadeResult {
  FrameDets raw_proposals;  // sliding-window output before filtering
  FrameDets proposals;      // after proposal filtering, proposal scores
  FrameDets detections;  // rescored, after the final NMS
  double proposal_threshold = -std::numeric_limits<double>::infinity();
  TimingReport timing;
};

/// Raw sliding-window proposals per image.
FrameDets propose(std::span<const Image> images, const ForestModel& forest, const SlidingWindowConfig& sliding,
                  int jobs = 1);

double rescore(const Rescorer& rescorer, const Image& img, const ChannelStack* forest_stack, const Detection& det);

/// Proposals, batch-level filtering to proposal_filter_avg per image,
/// rescoring and final NMS. Boxes are never changed. Per-image failures are
/// rethrown with the frame id (from `ids`, or the image index) prefixed.
CascadeResult run_cascade(std::span<const Image> images, const CascadeConfig& cfg, int jobs = 1,
                          std::span<const std::string> ids = {});

struct ForestStageConfig {
  ChannelConfig channels{ChannelKind::HOG_LUV, 6, true};
  ForestTrainOptions options{64, 256};
  int bootstrap_rounds = 2;
  int random_negatives_per_frame = 25;
  int hard_negatives_per_frame = 10;
  bool flip_positives = true;
  double neg_iou = 0.5;
  SlidingWindowConfig sliding;
  std::vector<int> square_sizes{8, 16, 24, 32};
  int grid = 8;
  std::uint64_t seed = 1;

  void validate() const;
};

struct ForestStageReport {
  std::size_t positives = 0;
  std::vector<std::size_t> negatives_per_round;
  std::vector<std::size_t> trees_per_round;
};

/// Boosted proposal forest trained on GT windows (plus mirrored copies) and
/// random negatives, followed by bootstrap rounds that add the top-scoring
/// false positives of each training frame and retrain.
ForestModel train_proposal_forest(std::span<const Image> images, const std::vector<FrameAnnotation>& frames,
                                  const ForestStageConfig& cfg, ForestStageReport* report = nullptr);

enum class NegativeSource { Proposals, Random };

struct RescorerTrainConfig {
  LabelingPolicy policy;
  NegativeSource negatives = NegativeSource::Proposals;
  int random_negatives_per_frame = 10;
  double train_proposal_avg = 10.0;
  std::optional<BatchRatio> ratio = BatchRatio{1, 5};
  TrainConfig train;
  std::array<int, 3> filters{32, 32, 64};
  std::array<int, 3> kernels{5, 5, 5};
  int fc_units = 32;
  ChannelConfig channels{ChannelKind::RGB, 6, false};
  bool svm_head = false;
  SvmConfig svm;

  void validate() const;
};

struct RescorerTrainReport {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t ignored = 0;
  std::size_t batches = 0;
  std::size_t ratio_violations = 0;
};

/// Labels proposals of the training frames (or draws random negatives),
/// then trains the convnet (and optionally the SVM head) on the extracted windows.
Rescorer train_rescorer(std::span<const Image> images, const std::vector<FrameAnnotation>& frames,
                        const ForestModel& forest, const SlidingWindowConfig& sliding, const RescorerTrainConfig& cfg,
                        RescorerTrainReport* report = nullptr);

/// Linear SVM on the net's cfg.feature_layer output for GT windows and the
/// given proposals, negatives below cfg.neg_overlap.
LinearSvm train_svm_head(std::span<const Image> images, const std::vector<FrameAnnotation>& frames,
                         const FrameDets& proposals, const NetModel& net, const ChannelConfig& channels,
                         const WindowGeometry& geom, const SvmConfig& cfg);

struct CascadeTrainConfig {
  ForestStageConfig forest;
  RescorerTrainConfig rescorer;
  double proposal_filter_avg = 3.0;
  double final_nms_iou = 0.5;
};

CascadeConfig train_cascade(std::span<const Image> images, const std::vector<FrameAnnotation>& frames,
                            const CascadeTrainConfig& cfg);

/// Writes cascade.json plus forest.json and, as needed, net.pcnet and svm.json into dir.
void save_cascade(const std::filesystem::path& dir, const CascadeConfig& cfg);
CascadeConfig load_cascade(const std::filesystem::path& dir);

nlohmann::json sliding_to_json(const SlidingWindowConfig& cfg);
SlidingWindowConfig sliding_from_json(const nlohmann::json& j, SlidingWindowConfig base = {});

}  // namespace pedcascade
