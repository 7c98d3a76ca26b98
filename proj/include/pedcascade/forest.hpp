#pragma once

#include "pedcascade/channels.hpp"
#include "pedcascade/geometry.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace pedcascade {

/// Pooling region of one channel, in model-window coordinates.
struct PoolRegion {
  int channel = 0;
  IntRect rect;

  friend bool operator==(const PoolRegion&, const PoolRegion&) = default;
  friend auto operator<=>(const PoolRegion&, const PoolRegion&) = default;
};

/// Fires when polarity * (mean(rect) - threshold) > 0.
struct SplitNode {
  int channel = 0;
  IntRect rect;
  double threshold = 0.0;
  int polarity = 1;

  PoolRegion region() const { return {channel, rect}; }
  bool decide(double pooled) const noexcept { return polarity * (pooled - threshold) > 0.0; }
};

/// Depth-2 tree. A false root decision routes to `left`, a true one to
/// `right`. Leaves are ordered LL, LR, RL, RR.
struct Tree2 {
  SplitNode root;
  SplitNode left;
  SplitNode right;
  std::array<double, 4> leaf{};
};

/// Leaf index for a decision pattern (d0 = root, d1 = left child, d2 = right child).
constexpr int leaf_index(bool d0, bool d1, bool d2) noexcept { return d0 ? (d2 ? 3 : 2) : (d1 ? 1 : 0); }

struct ForestModel {
  std::vector<Tree2> trees;
  std::vector<double> tree_weights;
  WindowGeometry geometry;
  ChannelConfig channel_cfg{ChannelKind::HOG_LUV, 6, true};
  double score_offset = 0.0;

  /// Throws DataError when the model is structurally invalid.
  void validate(int n_channels = -1) const;
};

/// Model window placed on a full-image stack. The origin is rounded to whole
/// pixels; rectangle offsets are scaled and rounded relative to it.
struct WindowRef {
  const ChannelStack* stack = nullptr;
  WindowPlacement placement;
};

/// Scaled pooling rectangle in image pixels, [x0, x1) x [y0, y1).
struct PixelRect {
  int x0, y0, x1, y1;
};

PixelRect scale_rect(const IntRect& r, double scale) noexcept;

/// Integer window origin used for a placement.
inline int window_origin(double v) noexcept { return static_cast<int>(std::lround(v)); }

/// True if every pooling rectangle of a window_w x window_h model lands inside the stack.
bool window_fits(const ChannelStack& stack, const WindowPlacement& p, const WindowGeometry& geom);

/// Area-normalised rectangle sum of a model-window region. Throws
/// std::out_of_range if the scaled rectangle leaves the image.
double pooled_feature(const ChannelStack& stack, const PoolRegion& region, const WindowPlacement& p);

/// Leaf value selected by the tree for the window. Throws std::out_of_range
/// when a region the tree reads lies outside the image.
double eval_tree(const Tree2& tree, const ChannelStack& stack, const WindowPlacement& p);

/// Index of the selected leaf.
int tree_leaf(const Tree2& tree, const ChannelStack& stack, const WindowPlacement& p);

/// score_offset + sum_t weight_t * leaf_t.
double eval_forest(const ForestModel& model, const ChannelStack& stack, const WindowPlacement& p);

/// All squares of the given sizes on a grid inside the model window, for every channel.
std::vector<PoolRegion> squares_candidates(int n_channels, const WindowGeometry& geom = {},
                                           std::span<const int> sizes = std::array{8, 16, 24, 32},
                                           int grid = 8);

struct ForestTrainOptions {
  int n_trees = 256;
  int threshold_levels = 256;
};

struct ForestTrainResult {
  ForestModel model;
  bool stopped_early = false;
  std::string stop_reason;
  /// Per round: weighted error, tree weight, and log of the exponential loss
  /// log(sum_i w0_i exp(-y_i F(x_i))) after adding the round's tree.
  std::vector<double> round_error;
  std::vector<double> round_alpha;
  std::vector<double> round_log_loss;
  std::vector<double> initial_weights;  // w0 in sample order (positives first for the WindowRef overload)
  std::vector<double> final_weights;
};

/// Sample-major pooled features: row i holds every candidate's value for
/// sample i. Lets training sets be built one image at a time.
struct FeatureRows {
  std::size_t n_features = 0;
  std::vector<double> values;
  std::vector<int> labels;  // +1 / -1

  std::size_t size() const noexcept { return labels.size(); }
  const double* row(std::size_t i) const { return values.data() + i * n_features; }
  void add(const ChannelStack& stack, const WindowPlacement& p, std::span<const PoolRegion> candidates,
           bool positive);
};

/// Discrete AdaBoost over depth-2 trees with +/-1 leaves.
///
/// Each round fits the root split minimising the weighted error, then each
/// child on its partition. Thresholds are searched over `threshold_levels`
/// uniform levels of each feature's empirical range. A round with error 0 is
/// kept and stops training; a round with error >= 1/2 stops training without
/// being added. Throws std::invalid_argument on empty inputs or n_trees < 1,
/// NumericError if not even the first round is usable.
ForestTrainResult train_forest(const FeatureRows& rows, std::span<const PoolRegion> candidates,
                               const ForestTrainOptions& options, const ChannelConfig& channel_cfg,
                               const WindowGeometry& geom = {});
ForestTrainResult train_forest(std::span<const WindowRef> positives, std::span<const WindowRef> negatives,
                               std::span<const PoolRegion> candidates, const ForestTrainOptions& options,
                               const ChannelConfig& channel_cfg, const WindowGeometry& geom = {});

/// Convenience overload for stacks that are exactly one model window.
ForestTrainResult train_forest(std::span<const ChannelStack> pos_windows, std::span<const ChannelStack> neg_windows,
                               int n_trees, std::span<const PoolRegion> candidates,
                               const ChannelConfig& channel_cfg);

struct SlidingWindowConfig {
  int stride = 4;
  double scale_step = 1.0905077326652577;  // 2^(1/8)
  double min_height = 50.0;                // smallest pedestrian height searched, pixels
  double max_height = std::numeric_limits<double>::infinity();
  double score_threshold = 0.0;
  double nms_iou = 0.5;
  bool apply_nms = true;

  void validate() const;
};

/// Scales searched for an image of the given size.
std::vector<double> pyramid_scales(int width, int height, const SlidingWindowConfig& cfg,
                                   const WindowGeometry& geom);

/// Sliding-window detection on a precomputed stack. Scores strictly above the
/// threshold are kept; NMS is applied when enabled. Returns pedestrian-extent
/// boxes sorted by score_order.
std::vector<Detection> detect(const ChannelStack& stack, const ForestModel& model,
                              const SlidingWindowConfig& cfg);
std::vector<Detection> detect(const Image& img, const ForestModel& model, const SlidingWindowConfig& cfg);

struct ProposalFilter {
  double threshold = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<Detection>> filtered;
};

/// Smallest threshold t (over -inf and the observed scores) such that the
/// mean number of detections with score > t per image is <= target_avg.
ProposalFilter filter_proposals(const std::vector<std::vector<Detection>>& dets, double target_avg);

/// Keeps detections with score > threshold.
std::vector<Detection> apply_threshold(std::span<const Detection> dets, double threshold);

nlohmann::json forest_to_json(const ForestModel& model);
ForestModel forest_from_json(const nlohmann::json& j);
void save_forest(const std::filesystem::path& path, const ForestModel& model);
ForestModel load_forest(const std::filesystem::path& path);

nlohmann::json channel_cfg_to_json(const ChannelConfig& cfg);
ChannelConfig channel_cfg_from_json(const nlohmann::json& j);

}  // namespace pedcascade
