#pragma once

#include "pedcascade/convnet.hpp"
#include "pedcascade/forest.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace pedcascade {

/// Three-layer network equivalent to a depth-2 forest.
///
///   layer1  one row per split node (3 per tree); the row reads a single
///           pooled feature with weight = polarity and bias = -polarity * threshold
///   layer2  one row per leaf (4 per tree) over its own tree's node outputs
///             LL  (-1, -1,  0)  +0.5
///             LR  (-1, +1,  0)  -0.5
///             RL  (+1,  0, -1)  -0.5
///             RR  (+1,  0, +1)  -1.5
///   layer3  tree_weight * leaf_value per leaf row, bias = score_offset
///
/// Activations are x > 0 (sharpness = infinity) or 1 / (1 + exp(-sharpness * x)).
struct CompiledNet {
  std::vector<PoolRegion> inputs;  // distinct pooled features, sorted

  std::vector<std::uint32_t> node_input;  // 3T: index into inputs
  std::vector<double> node_weight;
  std::vector<double> node_bias;

  std::vector<std::array<double, 3>> leaf_weight;  // 4T: over nodes 3t, 3t+1, 3t+2
  std::vector<double> leaf_bias;

  std::vector<double> out_weight;  // 4T
  double out_bias = 0.0;

  double sharpness = std::numeric_limits<double>::infinity();
  ChannelConfig channel_cfg;
  WindowGeometry geometry;

  std::size_t n_trees() const noexcept { return node_input.size() / 3; }
  bool hard() const noexcept { return sharpness == std::numeric_limits<double>::infinity(); }
};

/// The fixed layer2 table above, row k = leaf k.
inline constexpr std::array<std::array<double, 3>, 4> kLeafWeights{{{-1, -1, 0}, {-1, 1, 0}, {1, 0, -1}, {1, 0, 1}}};
inline constexpr std::array<double, 4> kLeafBias{0.5, -0.5, -0.5, -1.5};

CompiledNet compile(const ForestModel& model);

struct NetTrace {
  std::vector<double> nodes;   // 3T activations
  std::vector<double> leaves;  // 4T activations
  double score = 0.0;
};

/// Runs the net on a pooled-feature vector ordered like net.inputs.
double evaluate(const CompiledNet& net, std::span<const double> features, NetTrace* trace = nullptr);

/// Pooled features of one window, ordered like net.inputs.
std::vector<double> pooled_features(const CompiledNet& net, const ChannelStack& stack, const WindowPlacement& p);

/// Score of a window.
double evaluate(const CompiledNet& net, const ChannelStack& stack, const WindowPlacement& p);

/// Leaf chosen per tree (argmax of its four indicators).
std::vector<int> selected_leaves(const CompiledNet& net, const NetTrace& trace);

/// Same weights with sigmoid activations of the given sharpness (infinity
/// restores the hard step). Throws std::invalid_argument unless sharpness > 0.
CompiledNet soften(const CompiledNet& net, double sharpness);

struct EquivalenceOptions {
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  /// Windows where some node's |pre-activation| is below this are skipped
  /// (only meaningful for sigmoid nets).
  double min_margin = 0.0;
};

struct EquivalenceReport {
  std::size_t windows = 0;  // windows compared
  std::size_t skipped = 0;  // windows rejected by min_margin
  std::size_t decision_mismatches = 0;  // (window, tree) pairs with a different leaf
  double max_score_diff = 0.0;
  bool exact() const noexcept { return decision_mismatches == 0 && max_score_diff <= 1e-9; }
};

/// Compares forest and net on random windows placed at random positions and
/// scales over random piecewise-constant channel stacks.
EquivalenceReport verify_equivalence(const ForestModel& model, const CompiledNet& net,
                                     const EquivalenceOptions& options = {});

/// Dense NetModel over a Shape(F, 1, 1) feature input:
/// FC(3T) - Step|Sigmoid - FC(4T) - Step|Sigmoid - FC(1).
NetModel to_net_model(const CompiledNet& net);

/// Random forest with valid regions, used for equivalence testing.
ForestModel random_forest(int n_trees, const ChannelConfig& cfg, std::uint64_t seed);

}  // namespace pedcascade
