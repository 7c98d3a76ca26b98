#include "pedcascade/forest2nn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace pedcascade {

namespace {

inline double activate(double x, double sharpness) {
  if (sharpness == std::numeric_limits<double>::infinity()) return x > 0.0 ? 1.0 : 0.0;
  const double z = sharpness * x;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

CompiledNet compile(const ForestModel& model) {
  model.validate();
  CompiledNet net;
  net.channel_cfg = model.channel_cfg;
  net.geometry = model.geometry;

  std::map<PoolRegion, std::uint32_t> index;
  for (const Tree2& t : model.trees) {
    for (const SplitNode* n : {&t.root, &t.left, &t.right}) index.emplace(n->region(), 0);
  }
  for (auto& [region, i] : index) {
    i = static_cast<std::uint32_t>(net.inputs.size());
    net.inputs.push_back(region);
  }

  const std::size_t T = model.trees.size();
  net.node_input.reserve(3 * T);
  net.leaf_weight.reserve(4 * T);
  for (std::size_t t = 0; t < T; ++t) {
    const Tree2& tree = model.trees[t];
    for (const SplitNode* n : {&tree.root, &tree.left, &tree.right}) {
      net.node_input.push_back(index.at(n->region()));
      net.node_weight.push_back(static_cast<double>(n->polarity));
      net.node_bias.push_back(-static_cast<double>(n->polarity) * n->threshold);
    }
    for (int k = 0; k < 4; ++k) {
      net.leaf_weight.push_back(kLeafWeights[static_cast<std::size_t>(k)]);
      net.leaf_bias.push_back(kLeafBias[static_cast<std::size_t>(k)]);
      net.out_weight.push_back(model.tree_weights[t] * tree.leaf[static_cast<std::size_t>(k)]);
    }
  }
  net.out_bias = model.score_offset;
  return net;
}

double evaluate(const CompiledNet& net, std::span<const double> features, NetTrace* trace) {
  if (features.size() != net.inputs.size()) throw std::invalid_argument("feature vector size does not match net inputs");
  const std::size_t T = net.n_trees();
  NetTrace local;
  NetTrace& tr = trace != nullptr ? *trace : local;
  tr.nodes.resize(3 * T);
  tr.leaves.resize(4 * T);
  for (std::size_t i = 0; i < 3 * T; ++i) {
    const double pre = net.node_weight[i] * features[net.node_input[i]] + net.node_bias[i];
    tr.nodes[i] = activate(pre, net.sharpness);
  }
  double acc = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double* d = &tr.nodes[3 * t];
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t r = 4 * t + k;
      const auto& w = net.leaf_weight[r];
      const double pre = w[0] * d[0] + w[1] * d[1] + w[2] * d[2] + net.leaf_bias[r];
      tr.leaves[r] = activate(pre, net.sharpness);
      acc += net.out_weight[r] * tr.leaves[r];
    }
  }
  tr.score = acc + net.out_bias;
  return tr.score;
}

std::vector<double> pooled_features(const CompiledNet& net, const ChannelStack& stack, const WindowPlacement& p) {
  std::vector<double> f(net.inputs.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = pooled_feature(stack, net.inputs[i], p);
  return f;
}

double evaluate(const CompiledNet& net, const ChannelStack& stack, const WindowPlacement& p) {
  return evaluate(net, pooled_features(net, stack, p));
}

std::vector<int> selected_leaves(const CompiledNet& net, const NetTrace& trace) {
  const std::size_t T = net.n_trees();
  std::vector<int> out(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto first = trace.leaves.begin() + static_cast<std::ptrdiff_t>(4 * t);
    out[t] = static_cast<int>(std::max_element(first, first + 4) - first);
  }
  return out;
}

CompiledNet soften(const CompiledNet& net, double sharpness) {
  if (!(sharpness > 0.0)) throw std::invalid_argument("sharpness must be > 0");
  CompiledNet out = net;
  out.sharpness = sharpness;
  return out;
}

namespace {

// Piecewise-constant channels with random block sizes, values in [0, 1].
ChannelStack random_stack(int width, int height, int n_channels, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> value(0.0, 1.0);
  std::uniform_int_distribution<int> block(1, 12);
  std::vector<std::vector<double>> planes(static_cast<std::size_t>(n_channels));
  for (auto& plane : planes) {
    const int bw = block(rng);
    const int bh = block(rng);
    const int cols = (width + bw - 1) / bw;
    const int rows = (height + bh - 1) / bh;
    std::vector<double> cells(static_cast<std::size_t>(cols) * rows);
    for (double& c : cells) c = value(rng);
    plane.resize(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        plane[static_cast<std::size_t>(y) * width + x] = cells[static_cast<std::size_t>(y / bh) * cols + x / bw];
  }
  return ChannelStack(width, height, std::move(planes));
}

}  // namespace

EquivalenceReport verify_equivalence(const ForestModel& model, const CompiledNet& net,
                                     const EquivalenceOptions& options) {
  if (options.samples < 1) throw std::invalid_argument("samples must be >= 1");
  if (net.n_trees() != model.trees.size()) throw std::invalid_argument("net and forest have different tree counts");
  std::mt19937_64 rng(options.seed);
  const int n_channels = channel_count(model.channel_cfg);
  constexpr int kStacks = 4;
  constexpr int kWidth = 320;
  constexpr int kHeight = 256;
  std::vector<ChannelStack> stacks;
  for (int i = 0; i < kStacks; ++i) stacks.push_back(random_stack(kWidth, kHeight, n_channels, rng));

  const double max_scale = std::min(kWidth / model.geometry.window_w, kHeight / model.geometry.window_h);
  std::uniform_real_distribution<double> scale_dist(0.5, max_scale);
  std::uniform_int_distribution<int> stack_dist(0, kStacks - 1);

  EquivalenceReport report;
  NetTrace trace;
  std::vector<double> features(net.inputs.size());
  while (report.windows + report.skipped < options.samples) {
    const ChannelStack& stack = stacks[static_cast<std::size_t>(stack_dist(rng))];
    WindowPlacement p;
    p.scale = scale_dist(rng);
    std::uniform_real_distribution<double> xd(0.0, kWidth - model.geometry.window_w * p.scale);
    std::uniform_real_distribution<double> yd(0.0, kHeight - model.geometry.window_h * p.scale);
    p.x = xd(rng);
    p.y = yd(rng);
    if (!window_fits(stack, p, model.geometry)) continue;

    for (std::size_t i = 0; i < features.size(); ++i) features[i] = pooled_feature(stack, net.inputs[i], p);
    if (options.min_margin > 0.0) {
      bool close = false;
      for (std::size_t i = 0; i < net.node_input.size() && !close; ++i) {
        const double pre = net.node_weight[i] * features[net.node_input[i]] + net.node_bias[i];
        close = std::abs(pre) < options.min_margin;
      }
      if (close) {
        ++report.skipped;
        continue;
      }
    }
    const double net_score = evaluate(net, features, &trace);
    const std::vector<int> leaves = selected_leaves(net, trace);
    const double forest_score = eval_forest(model, stack, p);
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
      if (tree_leaf(model.trees[t], stack, p) != leaves[t]) ++report.decision_mismatches;
    }
    report.max_score_diff = std::max(report.max_score_diff, std::abs(net_score - forest_score));
    ++report.windows;
  }
  return report;
}

NetModel to_net_model(const CompiledNet& net) {
  const int F = static_cast<int>(net.inputs.size());
  const int T = static_cast<int>(net.n_trees());
  NetSpec spec;
  spec.input = {F, 1, 1};
  const LayerSpec act = net.hard() ? LayerSpec::step() : LayerSpec::sigmoid(net.sharpness);
  spec.layers = {LayerSpec::fc(3 * T), act, LayerSpec::fc(4 * T), act, LayerSpec::fc(1)};
  NetModel m = zero_net(spec);

  auto& l1 = m.params[0];
  for (int i = 0; i < 3 * T; ++i) {
    l1.weights[static_cast<std::size_t>(i) * F + net.node_input[static_cast<std::size_t>(i)]] =
        net.node_weight[static_cast<std::size_t>(i)];
    l1.bias[static_cast<std::size_t>(i)] = net.node_bias[static_cast<std::size_t>(i)];
  }
  auto& l2 = m.params[2];
  for (int r = 0; r < 4 * T; ++r) {
    const int t = r / 4;
    for (int j = 0; j < 3; ++j) {
      l2.weights[static_cast<std::size_t>(r) * (3 * T) + 3 * t + j] =
          net.leaf_weight[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
    }
    l2.bias[static_cast<std::size_t>(r)] = net.leaf_bias[static_cast<std::size_t>(r)];
  }
  auto& l3 = m.params[4];
  l3.weights = net.out_weight;
  l3.bias = {net.out_bias};
  return m;
}

ForestModel random_forest(int n_trees, const ChannelConfig& cfg, std::uint64_t seed) {
  if (n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
  std::mt19937_64 rng(seed);
  ForestModel m;
  m.channel_cfg = cfg;
  const int W = static_cast<int>(m.geometry.window_w);
  const int H = static_cast<int>(m.geometry.window_h);
  const int C = channel_count(cfg);
  std::uniform_int_distribution<int> ch(0, C - 1);
  std::uniform_real_distribution<double> thr(0.05, 0.95);
  std::uniform_real_distribution<double> leaf(-1.0, 1.0);
  std::uniform_real_distribution<double> weight(0.05, 2.0);
  std::bernoulli_distribution coin(0.5);
  auto node = [&] {
    SplitNode n;
    n.channel = ch(rng);
    std::uniform_int_distribution<int> wd(1, W);
    std::uniform_int_distribution<int> hd(1, H);
    n.rect.w = wd(rng);
    n.rect.h = hd(rng);
    n.rect.x = std::uniform_int_distribution<int>(0, W - n.rect.w)(rng);
    n.rect.y = std::uniform_int_distribution<int>(0, H - n.rect.h)(rng);
    n.threshold = thr(rng);
    n.polarity = coin(rng) ? 1 : -1;
    return n;
  };
  for (int t = 0; t < n_trees; ++t) {
    Tree2 tree;
    tree.root = node();
    tree.left = node();
    tree.right = node();
    for (double& v : tree.leaf) v = leaf(rng);
    m.trees.push_back(tree);
    m.tree_weights.push_back(weight(rng));
  }
  m.score_offset = leaf(rng);
  return m;
}

}  // namespace pedcascade
