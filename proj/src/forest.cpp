#include "pedcascade/forest.hpp"

#include "pedcascade/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace pedcascade {

// ---------------------------------------------------------------------------
// Window geometry and evaluation

PixelRect scale_rect(const IntRect& r, double scale) noexcept {
  PixelRect p;
  p.x0 = static_cast<int>(std::lround(r.x * scale));
  p.y0 = static_cast<int>(std::lround(r.y * scale));
  p.x1 = std::max(p.x0 + 1, static_cast<int>(std::lround((r.x + r.w) * scale)));
  p.y1 = std::max(p.y0 + 1, static_cast<int>(std::lround((r.y + r.h) * scale)));
  return p;
}

bool window_fits(const ChannelStack& stack, const WindowPlacement& p, const WindowGeometry& geom) {
  const int ox = window_origin(p.x);
  const int oy = window_origin(p.y);
  if (ox < 0 || oy < 0 || !(p.scale > 0.0)) return false;
  const PixelRect extent = scale_rect({0, 0, static_cast<int>(geom.window_w), static_cast<int>(geom.window_h)},
                                      p.scale);
  return ox + extent.x1 <= stack.width() && oy + extent.y1 <= stack.height();
}

namespace {

inline double mean_of(const ChannelStack& stack, int channel, int ox, int oy, const PixelRect& r) {
  const double area = static_cast<double>(r.x1 - r.x0) * static_cast<double>(r.y1 - r.y0);
  return stack.block_sum(channel, ox + r.x0, oy + r.y0, ox + r.x1, oy + r.y1) / area;
}

}  // namespace

double pooled_feature(const ChannelStack& stack, const PoolRegion& region, const WindowPlacement& p) {
  if (region.channel < 0 || region.channel >= stack.size()) {
    throw std::out_of_range("pooled_feature: channel index out of range");
  }
  const int ox = window_origin(p.x);
  const int oy = window_origin(p.y);
  const PixelRect r = scale_rect(region.rect, p.scale);
  if (ox + r.x0 < 0 || oy + r.y0 < 0 || ox + r.x1 > stack.width() || oy + r.y1 > stack.height()) {
    throw std::out_of_range("pooled_feature: window outside the image");
  }
  return mean_of(stack, region.channel, ox, oy, r);
}

int tree_leaf(const Tree2& tree, const ChannelStack& stack, const WindowPlacement& p) {
  const bool d0 = tree.root.decide(pooled_feature(stack, tree.root.region(), p));
  if (!d0) {
    const bool d1 = tree.left.decide(pooled_feature(stack, tree.left.region(), p));
    return leaf_index(false, d1, false);
  }
  const bool d2 = tree.right.decide(pooled_feature(stack, tree.right.region(), p));
  return leaf_index(true, false, d2);
}

double eval_tree(const Tree2& tree, const ChannelStack& stack, const WindowPlacement& p) {
  return tree.leaf[tree_leaf(tree, stack, p)];
}

double eval_forest(const ForestModel& model, const ChannelStack& stack, const WindowPlacement& p) {
  double score = 0.0;
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    score += model.tree_weights[t] * eval_tree(model.trees[t], stack, p);
  }
  return score + model.score_offset;
}

void ForestModel::validate(int n_channels) const {
  if (trees.empty()) throw DataError("forest has no trees");
  if (trees.size() != tree_weights.size()) throw DataError("forest tree/weight count mismatch");
  if (!std::isfinite(score_offset)) throw DataError("forest score_offset is not finite");
  const int wh = static_cast<int>(geometry.window_h);
  const int ww = static_cast<int>(geometry.window_w);
  auto check_node = [&](const SplitNode& n) {
    if (!std::isfinite(n.threshold)) throw DataError("forest node threshold is not finite");
    if (n.polarity != 1 && n.polarity != -1) throw DataError("forest node polarity must be +1 or -1");
    if (n.rect.w <= 0 || n.rect.h <= 0 || n.rect.x < 0 || n.rect.y < 0 || n.rect.x + n.rect.w > ww ||
        n.rect.y + n.rect.h > wh) {
      throw DataError("forest node rectangle outside the model window");
    }
    if (n.channel < 0 || (n_channels >= 0 && n.channel >= n_channels)) {
      throw DataError("forest node channel index out of range");
    }
  };
  for (std::size_t t = 0; t < trees.size(); ++t) {
    if (!std::isfinite(tree_weights[t])) throw DataError("forest tree weight is not finite");
    check_node(trees[t].root);
    check_node(trees[t].left);
    check_node(trees[t].right);
    for (double v : trees[t].leaf) {
      if (!std::isfinite(v)) throw DataError("forest leaf value is not finite");
    }
  }
}

std::vector<PoolRegion> squares_candidates(int n_channels, const WindowGeometry& geom, std::span<const int> sizes,
                                           int grid) {
  std::vector<PoolRegion> out;
  const int wh = static_cast<int>(geom.window_h);
  const int ww = static_cast<int>(geom.window_w);
  for (int c = 0; c < n_channels; ++c) {
    for (int s : sizes) {
      for (int y = 0; y + s <= wh; y += grid) {
        for (int x = 0; x + s <= ww; x += grid) out.push_back({c, {x, y, s, s}});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// AdaBoost training

namespace {

struct FeatureTable {
  std::size_t n_samples = 0;
  std::size_t n_features = 0;
  int levels = 256;
  std::vector<std::uint8_t> bins;  // feature-major
  std::vector<double> lo, hi;

  const std::uint8_t* column(std::size_t f) const { return bins.data() + f * n_samples; }
  double threshold(std::size_t f, int k) const { return lo[f] + (hi[f] - lo[f]) * k / levels; }
};

FeatureTable build_table(const FeatureRows& rows, int levels) {
  FeatureTable t;
  t.n_samples = rows.size();
  t.n_features = rows.n_features;
  t.levels = levels;
  t.bins.resize(t.n_samples * t.n_features);
  t.lo.assign(t.n_features, std::numeric_limits<double>::infinity());
  t.hi.assign(t.n_features, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < t.n_samples; ++i) {
    const double* row = rows.row(i);
    for (std::size_t f = 0; f < t.n_features; ++f) {
      t.lo[f] = std::min(t.lo[f], row[f]);
      t.hi[f] = std::max(t.hi[f], row[f]);
    }
  }
  for (std::size_t i = 0; i < t.n_samples; ++i) {
    const double* row = rows.row(i);
    for (std::size_t f = 0; f < t.n_features; ++f) {
      // bin b satisfies: value > threshold(k) <=> b >= k, for k in [1, levels).
      int b = 0;
      const double range = t.hi[f] - t.lo[f];
      if (range > 0.0) {
        const double u = (row[f] - t.lo[f]) * levels / range;
        b = std::clamp(static_cast<int>(std::ceil(u)) - 1, 0, levels - 1);
      }
      t.bins[f * t.n_samples + i] = static_cast<std::uint8_t>(b);
    }
  }
  return t;
}

struct StumpChoice {
  std::size_t feature = 0;
  int level = 1;
  double error = std::numeric_limits<double>::infinity();
};

StumpChoice best_stump(const FeatureTable& table, std::span<const std::size_t> subset, std::span<const double> w,
                       std::span<const int> y) {
  StumpChoice best;
  const int L = table.levels;
  std::vector<double> hp(L), hn(L);
  for (std::size_t f = 0; f < table.n_features; ++f) {
    if (!(table.hi[f] > table.lo[f])) continue;
    std::fill(hp.begin(), hp.end(), 0.0);
    std::fill(hn.begin(), hn.end(), 0.0);
    const std::uint8_t* col = table.column(f);
    double P = 0.0;
    double N = 0.0;
    for (std::size_t i : subset) {
      if (y[i] > 0) {
        hp[col[i]] += w[i];
        P += w[i];
      } else {
        hn[col[i]] += w[i];
        N += w[i];
      }
    }
    double lowP = 0.0;
    double lowN = 0.0;
    for (int k = 1; k < L; ++k) {
      lowP += hp[k - 1];
      lowN += hn[k - 1];
      const double err = std::min(lowP, lowN) + std::min(P - lowP, N - lowN);
      if (err < best.error) {
        best = {f, k, err};
      }
    }
  }
  return best;
}

// Builds a node from a stump choice; polarity makes d=1 the side with more positive mass.
SplitNode make_node(const FeatureTable& table, const StumpChoice& choice, std::span<const PoolRegion> candidates,
                    std::span<const std::size_t> subset, std::span<const double> w, std::span<const int> y,
                    std::span<const double> values) {
  SplitNode node;
  node.channel = candidates[choice.feature].channel;
  node.rect = candidates[choice.feature].rect;
  node.threshold = table.threshold(choice.feature, choice.level);
  double hi_margin = 0.0;
  double lo_margin = 0.0;
  for (std::size_t i : subset) {
    const double signed_w = y[i] > 0 ? w[i] : -w[i];
    if (values[i] > node.threshold) {
      hi_margin += signed_w;
    } else {
      lo_margin += signed_w;
    }
  }
  node.polarity = hi_margin >= lo_margin ? 1 : -1;
  return node;
}

struct TreeFit {
  Tree2 tree;
  std::vector<int> leaf_of;  // leaf index per sample
  std::vector<double> h;     // +/-1 output per sample
  double error = 0.0;
};

TreeFit fit_tree(const FeatureTable& table, const FeatureRows& rows, std::span<const PoolRegion> candidates,
                 std::span<const double> w, std::span<const int> y) {
  const std::size_t n = rows.size();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<double> values(n);

  auto evaluate = [&](std::size_t feature) {
    for (std::size_t i = 0; i < n; ++i) values[i] = rows.row(i)[feature];
  };
  auto fallback = [&]() {
    // Every feature is constant on this subset: a root-feature split that sends everything one way.
    StumpChoice c;
    c.feature = 0;
    c.level = 1;
    return c;
  };

  TreeFit fit;
  StumpChoice root = best_stump(table, all, w, y);
  if (!std::isfinite(root.error)) root = fallback();
  evaluate(root.feature);
  fit.tree.root = make_node(table, root, candidates, all, w, y, values);
  std::vector<std::size_t> left_set, right_set;
  for (std::size_t i = 0; i < n; ++i) {
    (fit.tree.root.decide(values[i]) ? right_set : left_set).push_back(i);
  }

  std::vector<bool> child_decision(n, false);
  auto fit_child = [&](const std::vector<std::size_t>& subset) {
    StumpChoice c = subset.empty() ? StumpChoice{} : best_stump(table, subset, w, y);
    if (!std::isfinite(c.error)) c = fallback();
    evaluate(c.feature);
    SplitNode node = make_node(table, c, candidates, subset, w, y, values);
    for (std::size_t i : subset) child_decision[i] = node.decide(values[i]);
    return node;
  };
  fit.tree.left = fit_child(left_set);
  fit.tree.right = fit_child(right_set);

  fit.leaf_of.resize(n);
  std::array<double, 4> margin{};
  for (std::size_t i = 0; i < n; ++i) {
    const bool d0 = std::binary_search(right_set.begin(), right_set.end(), i);
    const int leaf = d0 ? leaf_index(true, false, child_decision[i]) : leaf_index(false, child_decision[i], false);
    fit.leaf_of[i] = leaf;
    margin[leaf] += y[i] > 0 ? w[i] : -w[i];
  }
  for (int k = 0; k < 4; ++k) fit.tree.leaf[k] = margin[k] > 0.0 ? 1.0 : -1.0;
  fit.h.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    fit.h[i] = fit.tree.leaf[fit.leaf_of[i]];
    if ((fit.h[i] > 0) != (y[i] > 0)) fit.error += w[i];
  }
  return fit;
}

double log_exp_loss(std::span<const double> w0, std::span<const int> y, std::span<const double> F) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < F.size(); ++i) m = std::max(m, -y[i] * F[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < F.size(); ++i) s += w0[i] * std::exp(-y[i] * F[i] - m);
  return m + std::log(s);
}

}  // namespace

void FeatureRows::add(const ChannelStack& stack, const WindowPlacement& p, std::span<const PoolRegion> candidates,
                      bool positive) {
  if (n_features == 0 && labels.empty()) n_features = candidates.size();
  if (candidates.size() != n_features) throw std::invalid_argument("FeatureRows: candidate count changed");
  const std::size_t base = values.size();
  values.resize(base + n_features);
  for (std::size_t f = 0; f < n_features; ++f) values[base + f] = pooled_feature(stack, candidates[f], p);
  labels.push_back(positive ? 1 : -1);
}

ForestTrainResult train_forest(const FeatureRows& rows, std::span<const PoolRegion> candidates,
                               const ForestTrainOptions& options, const ChannelConfig& channel_cfg,
                               const WindowGeometry& geom) {
  const std::size_t n = rows.size();
  const auto n_pos = static_cast<std::size_t>(std::count(rows.labels.begin(), rows.labels.end(), 1));
  if (n_pos == 0 || n_pos == n) {
    throw std::invalid_argument("train_forest needs at least one positive and one negative window");
  }
  if (candidates.empty()) throw std::invalid_argument("train_forest needs candidate pooling regions");
  if (candidates.size() != rows.n_features || rows.values.size() != n * rows.n_features) {
    throw std::invalid_argument("train_forest: feature rows do not match the candidates");
  }
  if (options.n_trees < 1) throw std::invalid_argument("train_forest: n_trees must be >= 1");
  if (options.threshold_levels < 2 || options.threshold_levels > 256) {
    throw std::invalid_argument("train_forest: threshold_levels must be in [2, 256]");
  }
  const std::vector<int>& y = rows.labels;

  ForestTrainResult result;
  result.model.geometry = geom;
  result.model.channel_cfg = channel_cfg;

  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 / static_cast<double>(y[i] > 0 ? n_pos : n - n_pos);
  }
  result.initial_weights = w;

  const FeatureTable table = build_table(rows, options.threshold_levels);
  std::vector<double> F(n, 0.0);

  for (int round = 0; round < options.n_trees; ++round) {
    TreeFit fit = fit_tree(table, rows, candidates, w, y);
    const double eps = fit.error;
    if (eps >= 0.5) {
      result.stopped_early = true;
      result.stop_reason = "weak learner error >= 1/2 at round " + std::to_string(round);
      break;
    }
    const bool perfect = eps <= 0.0;
    const double eps_c = std::max(eps, 1e-10);
    const double alpha = 0.5 * std::log((1.0 - eps_c) / eps_c);

    result.model.trees.push_back(fit.tree);
    result.model.tree_weights.push_back(alpha);
    result.round_error.push_back(eps);
    result.round_alpha.push_back(alpha);

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      F[i] += alpha * fit.h[i];
      w[i] *= std::exp(-alpha * y[i] * fit.h[i]);
      total += w[i];
    }
    for (double& v : w) v /= total;
    result.round_log_loss.push_back(log_exp_loss(result.initial_weights, y, F));

    if (perfect) {
      result.stopped_early = round + 1 < options.n_trees;
      result.stop_reason = "training data separated at round " + std::to_string(round);
      break;
    }
  }
  if (result.model.trees.empty()) {
    throw NumericError("train_forest: first boosting round is no better than chance");
  }
  result.final_weights = std::move(w);
  return result;
}

ForestTrainResult train_forest(std::span<const WindowRef> positives, std::span<const WindowRef> negatives,
                               std::span<const PoolRegion> candidates, const ForestTrainOptions& options,
                               const ChannelConfig& channel_cfg, const WindowGeometry& geom) {
  if (positives.empty() || negatives.empty()) {
    throw std::invalid_argument("train_forest needs at least one positive and one negative window");
  }
  if (candidates.empty()) throw std::invalid_argument("train_forest needs candidate pooling regions");
  FeatureRows rows;
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& s : pass == 0 ? positives : negatives) {
      if (s.stack == nullptr) throw std::invalid_argument("train_forest: null channel stack");
      if (!window_fits(*s.stack, s.placement, geom)) throw std::out_of_range("train_forest: window outside image");
      rows.add(*s.stack, s.placement, candidates, pass == 0);
    }
  }
  return train_forest(rows, candidates, options, channel_cfg, geom);
}

ForestTrainResult train_forest(std::span<const ChannelStack> pos_windows, std::span<const ChannelStack> neg_windows,
                               int n_trees, std::span<const PoolRegion> candidates,
                               const ChannelConfig& channel_cfg) {
  auto refs = [](std::span<const ChannelStack> stacks) {
    std::vector<WindowRef> out;
    for (const auto& s : stacks) out.push_back({&s, {0.0, 0.0, 1.0}});
    return out;
  };
  const auto pos = refs(pos_windows);
  const auto neg = refs(neg_windows);
  ForestTrainOptions opts;
  opts.n_trees = n_trees;
  return train_forest(pos, neg, candidates, opts, channel_cfg);
}

// ---------------------------------------------------------------------------
// Sliding-window detection

void SlidingWindowConfig::validate() const {
  if (stride < 1) throw std::invalid_argument("sliding window stride must be >= 1");
  if (!(scale_step > 1.0)) throw std::invalid_argument("sliding window scale_step must be > 1");
  if (!(min_height > 0.0)) throw std::invalid_argument("sliding window min_height must be > 0");
  if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) throw std::invalid_argument("nms_iou must be in [0, 1]");
}

std::vector<double> pyramid_scales(int width, int height, const SlidingWindowConfig& cfg,
                                   const WindowGeometry& geom) {
  cfg.validate();
  std::vector<double> scales;
  const double s0 = cfg.min_height / geom.ped_h;
  for (int k = 0;; ++k) {
    const double s = s0 * std::pow(cfg.scale_step, k);
    if (geom.ped_h * s > cfg.max_height) break;
    const PixelRect extent =
        scale_rect({0, 0, static_cast<int>(geom.window_w), static_cast<int>(geom.window_h)}, s);
    if (extent.x1 > width || extent.y1 > height) break;
    scales.push_back(s);
  }
  return scales;
}

namespace {

struct ScaledNode {
  int channel;
  std::ptrdiff_t o00, o01, o10, o11;  // offsets of (x0,y0), (x1,y0), (x0,y1), (x1,y1)
  double area;
  double threshold;
  int polarity;

  double pooled(const double* I) const { return (I[o11] - I[o01] - I[o10] + I[o00]) / area; }
  bool decide(const std::vector<const double*>& planes, std::ptrdiff_t base) const {
    return polarity * (pooled(planes[channel] + base) - threshold) > 0.0;
  }
};

ScaledNode scale_node(const SplitNode& n, double s, std::ptrdiff_t stride) {
  const PixelRect r = scale_rect(n.rect, s);
  ScaledNode out;
  out.channel = n.channel;
  out.o00 = r.y0 * stride + r.x0;
  out.o01 = r.y0 * stride + r.x1;
  out.o10 = r.y1 * stride + r.x0;
  out.o11 = r.y1 * stride + r.x1;
  out.area = static_cast<double>(r.x1 - r.x0) * static_cast<double>(r.y1 - r.y0);
  out.threshold = n.threshold;
  out.polarity = n.polarity;
  return out;
}

}  // namespace

std::vector<Detection> detect(const ChannelStack& stack, const ForestModel& model, const SlidingWindowConfig& cfg) {
  model.validate(stack.size());
  const WindowGeometry& geom = model.geometry;
  const std::vector<double> scales = pyramid_scales(stack.width(), stack.height(), cfg, geom);
  const std::ptrdiff_t stride = stack.width() + 1;
  std::vector<const double*> planes;
  for (int c = 0; c < stack.size(); ++c) planes.push_back(stack.integral_plane(c).data());

  std::vector<Detection> raw;
  std::int64_t id = 0;
  for (std::size_t si = 0; si < scales.size(); ++si) {
    const double s = scales[si];
    std::vector<std::array<ScaledNode, 3>> nodes;
    nodes.reserve(model.trees.size());
    for (const auto& t : model.trees) {
      nodes.push_back({scale_node(t.root, s, stride), scale_node(t.left, s, stride), scale_node(t.right, s, stride)});
    }
    const PixelRect extent =
        scale_rect({0, 0, static_cast<int>(geom.window_w), static_cast<int>(geom.window_h)}, s);
    const int step = std::max(1, static_cast<int>(std::lround(cfg.stride * s)));
    for (int oy = 0; oy + extent.y1 <= stack.height(); oy += step) {
      for (int ox = 0; ox + extent.x1 <= stack.width(); ox += step, ++id) {
        const std::ptrdiff_t base = oy * stride + ox;
        double score = 0.0;
        for (std::size_t t = 0; t < nodes.size(); ++t) {
          const auto& tn = nodes[t];
          int leaf;
          if (!tn[0].decide(planes, base)) {
            leaf = leaf_index(false, tn[1].decide(planes, base), false);
          } else {
            leaf = leaf_index(true, false, tn[2].decide(planes, base));
          }
          score += model.tree_weights[t] * model.trees[t].leaf[leaf];
        }
        score += model.score_offset;
        if (score > cfg.score_threshold) {
          raw.push_back({box_for_window({static_cast<double>(ox), static_cast<double>(oy), s}, geom), score, id});
        }
      }
    }
  }
  if (!cfg.apply_nms) {
    std::vector<Detection> out;
    for (std::size_t i : score_order(raw)) out.push_back(raw[i]);
    return out;
  }
  return nms(raw, cfg.nms_iou);
}

std::vector<Detection> detect(const Image& img, const ForestModel& model, const SlidingWindowConfig& cfg) {
  return detect(compute_channels(img, model.channel_cfg), model, cfg);
}

std::vector<Detection> apply_threshold(std::span<const Detection> dets, double threshold) {
  std::vector<Detection> out;
  for (const auto& d : dets) {
    if (d.score > threshold) out.push_back(d);
  }
  return out;
}

ProposalFilter filter_proposals(const std::vector<std::vector<Detection>>& dets, double target_avg) {
  if (!(target_avg > 0.0)) throw std::invalid_argument("filter_proposals: target_avg must be > 0");
  ProposalFilter result;
  std::vector<double> scores;
  for (const auto& frame : dets)
    for (const auto& d : frame) scores.push_back(d.score);
  const double budget = target_avg * static_cast<double>(dets.size());
  if (static_cast<double>(scores.size()) > budget) {
    const auto cap = static_cast<std::size_t>(std::floor(budget));
    std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(cap), scores.end(),
                     std::greater<>());
    result.threshold = scores[cap];
  }
  result.filtered.reserve(dets.size());
  for (const auto& frame : dets) result.filtered.push_back(apply_threshold(frame, result.threshold));
  return result;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json channel_cfg_to_json(const ChannelConfig& cfg) {
  return {{"kind", std::string(to_string(cfg.kind))},
          {"orientation_bins", cfg.orientation_bins},
          {"pre_blur", cfg.pre_blur}};
}

ChannelConfig channel_cfg_from_json(const nlohmann::json& j) {
  check_keys(j, {"kind", "orientation_bins", "pre_blur"}, "channel config");
  ChannelConfig cfg;
  const auto kind = parse_channel_kind(j.at("kind").get<std::string>());
  if (!kind) throw DataError("unknown channel kind '" + j.at("kind").get<std::string>() + "'");
  cfg.kind = *kind;
  cfg.orientation_bins = j.value("orientation_bins", 6);
  cfg.pre_blur = j.value("pre_blur", false);
  return cfg;
}

namespace {

nlohmann::json node_to_json(const SplitNode& n) {
  return {{"channel", n.channel},
          {"rect", {n.rect.x, n.rect.y, n.rect.w, n.rect.h}},
          {"threshold", n.threshold},
          {"polarity", n.polarity}};
}

SplitNode node_from_json(const nlohmann::json& j) {
  SplitNode n;
  n.channel = j.at("channel").get<int>();
  const auto& r = j.at("rect");
  if (!r.is_array() || r.size() != 4) throw DataError("forest node rect must have 4 integers");
  n.rect = {r[0].get<int>(), r[1].get<int>(), r[2].get<int>(), r[3].get<int>()};
  n.threshold = j.at("threshold").get<double>();
  n.polarity = j.at("polarity").get<int>();
  return n;
}

}  // namespace

nlohmann::json forest_to_json(const ForestModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const Tree2& tr = model.trees[t];
    trees.push_back({{"weight", model.tree_weights[t]},
                     {"nodes", {node_to_json(tr.root), node_to_json(tr.left), node_to_json(tr.right)}},
                     {"leaves", {tr.leaf[0], tr.leaf[1], tr.leaf[2], tr.leaf[3]}}});
  }
  return {{"format", "pedcascade.forest"},
          {"version", 1},
          {"window", {{"height", model.geometry.window_h}, {"width", model.geometry.window_w}}},
          {"pedestrian", {{"height", model.geometry.ped_h}, {"width", model.geometry.ped_w}}},
          {"channels", channel_cfg_to_json(model.channel_cfg)},
          {"score_offset", model.score_offset},
          {"trees", trees}};
}

ForestModel forest_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "pedcascade.forest") throw DataError("not a pedcascade forest file");
    if (j.at("version").get<int>() != 1) throw DataError("unsupported forest version");
    ForestModel m;
    m.geometry.window_h = j.at("window").at("height").get<double>();
    m.geometry.window_w = j.at("window").at("width").get<double>();
    if (j.contains("pedestrian")) {
      m.geometry.ped_h = j["pedestrian"].at("height").get<double>();
      m.geometry.ped_w = j["pedestrian"].at("width").get<double>();
    }
    m.channel_cfg = channel_cfg_from_json(j.at("channels"));
    m.score_offset = j.value("score_offset", 0.0);
    for (const auto& t : j.at("trees")) {
      Tree2 tree;
      const auto& nodes = t.at("nodes");
      const auto& leaves = t.at("leaves");
      if (nodes.size() != 3 || leaves.size() != 4) throw DataError("forest tree must have 3 nodes and 4 leaves");
      tree.root = node_from_json(nodes[0]);
      tree.left = node_from_json(nodes[1]);
      tree.right = node_from_json(nodes[2]);
      for (int k = 0; k < 4; ++k) tree.leaf[k] = leaves[k].get<double>();
      m.trees.push_back(tree);
      m.tree_weights.push_back(t.at("weight").get<double>());
    }
    m.validate(channel_count(m.channel_cfg));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed forest JSON: ") + e.what());
  }
}

void save_forest(const std::filesystem::path& path, const ForestModel& model) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << forest_to_json(model).dump(1) << '\n';
}

ForestModel load_forest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open forest file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return forest_from_json(j);
}

}  // namespace pedcascade
