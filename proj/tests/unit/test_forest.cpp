#include "oracles.hpp"

#include "pedcascade/errors.hpp"
#include "pedcascade/forest.hpp"
#include "pedcascade/forest2nn.hpp"
#include "pedcascade/image.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

using namespace pedcascade;

namespace {

ChannelStack filled_stack(int w, int h, int channels, double v) {
  std::vector<std::vector<double>> planes(channels, std::vector<double>(static_cast<std::size_t>(w) * h, v));
  return ChannelStack(w, h, std::move(planes));
}

ChannelStack random_stack(int w, int h, int channels, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> planes(channels, std::vector<double>(static_cast<std::size_t>(w) * h));
  for (auto& p : planes)
    for (double& v : p) v = u(rng);
  return ChannelStack(w, h, std::move(planes));
}

SplitNode node(int channel, IntRect r, double thr, int pol) {
  SplitNode n;
  n.channel = channel;
  n.rect = r;
  n.threshold = thr;
  n.polarity = pol;
  return n;
}

// Pedestrian-extent pattern drawn at (x, y): a red body and a head on grey.
void plant(Image& img, int x, int y) {
  auto fill = [&](int x0, int y0, int w, int h, double r, double g, double b) {
    for (int yy = y0; yy < y0 + h; ++yy)
      for (int xx = x0; xx < x0 + w; ++xx) {
        img.at(xx, yy, 0) = r;
        img.at(xx, yy, 1) = g;
        img.at(xx, yy, 2) = b;
      }
  };
  fill(x + 18, y, 12, 14, 0.9, 0.8, 0.6);
  fill(x + 10, y + 14, 28, 40, 0.8, 0.1, 0.1);
  fill(x + 12, y + 54, 10, 42, 0.1, 0.1, 0.6);
  fill(x + 26, y + 54, 10, 42, 0.1, 0.1, 0.6);
}

const ChannelConfig kCfg{ChannelKind::HOG_LUV, 6, false};

ForestModel planted_forest() {
  std::mt19937_64 rng(5);
  const auto cands = squares_candidates(channel_count(kCfg), {}, std::array{16, 32}, 8);
  FeatureRows rows;
  std::uniform_int_distribution<int> px(0, 30), py(0, 25);
  for (int i = 0; i < 6; ++i) {
    Image img(160, 200, 3, 0.5);
    const int x = 20 + 2 * px(rng), y = 20 + 2 * py(rng);
    plant(img, x, y);
    const ChannelStack s = compute_channels(img, kCfg);
    const Box gt{double(x), double(y), 48, 96};
    rows.add(s, window_for_box(gt), cands, true);
    std::uniform_int_distribution<int> wx(0, 160 - 64), wy(0, 200 - 128);
    for (int k = 0; k < 30; ++k) {
      const WindowPlacement p{double(wx(rng)), double(wy(rng)), 1.0};
      if (iou(box_for_window(p), gt) < 0.3) rows.add(s, p, cands, false);
    }
  }
  ForestTrainOptions opt;
  opt.n_trees = 16;
  return train_forest(rows, cands, opt, kCfg).model;
}

}  // namespace

TEST_CASE("tree evaluation trivial cases") {
  Tree2 t;
  t.root = node(0, {0, 0, 8, 8}, 0.5, 1);
  t.left = node(0, {8, 8, 8, 8}, 0.5, 1);
  t.right = node(0, {16, 0, 8, 8}, 0.5, 1);
  t.leaf = {0, 1, 2, 3};
  const ChannelStack zeros = filled_stack(64, 128, 1, 0.0);
  CHECK(eval_tree(t, zeros, {0, 0, 1}) == 0.0);
  CHECK(tree_leaf(t, zeros, {0, 0, 1}) == 0);
  const ChannelStack ones = filled_stack(64, 128, 1, 1.0);
  CHECK(eval_tree(t, ones, {0, 0, 1}) == 3.0);
  CHECK(leaf_index(true, false, true) == 3);
  CHECK(leaf_index(true, true, true) == 3);
  CHECK_THROWS_AS(eval_tree(t, filled_stack(12, 12, 1, 0.0), {0, 0, 1}), std::out_of_range);
}

TEST_CASE("random trees match the recursive traversal oracle") {
  std::mt19937_64 rng(21);
  const ForestModel m = random_forest(40, kCfg, 3);
  for (int i = 0; i < 20; ++i) {
    const ChannelStack s = random_stack(96, 160, 10, rng);
    std::uniform_real_distribution<double> sc(0.6, 1.2);
    const double scale = sc(rng);
    std::uniform_real_distribution<double> ox(0.0, 96 - 64 * scale - 1), oy(0.0, 160 - 128 * scale - 1);
    const WindowPlacement p{ox(rng), oy(rng), scale};
    double total = m.score_offset;
    for (std::size_t t = 0; t < m.trees.size(); ++t) {
      const double v = eval_tree(m.trees[t], s, p);
      CHECK(v == oracle::tree_value(m.trees[t], s, p));
      total += m.tree_weights[t] * v;
    }
    CHECK(eval_forest(m, s, p) == doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("separable toy data needs one tree") {
  std::vector<ChannelStack> pos, neg;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> noise(0.0, 0.1);
  for (int i = 0; i < 10; ++i) {
    std::vector<double> p(64 * 128), n(64 * 128);
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 64; ++x) {
        const bool in = x >= 16 && x < 32 && y >= 32 && y < 48;
        p[y * 64 + x] = noise(rng) + (in ? 1.0 : 0.0);
        n[y * 64 + x] = noise(rng);
      }
    pos.emplace_back(64, 128, std::vector<std::vector<double>>{p});
    neg.emplace_back(64, 128, std::vector<std::vector<double>>{n});
  }
  const auto cands = squares_candidates(1);
  const ForestTrainResult r = train_forest(pos, neg, 5, cands, {ChannelKind::RGB});
  CHECK(r.model.trees.size() == 1);
  CHECK(r.round_error.at(0) == 0.0);
  CHECK(r.stopped_early);
  for (const auto& s : pos) CHECK(eval_forest(r.model, s, {0, 0, 1}) > 0.0);
  for (const auto& s : neg) CHECK(eval_forest(r.model, s, {0, 0, 1}) < 0.0);

  CHECK_THROWS_AS(train_forest(pos, neg, 0, cands, {ChannelKind::RGB}), std::invalid_argument);
  CHECK_THROWS_AS(train_forest(pos, {}, 3, cands, {ChannelKind::RGB}), std::invalid_argument);
}

TEST_CASE("boosting loss is non-increasing and weights stay a distribution") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<ChannelStack> pos, neg;
  for (int i = 0; i < 200; ++i) {
    const bool positive = i % 2 == 0;
    std::vector<std::vector<double>> planes(2, std::vector<double>(64 * 128));
    for (int c = 0; c < 2; ++c)
      for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 64; ++x) {
          const bool in = c == 0 ? (x < 32 && y < 64) : (x >= 32 && y >= 64);
          planes[c][y * 64 + x] = noise(rng) + (positive && in ? 0.01 : 0.0);
        }
    (positive ? pos : neg).emplace_back(64, 128, std::move(planes));
  }
  const auto cands = squares_candidates(2, {}, std::array{16, 32}, 16);
  const ForestTrainResult r = train_forest(pos, neg, 64, cands, {ChannelKind::RGB});
  REQUIRE(r.model.trees.size() > 1);
  for (std::size_t k = 1; k < r.round_log_loss.size(); ++k) {
    CHECK(r.round_log_loss[k] <= r.round_log_loss[k - 1] + 1e-12);
  }
  CHECK(std::accumulate(r.initial_weights.begin(), r.initial_weights.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::accumulate(r.final_weights.begin(), r.final_weights.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));

  // Recompute the loss log from the stored trees and weights.
  std::vector<const ChannelStack*> all;
  std::vector<int> y;
  for (const auto& s : pos) all.push_back(&s), y.push_back(1);
  for (const auto& s : neg) all.push_back(&s), y.push_back(-1);
  std::vector<double> F(all.size(), 0.0);
  for (std::size_t t = 0; t < r.model.trees.size(); ++t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      F[i] += r.model.tree_weights[t] * oracle::tree_value(r.model.trees[t], *all[i], {0, 0, 1});
      acc += r.initial_weights[i] * std::exp(-y[i] * F[i]);
    }
    CHECK(std::log(acc) == doctest::Approx(r.round_log_loss[t]).epsilon(1e-9));
  }
}

TEST_CASE("pyramid scales step by the configured factor") {
  SlidingWindowConfig cfg;
  cfg.min_height = 48;
  const auto s = pyramid_scales(640, 480, cfg, {});
  REQUIRE(s.size() > 3);
  for (std::size_t k = 0; k < s.size(); ++k) {
    CHECK(s[k] == doctest::Approx(48.0 / 96.0 * std::pow(2.0, k / 8.0)).epsilon(1e-12));
    CHECK(std::lround(128 * s[k]) <= 480);
  }
  CHECK(pyramid_scales(30, 30, cfg, {}).empty());
}

TEST_CASE("detection on a planted pattern") {
  const ForestModel m = planted_forest();
  Image img(160, 200, 3, 0.5);
  plant(img, 48, 60);
  SlidingWindowConfig cfg;
  cfg.min_height = 96;
  cfg.max_height = 96;
  const auto dets = detect(img, m, cfg);
  REQUIRE(!dets.empty());
  double best = 0.0;
  for (const auto& d : dets) best = std::max(best, iou(d.box, Box{48, 60, 48, 96}));
  CHECK(best >= 0.5);

  SUBCASE("padding with background leaves detections unchanged") {
    const auto padded = detect(pad_right_bottom(img, 40, 24, 0.5), m, cfg);
    REQUIRE(padded.size() == dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
      CHECK(padded[i].box == dets[i].box);
      CHECK(padded[i].score == dets[i].score);
    }
  }
  SUBCASE("blank image gives no detections") {
    CHECK(detect(Image(160, 200, 3, 0.5), m, cfg).empty());
  }
  SUBCASE("detect is deterministic") {
    const auto again = detect(img, m, cfg);
    REQUIRE(again.size() == dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) CHECK(again[i].score == dets[i].score);
  }
}

TEST_CASE("shifting score_offset shifts scores and keeps the NMS survivors") {
  ForestModel m = random_forest(30, kCfg, 8);
  std::mt19937_64 rng(4);
  const ChannelStack s = random_stack(120, 180, 10, rng);
  SlidingWindowConfig cfg;
  cfg.score_threshold = -std::numeric_limits<double>::infinity();
  cfg.min_height = 80;
  const auto a = detect(s, m, cfg);
  m.score_offset *= 2.0;
  const double delta = m.score_offset / 2.0;
  const auto b = detect(s, m, cfg);
  REQUIRE(a.size() == b.size());
  std::set<std::tuple<double, double, double>> sa, sb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(b[i].score - a[i].score == doctest::Approx(delta).epsilon(1e-9));
    sa.insert({a[i].box.x, a[i].box.y, a[i].box.h});
    sb.insert({b[i].box.x, b[i].box.y, b[i].box.h});
  }
  CHECK(sa == sb);
}

TEST_CASE("filter_proposals") {
  SUBCASE("distinct scores, target 3 over 10 images") {
    std::vector<std::vector<Detection>> d(10);
    for (int i = 0; i < 100; ++i) d[i % 10].push_back({Box{double(i), 0, 10, 20}, i / 100.0, i});
    const auto r = filter_proposals(d, 3.0);
    std::size_t n = 0;
    for (const auto& f : r.filtered) n += f.size();
    CHECK(n <= 30);
    CHECK(n == 30);
  }
  SUBCASE("large target keeps everything") {
    std::vector<std::vector<Detection>> d{{{Box{0, 0, 1, 1}, 0.1, 0}}, {{Box{0, 0, 1, 1}, 0.2, 0}}};
    const auto r = filter_proposals(d, 5.0);
    CHECK(r.threshold == -std::numeric_limits<double>::infinity());
    CHECK(r.filtered[0].size() == 1);
    CHECK(r.filtered[1].size() == 1);
  }
  SUBCASE("randomized instances match the threshold scan") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> cnt(0, 8), sc(0, 30);
    for (int inst = 0; inst < 100; ++inst) {
      std::vector<std::vector<Detection>> d(7);
      for (auto& f : d)
        for (int k = cnt(rng); k > 0; --k) f.push_back({Box{0, 0, 1, 1}, sc(rng) / 30.0, 0});
      const double target = 0.5 + inst % 5;
      std::vector<double> cands{-std::numeric_limits<double>::infinity()};
      for (const auto& f : d)
        for (const auto& x : f) cands.push_back(x.score);
      double best = std::numeric_limits<double>::infinity();
      for (double t : cands) {
        std::size_t n = 0;
        for (const auto& f : d)
          for (const auto& x : f) n += x.score > t;
        if (n <= target * d.size()) best = std::min(best, t);
      }
      const auto r = filter_proposals(d, target);
      CHECK(r.threshold == best);
      for (std::size_t f = 0; f < d.size(); ++f) CHECK(r.filtered[f].size() == apply_threshold(d[f], best).size());
    }
  }
}

TEST_CASE("forest JSON round trip and validation") {
  const ForestModel m = random_forest(12, kCfg, 77);
  const ForestModel back = forest_from_json(nlohmann::json::parse(forest_to_json(m).dump()));
  std::mt19937_64 rng(1);
  const ChannelStack s = random_stack(64, 128, 10, rng);
  CHECK(eval_forest(back, s, {0, 0, 1}) == eval_forest(m, s, {0, 0, 1}));
  CHECK(forest_to_json(back) == forest_to_json(m));

  nlohmann::json broken = forest_to_json(m);
  broken["trees"][0]["nodes"][0]["channel"] = 99;
  CHECK_THROWS_AS(forest_from_json(broken), DataError);
}
