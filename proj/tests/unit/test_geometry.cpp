#include "oracles.hpp"

#include "pedcascade/geometry.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <stdexcept>

using namespace pedcascade;

TEST_CASE("iou of simple boxes") {
  const Box a{0, 0, 2, 2};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, Box{5, 5, 1, 1}) == 0.0);
  CHECK(iou(a, Box{2, 0, 2, 2}) == 0.0);
  CHECK(iou(a, Box{1, 1, 2, 2}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("iou is symmetric, bounded and matches the area oracle") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const Box a = oracle::random_box(rng, 50.0, 0.5, 30.0);
    const Box b = oracle::random_box(rng, 50.0, 0.5, 30.0);
    const double v = iou(a, b);
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == doctest::Approx(oracle::iou(a, b)).epsilon(1e-12));
    CHECK(iou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("make_box enforces the box invariant") {
  CHECK_NOTHROW(make_box(0, 0, 1, 1));
  CHECK_THROWS_AS(make_box(0, 0, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_box(0, 0, 1, -2), std::invalid_argument);
  CHECK_THROWS_AS(make_box(std::nan(""), 0, 1, 1), std::invalid_argument);
}

TEST_CASE("nms trivial cases") {
  std::vector<Detection> one{{Box{0, 0, 10, 10}, 0.5, 0}};
  CHECK(nms(one, 0.5).size() == 1);

  std::vector<Detection> two{{Box{0, 0, 10, 10}, 0.3, 0}, {Box{0, 0, 10, 10}, 0.9, 1}};
  const auto kept = nms(two, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score == 0.9);
  CHECK(nms(std::vector<Detection>{}, 0.5).empty());
}

TEST_CASE("nms suppresses only above the threshold") {
  // IoU exactly 1/3 between the two boxes.
  std::vector<Detection> d{{Box{0, 0, 2, 1}, 0.9, 0}, {Box{1, 0, 2, 1}, 0.8, 1}};
  CHECK(nms(d, 1.0 / 3.0).size() == 2);
  CHECK(nms(d, 0.3).size() == 1);
}

TEST_CASE("nms equals the quadratic oracle and is permutation invariant") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> sc(0, 9);
  for (int inst = 0; inst < 200; ++inst) {
    std::vector<Detection> d;
    for (int i = 0; i < 50; ++i) d.push_back({oracle::random_box(rng, 60.0, 5.0, 30.0), sc(rng) / 10.0, i});
    const double thr = inst % 2 ? 0.5 : 0.3;
    const auto idx = nms_indices(d, thr);
    CHECK(idx == oracle::nms(d, thr));

    const auto kept = nms(d, thr);
    REQUIRE(kept.size() == idx.size());
    for (std::size_t a = 0; a < kept.size(); ++a) {
      for (std::size_t b = a + 1; b < kept.size(); ++b) CHECK(iou(kept[a].box, kept[b].box) <= thr);
    }

    std::vector<Detection> shuffled = d;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto kept2 = nms(shuffled, thr);
    REQUIRE(kept2.size() == kept.size());
    for (std::size_t a = 0; a < kept.size(); ++a) {
      CHECK(kept2[a].box == kept[a].box);
      CHECK(kept2[a].score == kept[a].score);
    }
  }
}

TEST_CASE("score_order breaks ties by x then y then index") {
  std::vector<Detection> d{{Box{5, 1, 1, 1}, 0.5, 0}, {Box{2, 9, 1, 1}, 0.5, 1}, {Box{2, 3, 1, 1}, 0.5, 2},
                           {Box{2, 3, 1, 1}, 0.5, 3}, {Box{9, 9, 1, 1}, 0.7, 4}};
  CHECK(score_order(d) == std::vector<std::size_t>{4, 2, 3, 1, 0});
}

TEST_CASE("match_detections trivial cases") {
  std::vector<Box> gt{{0, 0, 10, 20}, {50, 50, 10, 20}};
  std::vector<Detection> d{{gt[0], 0.9, 0}, {gt[1], 0.8, 1}};
  const auto m = match_detections(d, gt, {}, 0.5);
  CHECK(m.pairs.size() == 2);
  CHECK(m.unmatched_detections.empty());
  CHECK(m.unmatched_gt.empty());

  const Box ign{0, 0, 10, 10};
  std::vector<Detection> d2{{Box{0, 0, 10, 8}, 0.5, 0}};  // IoU 0.8 with the ignore region
  const auto m2 = match_detections(d2, std::vector<Box>{}, std::vector<Box>{ign}, 0.5);
  CHECK(m2.ignored_detections == std::vector<std::size_t>{0});
  CHECK(m2.unmatched_detections.empty());
}

TEST_CASE("match_detections equals the exhaustive greedy oracle") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> sc(0, 9);
  for (int inst = 0; inst < 200; ++inst) {
    std::vector<Box> gt, ign;
    for (int g = 0; g < 10; ++g) gt.push_back(oracle::random_box(rng, 100.0, 10.0, 30.0));
    for (int g = 0; g < 2; ++g) ign.push_back(oracle::random_box(rng, 100.0, 10.0, 40.0));
    std::vector<Detection> d;
    for (int i = 0; i < 20; ++i) {
      const Box b = i % 2 ? oracle::jitter(gt[i % 10], rng, 0.2) : oracle::random_box(rng, 100.0, 10.0, 30.0);
      d.push_back({b, sc(rng) / 10.0, i});
    }
    const auto m = match_detections(d, gt, ign, 0.5);
    const auto o = oracle::match(d, gt, ign, 0.5);
    CHECK(m.pairs == o.pairs);
    CHECK(m.unmatched_detections == o.unmatched);
    CHECK(m.ignored_detections == o.ignored);
    CHECK(m.unmatched_gt == o.unmatched_gt);

    CHECK(m.pairs.size() <= std::min(d.size(), gt.size()));
    CHECK(m.pairs.size() + m.unmatched_detections.size() + m.ignored_detections.size() == d.size());
    for (const auto& [di, gi] : m.pairs) CHECK(iou(d[di].box, gt[gi]) >= 0.5);
  }
}

TEST_CASE("window geometry round trip") {
  const Box b{30.0, 40.0, 24.0, 48.0};
  const WindowPlacement w = window_for_box(b);
  CHECK(w.scale == doctest::Approx(0.5));
  const Box back = box_for_window(w);
  CHECK(back.x == doctest::Approx(b.x));
  CHECK(back.y == doctest::Approx(b.y));
  CHECK(back.h == doctest::Approx(b.h));
  CHECK(back.w == doctest::Approx(b.w));
}
