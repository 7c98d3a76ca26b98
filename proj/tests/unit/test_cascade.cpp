#include "pedcascade/cascade.hpp"
#include "pedcascade/data.hpp"
#include "pedcascade/errors.hpp"
#include "pedcascade/forest2nn.hpp"
#include "pedcascade/geometry.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace pedcascade;

namespace {

SynthSpec small_spec(int n) {
  SynthSpec s;
  s.n_frames = n;
  s.width = 192;
  s.height = 160;
  s.min_height = 60;
  s.max_height = 80;
  s.clutter = 0.5;
  return s;
}

ForestStageConfig small_forest_cfg() {
  ForestStageConfig c;
  c.options = {8, 32};
  c.bootstrap_rounds = 0;
  c.random_negatives_per_frame = 10;
  c.square_sizes = {16, 32};
  c.grid = 16;
  c.sliding.score_threshold = -std::numeric_limits<double>::infinity();
  c.sliding.stride = 8;
  c.sliding.min_height = 56;
  c.sliding.max_height = 96;
  return c;
}

RescorerTrainConfig small_rescorer_cfg() {
  RescorerTrainConfig r;
  r.filters = {2, 2, 4};
  r.kernels = {3, 3, 3};
  r.fc_units = 4;
  r.train_proposal_avg = 4;
  r.train.batch = 12;
  r.train.epochs = 1;
  r.train.extra_epochs = 0;
  r.train.lr = 0.01;
  r.train.init_sigma = 0.05;
  r.train.first_layer_sigma = 0.05;
  return r;
}

struct Fixture {
  SynthDataset train;
  SynthDataset test;
  ForestModel forest;
  Rescorer net_rescorer;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    x.train = synth_dataset(small_spec(8), 11);
    x.test = synth_dataset(small_spec(4), 12);
    const ForestStageConfig fc = small_forest_cfg();
    x.forest = train_proposal_forest(x.train.images, x.train.frames, fc);
    x.net_rescorer = train_rescorer(x.train.images, x.train.frames, x.forest, fc.sliding, small_rescorer_cfg());
    return x;
  }();
  return f;
}

CascadeConfig cascade_with(const Rescorer& r) {
  CascadeConfig c;
  c.proposal_model = fixture().forest;
  c.sliding = small_forest_cfg().sliding;
  c.rescorer = r;
  c.proposal_filter_avg = 3.0;
  return c;
}

bool same_dets(const FrameDets& a, const FrameDets& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t f = 0; f < a.size(); ++f) {
    if (a[f].size() != b[f].size()) return false;
    for (std::size_t i = 0; i < a[f].size(); ++i) {
      const Detection& x = a[f][i];
      const Detection& y = b[f][i];
      if (x.box.x != y.box.x || x.box.y != y.box.y || x.box.w != y.box.w || x.box.h != y.box.h || x.score != y.score)
        return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("identity rescorer returns the filtered proposals after NMS") {
  const auto& fx = fixture();
  const CascadeResult r = run_cascade(fx.test.images, cascade_with(Rescorer{}));
  REQUIRE(r.proposals.size() == fx.test.images.size());
  FrameDets expect;
  for (const auto& p : r.proposals) expect.push_back(nms(p, 0.5));
  CHECK(same_dets(r.detections, expect));

  std::size_t total = 0;
  for (const auto& p : r.proposals) total += p.size();
  CHECK(static_cast<double>(total) <= 3.0 * fx.test.images.size());
  for (const auto& p : r.proposals)
    for (const auto& d : p) CHECK(d.score > r.proposal_threshold);
}

TEST_CASE("rescoring never moves boxes") {
  const auto& fx = fixture();
  CascadeConfig c = cascade_with(fx.net_rescorer);
  c.final_nms = false;
  const CascadeResult r = run_cascade(fx.test.images, c);
  for (std::size_t f = 0; f < r.detections.size(); ++f) {
    CHECK(r.detections[f].size() == r.proposals[f].size());
    for (const Detection& d : r.detections[f]) {
      bool found = false;
      for (const Detection& p : r.proposals[f])
        found = found || (p.box.x == d.box.x && p.box.y == d.box.y && p.box.w == d.box.w && p.box.h == d.box.h);
      CHECK(found);
      CHECK(d.score >= 0.0);
      CHECK(d.score <= 1.0);
    }
  }
  c.score_blend = ScoreBlend::None;
  c.final_nms = true;
  const CascadeResult keep = run_cascade(fx.test.images, c);
  FrameDets expect;
  for (const auto& p : keep.proposals) expect.push_back(nms(p, 0.5));
  CHECK(same_dets(keep.detections, expect));
}

TEST_CASE("compiled rescorer reproduces the proposal scores") {
  const auto& fx = fixture();
  CascadeConfig c = cascade_with(compiled_rescorer(fx.forest));
  c.final_nms = false;
  const CascadeResult r = run_cascade(fx.test.images, c);
  for (std::size_t f = 0; f < r.detections.size(); ++f) {
    REQUIRE(r.detections[f].size() == r.proposals[f].size());
    std::vector<Detection> sorted;
    for (std::size_t k : score_order(r.proposals[f])) sorted.push_back(r.proposals[f][k]);
    for (std::size_t i = 0; i < sorted.size(); ++i)
      CHECK(std::abs(r.detections[f][i].score - sorted[i].score) <= 1e-9);
  }
}

TEST_CASE("empty image set") {
  const CascadeResult r = run_cascade({}, cascade_with(Rescorer{}));
  CHECK(r.detections.empty());
  CHECK(r.proposals.empty());
  CHECK(r.timing.images == 0);
  CHECK(r.timing.windows_scored == 0);
  CHECK(r.timing.ms_per_image_total == 0.0);
  CHECK(r.timing.consistent());
}

TEST_CASE("cascade output does not depend on the job count") {
  const auto& fx = fixture();
  const CascadeConfig c = cascade_with(fx.net_rescorer);
  const CascadeResult a = run_cascade(fx.test.images, c, 1);
  const CascadeResult b = run_cascade(fx.test.images, c, 2);
  CHECK(same_dets(a.detections, b.detections));
  CHECK(same_dets(a.raw_proposals, b.raw_proposals));
  CHECK(a.timing.consistent());
  CHECK(b.timing.consistent());
  std::size_t windows = 0;
  for (const auto& p : a.proposals) windows += p.size();
  CHECK(a.timing.windows_scored == windows);
  CHECK(a.timing.images == fx.test.images.size());
}

TEST_CASE("saved cascades reload to identical output") {
  const auto& fx = fixture();
  const auto dir = std::filesystem::temp_directory_path() / "pedcascade_unit_cascade";
  std::filesystem::remove_all(dir);
  for (const Rescorer& r : {Rescorer{}, fx.net_rescorer, compiled_rescorer(fx.forest)}) {
    CAPTURE(to_string(r.kind));
    const CascadeConfig c = cascade_with(r);
    save_cascade(dir, c);
    const CascadeConfig back = load_cascade(dir);
    CHECK(back.rescorer.kind == r.kind);
    CHECK(same_dets(run_cascade(fx.test.images, back).detections, run_cascade(fx.test.images, c).detections));
    std::filesystem::remove_all(dir);
  }
  CHECK_THROWS(load_cascade(dir));
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto& fx = fixture();
  const ForestStageConfig fc = small_forest_cfg();
  const ForestModel again = train_proposal_forest(fx.train.images, fx.train.frames, fc);
  CHECK(forest_to_json(again).dump() == forest_to_json(fx.forest).dump());
  const Rescorer r = train_rescorer(fx.train.images, fx.train.frames, fx.forest, fc.sliding, small_rescorer_cfg());
  CHECK(serialize_net(r.net) == serialize_net(fx.net_rescorer.net));
}

TEST_CASE("rescorer training reports") {
  const auto& fx = fixture();
  RescorerTrainReport rep;
  RescorerTrainConfig cfg = small_rescorer_cfg();
  cfg.negatives = NegativeSource::Random;
  train_rescorer(fx.train.images, fx.train.frames, fx.forest, small_forest_cfg().sliding, cfg, &rep);
  CHECK(rep.positives > 0);
  CHECK(rep.negatives > 0);
  CHECK(rep.batches > 0);
  CHECK(rep.ratio_violations == 0);
}
