#include "pedcascade/config.hpp"
#include "pedcascade/errors.hpp"
#include "pedcascade/experiment.hpp"
#include "pedcascade/svm.hpp"
#include "pedcascade/sweep.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

using namespace pedcascade;
using nlohmann::json;

namespace {

double norm(const std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("linear SVM on separable data") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.5);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    const int label = i % 2 ? 1 : -1;
    x.push_back({2.0 * label + n(rng), 1.5 * label + n(rng)});
    y.push_back(label);
  }
  SvmConfig cfg;
  cfg.C = 1.0;
  const LinearSvm svm = train_svm(x, y, cfg);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(svm.score(x[i]) * y[i] > 0.0);

  SvmConfig tiny = cfg, small = cfg;
  tiny.C = 1e-9;
  small.C = 1e-3;
  CHECK(norm(train_svm(x, y, tiny).w) < norm(train_svm(x, y, small).w));

  CHECK_THROWS_AS(train_svm(x, std::vector<int>(x.size(), 1), cfg), std::invalid_argument);
  std::vector<std::vector<double>> ragged = x;
  ragged[3].push_back(1.0);
  CHECK_THROWS_AS(train_svm(ragged, y, cfg), std::invalid_argument);
}

TEST_CASE("SVM objective is close to a grid-search optimum") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 12; ++i) {
    const int label = i % 3 ? 1 : -1;
    x.push_back({0.8 * label + n(rng)});
    y.push_back(label);
  }
  SvmConfig cfg;
  cfg.C = 0.5;
  cfg.iterations = 20000;
  const LinearSvm svm = train_svm(x, y, cfg);
  const double obj = svm_objective(svm, x, y, cfg.C);

  // Coarse grid, then a fine grid around the best coarse cell.
  auto grid = [&](double w0, double w1, double b0, double b1, double step, double& bw, double& bb) {
    double best = 1e300;
    for (double w = w0; w <= w1; w += step)
      for (double b = b0; b <= b1; b += step) {
        const double v = svm_objective(LinearSvm{{w}, b}, x, y, cfg.C);
        if (v < best) best = v, bw = w, bb = b;
      }
    return best;
  };
  double bw = 0, bb = 0;
  grid(-4, 4, -4, 4, 0.02, bw, bb);
  const double best = grid(bw - 0.05, bw + 0.05, bb - 0.05, bb + 0.05, 1e-4, bw, bb);
  CHECK(std::abs(obj - best) <= 1e-3);
}

TEST_CASE("SVM JSON round trip") {
  LinearSvm s{{0.5, -1.25, 3.0}, 0.125};
  SvmConfig cfg;
  cfg.feature_layer = "fc2";
  SvmConfig back_cfg;
  const LinearSvm back = svm_from_json(json::parse(svm_to_json(s, cfg).dump()), &back_cfg);
  CHECK(back.w == s.w);
  CHECK(back.b == s.b);
  CHECK(back_cfg.feature_layer == "fc2");
}

TEST_CASE("grid sweeps") {
  SUBCASE("1x1 grid gives the direct call") {
    const std::vector<SweepAxis> axes{{"a", {json(3)}}};
    const auto cells = grid_sweep(axes, {7}, [](const std::vector<json>& c, std::uint64_t seed) {
      return c[0].get<double>() * 10.0 + static_cast<double>(seed);
    });
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].mean == 37.0);
    CHECK(cells[0].stddev == 0.0);
  }
  SUBCASE("3x3 grid in row-major order") {
    const std::vector<SweepAxis> axes{{"kernel", {json(3), json(5), json(7)}}, {"filters", {json(16), json(32), json(64)}}};
    const auto cells = grid_sweep(axes, {1, 2}, [](const std::vector<json>& c, std::uint64_t seed) {
      return c[0].get<double>() * 100.0 + c[1].get<double>() + (seed == 1 ? -1.0 : 1.0);
    }, 2);
    REQUIRE(cells.size() == 9);
    int k = 0;
    for (int a : {3, 5, 7})
      for (int b : {16, 32, 64}) {
        CHECK(cells[k].coords[0] == a);
        CHECK(cells[k].coords[1] == b);
        CHECK(cells[k].mean == a * 100.0 + b);
        CHECK(cells[k].stddev == doctest::Approx(std::sqrt(2.0)));
        ++k;
      }
    const std::string csv = sweep_csv(axes, cells);
    CHECK(csv.rfind("kernel,filters,mean,std,n,status\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
  }
  SUBCASE("a failing cell is recorded and the rest complete") {
    const std::vector<SweepAxis> axes{{"a", {json(0), json(1), json(2)}}, {"b", {json(0), json(1), json(2)}}};
    const auto cells = grid_sweep(axes, {1}, [](const std::vector<json>& c, std::uint64_t) -> double {
      if (c[0] == 1 && c[1] == 1) throw std::runtime_error("boom");
      return 1.0;
    });
    int failed = 0;
    for (const auto& c : cells) failed += c.failed;
    CHECK(failed == 1);
    CHECK(cells[4].failed);
    CHECK(cells[4].error.find("boom") != std::string::npos);
    CHECK(sweep_csv(axes, cells).find("failed: boom") != std::string::npos);
  }
  CHECK_THROWS_AS(grid_sweep({}, {1}, [](const std::vector<json>&, std::uint64_t) { return 0.0; }), std::invalid_argument);
  CHECK_THROWS_AS(grid_sweep({{"a", {json(1)}}}, {}, [](const std::vector<json>&, std::uint64_t) { return 0.0; }),
                  std::invalid_argument);
}

TEST_CASE("config readers") {
  const TrainConfig t = train_config_from_json(json::parse(R"({"lr":0.1,"batch":16})"));
  CHECK(t.lr == 0.1);
  CHECK(t.batch == 16);
  CHECK(t.momentum == TrainConfig{}.momentum);
  CHECK_THROWS_AS(train_config_from_json(json::parse(R"({"lr_typo":0.1})")), DataError);
  CHECK(train_config_to_json(train_config_from_json(train_config_to_json(t))) == train_config_to_json(t));

  const LabelingPolicy p = policy_from_json(json::parse(R"({"positives":"gt+proposals","pos_iou":0.75})"));
  CHECK(p.positive_source == PositiveSource::GtPlusProposals);
  CHECK(p.pos_iou == 0.75);

  const ForestStageConfig f = forest_stage_from_json(json::parse(R"({"sliding":{"score_threshold":null},"n_trees":8})"));
  CHECK(f.options.n_trees == 8);
  CHECK(f.sliding.score_threshold == -std::numeric_limits<double>::infinity());
  CHECK(forest_stage_to_json(forest_stage_from_json(forest_stage_to_json(f))) == forest_stage_to_json(f));

  const RescorerTrainConfig r = rescorer_train_from_json(json::parse(R"({"negatives":"random","ratio":null})"));
  CHECK(r.negatives == NegativeSource::Random);
  CHECK(!r.ratio.has_value());
  CHECK(rescorer_train_to_json(rescorer_train_from_json(rescorer_train_to_json(r))) == rescorer_train_to_json(r));

  const json j = json::parse(R"({"a":{"b":1}})");
  CHECK(with_override(j, "a.b", 5)["a"]["b"] == 5);
  CHECK_THROWS_AS(with_override(j, "a.c", 5), std::invalid_argument);
}

TEST_CASE("experiment and sweep configs") {
  const ExperimentConfig e = experiment_from_json(json::parse(R"({"train_data":{"n_frames":10},"forest":{"n_trees":4}})"));
  CHECK(e.train_data.n_frames == 10);
  CHECK(e.forest.options.n_trees == 4);
  CHECK(experiment_to_json(experiment_from_json(experiment_to_json(e))) == experiment_to_json(e));
  CHECK_THROWS_AS(experiment_from_json(json::parse(R"({"bogus":1})")), DataError);

  const SweepConfig s = sweep_config_from_json(json::parse(
      R"({"axes":[{"name":"rescorer.kernels","values":[[3,3,3],[5,5,5]]}],"seeds":[1,2],"metric":"ap"})"));
  CHECK(s.axes.size() == 1);
  CHECK(s.seeds.size() == 2);
  CHECK_THROWS_AS(sweep_config_from_json(json::parse(R"({"axes":[{"name":"rescorer.nope","values":[1]}]})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(sweep_config_from_json(json::parse(R"({"axes":[{"name":"forest.n_trees","values":[1]}],"metric":"x"})")),
                  std::invalid_argument);
}
