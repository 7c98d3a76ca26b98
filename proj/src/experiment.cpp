#include "pedcascade/experiment.hpp"

#include "pedcascade/config.hpp"
#include "pedcascade/errors.hpp"

#include <map>
#include <mutex>
#include <stdexcept>

namespace pedcascade {

using nlohmann::json;

void ExperimentConfig::validate() const {
  train_data.validate();
  test_data.validate();
  forest.validate();
  rescorer.validate();
  cascade.sliding.validate();
  if (!(cascade.proposal_filter_avg > 0.0)) throw std::invalid_argument("proposal_filter_avg must be > 0");
}

json experiment_to_json(const ExperimentConfig& c) {
  return {{"version", 1},
          {"train_data", synth_spec_to_json(c.train_data)},
          {"train_seed", c.train_seed},
          {"test_data", synth_spec_to_json(c.test_data)},
          {"test_seed", c.test_seed},
          {"forest", forest_stage_to_json(c.forest)},
          {"rescorer", rescorer_train_to_json(c.rescorer)},
          {"cascade", cascade_options_to_json(c.cascade)}};
}

ExperimentConfig experiment_from_json(const json& j) {
  check_keys(j, {"version", "train_data", "train_seed", "test_data", "test_seed", "forest", "rescorer", "cascade"},
             "experiment config");
  ExperimentConfig c;
  try {
    if (j.value("version", 1) != 1) throw DataError("unsupported experiment config version");
    if (j.contains("train_data")) c.train_data = synth_spec_from_json(j["train_data"]);
    c.train_seed = j.value("train_seed", c.train_seed);
    if (j.contains("test_data")) c.test_data = synth_spec_from_json(j["test_data"]);
    c.test_seed = j.value("test_seed", c.test_seed);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed experiment config: ") + e.what());
  }
  if (j.contains("forest")) c.forest = forest_stage_from_json(j["forest"], c.forest);
  c.cascade.sliding = c.forest.sliding;
  if (j.contains("rescorer")) c.rescorer = rescorer_train_from_json(j["rescorer"], c.rescorer);
  if (j.contains("cascade")) cascade_options_from_json(j["cascade"], c.cascade);
  return c;
}

double ExperimentResult::metric(const std::string& name) const {
  if (name == "lamr") return lamr;
  if (name == "proposal_lamr") return proposal_lamr;
  if (name == "proposal_recall") return proposal_recall;
  if (name == "avg_proposals") return avg_proposals;
  if (name == "ap") return ap;
  throw std::invalid_argument("unknown metric '" + name + "'");
}

json ExperimentResult::to_json() const {
  return {{"lamr", lamr},
          {"proposal_lamr", proposal_lamr},
          {"proposal_recall", proposal_recall},
          {"avg_proposals", avg_proposals},
          {"ap", ap},
          {"timing", timing.to_json()}};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ForestModel* forest) {
  cfg.validate();
  const SynthDataset train = synth_dataset(cfg.train_data, cfg.train_seed);
  const SynthDataset test = synth_dataset(cfg.test_data, cfg.test_seed);

  ExperimentResult r;
  r.forest = forest != nullptr ? *forest : train_proposal_forest(train.images, train.frames, cfg.forest);
  r.rescorer = train_rescorer(train.images, train.frames, r.forest, cfg.cascade.sliding, cfg.rescorer);

  CascadeConfig cc = cfg.cascade;
  cc.proposal_model = r.forest;
  cc.rescorer = r.rescorer;
  const CascadeResult out = run_cascade(test.images, cc);
  r.timing = out.timing;
  r.lamr = lamr(out.detections, test.frames).summary;
  r.proposal_lamr = lamr(out.raw_proposals, test.frames).summary;
  r.ap = average_precision(out.detections, test.frames).summary;
  const EvalCurve rec = recall_vs_iou(out.proposals, test.frames, {0.5});
  r.proposal_recall = rec.y.at(0);
  r.avg_proposals = rec.meta.at("avg_proposals").get<double>();
  return r;
}

SweepConfig sweep_config_from_json(const json& j) {
  check_keys(j, {"version", "experiment", "axes", "seeds", "metric", "seed_key"}, "sweep config");
  SweepConfig c;
  try {
    if (j.value("version", 1) != 1) throw DataError("unsupported sweep config version");
    c.experiment = j.value("experiment", json::object());
    for (const auto& a : j.at("axes")) {
      check_keys(a, {"name", "values"}, "sweep axis");
      SweepAxis axis{a.at("name").get<std::string>(), {}};
      for (const auto& v : a.at("values")) axis.values.push_back(v);
      if (axis.values.empty()) throw DataError("sweep axis '" + axis.name + "' has no values");
      c.axes.push_back(std::move(axis));
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.metric = j.value("metric", c.metric);
    c.seed_key = j.value("seed_key", c.seed_key);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed sweep config: ") + e.what());
  }
  if (c.seeds.empty()) throw DataError("sweep config has no seeds");
  ExperimentResult{}.metric(c.metric);
  // Resolve every path once up front so typos fail before any training.
  const json full = experiment_to_json(experiment_from_json(c.experiment));
  with_override(full, c.seed_key, 0);
  for (const auto& a : c.axes) with_override(full, a.name, a.values.front());
  return c;
}

std::vector<SweepCell> run_sweep(const SweepConfig& cfg, int jobs) {
  const json full = experiment_to_json(experiment_from_json(cfg.experiment));
  std::mutex mu;
  std::map<std::string, ForestModel> forests;

  auto cell = [&](const std::vector<json>& coords, std::uint64_t seed) {
    json j = with_override(full, cfg.seed_key, seed);
    for (std::size_t a = 0; a < cfg.axes.size(); ++a) j = with_override(j, cfg.axes[a].name, coords[a]);
    const ExperimentConfig ec = experiment_from_json(j);
    ec.validate();
    const std::string key = json{j["forest"], j["train_data"], j["train_seed"]}.dump();
    ForestModel forest;
    {
      std::lock_guard lock(mu);
      auto it = forests.find(key);
      if (it == forests.end()) {
        const SynthDataset train = synth_dataset(ec.train_data, ec.train_seed);
        it = forests.emplace(key, train_proposal_forest(train.images, train.frames, ec.forest)).first;
      }
      forest = it->second;
    }
    return run_experiment(ec, &forest).metric(cfg.metric);
  };
  return grid_sweep(cfg.axes, cfg.seeds, cell, jobs);
}

}  // namespace pedcascade
