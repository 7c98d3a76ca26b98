#pragma once

#include "pedcascade/cascade.hpp"
#include "pedcascade/sweep.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace pedcascade {

/// One synthetic train/test run of the whole cascade.
struct ExperimentConfig {
  SynthSpec train_data{200};
  std::uint64_t train_seed = 1;
  SynthSpec test_data{100};
  std::uint64_t test_seed = 2;
  ForestStageConfig forest;
  RescorerTrainConfig rescorer;
  CascadeConfig cascade;  // only the options are used; models come from training

  void validate() const;
};

nlohmann::json experiment_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const nlohmann::json& j);

struct ExperimentResult {
  double lamr = 0.0;             // cascade detections
  double proposal_lamr = 0.0;    // raw proposal detector output
  double proposal_recall = 0.0;  // filtered proposals, IoU 0.5
  double avg_proposals = 0.0;    // filtered proposals per test image
  double ap = 0.0;               // cascade detections
  TimingReport timing;
  ForestModel forest;
  Rescorer rescorer;

  /// lamr, proposal_lamr, proposal_recall, avg_proposals or ap.
  double metric(const std::string& name) const;
  nlohmann::json to_json() const;
};

/// Trains the forest (unless `forest` is given) and the rescorer on the train
/// split, then runs and evaluates the cascade on the test split.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ForestModel* forest = nullptr);

/// Grid of experiments. Axis names are dotted paths into the experiment JSON;
/// each seed is written to `seed_key` before the cell runs.
struct SweepConfig {
  nlohmann::json experiment = nlohmann::json::object();
  std::vector<SweepAxis> axes;
  std::vector<std::uint64_t> seeds{1};
  std::string metric = "lamr";
  std::string seed_key = "rescorer.train.seed";
};

SweepConfig sweep_config_from_json(const nlohmann::json& j);

/// Forests are trained once per distinct forest config and train split and
/// shared between cells.
std::vector<SweepCell> run_sweep(const SweepConfig& cfg, int jobs = 1);

}  // namespace pedcascade
