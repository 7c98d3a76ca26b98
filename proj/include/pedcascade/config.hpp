#pragma once

#include "pedcascade/cascade.hpp"
#include "pedcascade/errors.hpp"

#include <string>

#include <json.hpp>

namespace pedcascade {

// JSON forms of the training and cascade configs. The *_from_json readers
// start from `base`, override the keys that are present and reject unknown
// keys with DataError, so configs can be partial.

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

nlohmann::json policy_to_json(const LabelingPolicy& p);
LabelingPolicy policy_from_json(const nlohmann::json& j, LabelingPolicy base = {});

nlohmann::json svm_config_to_json(const SvmConfig& c);
SvmConfig svm_config_from_json(const nlohmann::json& j, SvmConfig base = {});

nlohmann::json forest_stage_to_json(const ForestStageConfig& c);
ForestStageConfig forest_stage_from_json(const nlohmann::json& j, ForestStageConfig base = {});

nlohmann::json rescorer_train_to_json(const RescorerTrainConfig& c);
RescorerTrainConfig rescorer_train_from_json(const nlohmann::json& j, RescorerTrainConfig base = {});

/// Cascade options other than the models: sliding, proposal_filter_avg,
/// final_nms_iou, final_nms, score_blend.
nlohmann::json cascade_options_to_json(const CascadeConfig& c);
void cascade_options_from_json(const nlohmann::json& j, CascadeConfig& c);

/// Copy of `j` with the value at a dotted path ("rescorer.train.lr") replaced.
/// Throws std::invalid_argument when the path does not name an existing key.
nlohmann::json with_override(nlohmann::json j, const std::string& dotted_path, const nlohmann::json& value);

}  // namespace pedcascade
