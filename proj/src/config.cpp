#include "pedcascade/config.hpp"

#include "pedcascade/errors.hpp"

#include <algorithm>
#include <stdexcept>

namespace pedcascade {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  if (!j.is_object()) throw DataError(what + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw DataError("unknown key '" + key + "' in " + what);
    }
  }
}

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

template <class F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError("malformed " + what + ": " + e.what());
  }
}

}  // namespace

json train_config_to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"momentum", c.momentum},
          {"batch", c.batch},
          {"weight_decay", c.weight_decay},
          {"last_layer_decay", c.last_layer_decay},
          {"epochs", c.epochs},
          {"extra_epochs", c.extra_epochs},
          {"lr_drop", c.lr_drop},
          {"init_sigma", c.init_sigma},
          {"first_layer_sigma", c.first_layer_sigma},
          {"flip", c.flip},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  check_keys(j,
             {"lr", "momentum", "batch", "weight_decay", "last_layer_decay", "epochs", "extra_epochs", "lr_drop",
              "init_sigma", "first_layer_sigma", "flip", "seed"},
             "net training config");
  return guarded("net training config", [&] {
    read(j, "lr", c.lr);
    read(j, "momentum", c.momentum);
    read(j, "batch", c.batch);
    read(j, "weight_decay", c.weight_decay);
    read(j, "last_layer_decay", c.last_layer_decay);
    read(j, "epochs", c.epochs);
    read(j, "extra_epochs", c.extra_epochs);
    read(j, "lr_drop", c.lr_drop);
    read(j, "init_sigma", c.init_sigma);
    read(j, "first_layer_sigma", c.first_layer_sigma);
    read(j, "flip", c.flip);
    read(j, "seed", c.seed);
    return c;
  });
}

json policy_to_json(const LabelingPolicy& p) {
  return {{"positives", p.positive_source == PositiveSource::Gt ? "gt" : "gt+proposals"},
          {"pos_iou", p.pos_iou ? json(*p.pos_iou) : json(nullptr)},
          {"neg_iou", p.neg_iou}};
}

LabelingPolicy policy_from_json(const json& j, LabelingPolicy p) {
  check_keys(j, {"positives", "pos_iou", "neg_iou"}, "labeling policy");
  return guarded("labeling policy", [&] {
    if (j.contains("positives")) {
      const std::string s = j["positives"].get<std::string>();
      if (s == "gt") {
        p.positive_source = PositiveSource::Gt;
      } else if (s == "gt+proposals") {
        p.positive_source = PositiveSource::GtPlusProposals;
      } else {
        throw DataError("unknown positive source '" + s + "' (gt, gt+proposals)");
      }
    }
    if (j.contains("pos_iou")) {
      p.pos_iou = j["pos_iou"].is_null() ? std::nullopt : std::optional<double>(j["pos_iou"].get<double>());
    }
    read(j, "neg_iou", p.neg_iou);
    return p;
  });
}

json svm_config_to_json(const SvmConfig& c) {
  return {{"C", c.C}, {"neg_overlap", c.neg_overlap}, {"feature_layer", c.feature_layer}, {"iterations", c.iterations}};
}

SvmConfig svm_config_from_json(const json& j, SvmConfig c) {
  check_keys(j, {"C", "neg_overlap", "feature_layer", "iterations"}, "SVM config");
  return guarded("SVM config", [&] {
    read(j, "C", c.C);
    read(j, "neg_overlap", c.neg_overlap);
    read(j, "feature_layer", c.feature_layer);
    read(j, "iterations", c.iterations);
    return c;
  });
}

json forest_stage_to_json(const ForestStageConfig& c) {
  return {{"channels", channel_cfg_to_json(c.channels)},
          {"n_trees", c.options.n_trees},
          {"threshold_levels", c.options.threshold_levels},
          {"bootstrap_rounds", c.bootstrap_rounds},
          {"random_negatives_per_frame", c.random_negatives_per_frame},
          {"hard_negatives_per_frame", c.hard_negatives_per_frame},
          {"flip_positives", c.flip_positives},
          {"neg_iou", c.neg_iou},
          {"sliding", sliding_to_json(c.sliding)},
          {"square_sizes", c.square_sizes},
          {"grid", c.grid},
          {"seed", c.seed}};
}

ForestStageConfig forest_stage_from_json(const json& j, ForestStageConfig c) {
  check_keys(j,
             {"channels", "n_trees", "threshold_levels", "bootstrap_rounds", "random_negatives_per_frame",
              "hard_negatives_per_frame", "flip_positives", "neg_iou", "sliding", "square_sizes", "grid", "seed"},
             "forest config");
  return guarded("forest config", [&] {
    if (j.contains("channels")) c.channels = channel_cfg_from_json(j["channels"]);
    read(j, "n_trees", c.options.n_trees);
    read(j, "threshold_levels", c.options.threshold_levels);
    read(j, "bootstrap_rounds", c.bootstrap_rounds);
    read(j, "random_negatives_per_frame", c.random_negatives_per_frame);
    read(j, "hard_negatives_per_frame", c.hard_negatives_per_frame);
    read(j, "flip_positives", c.flip_positives);
    read(j, "neg_iou", c.neg_iou);
    if (j.contains("sliding")) c.sliding = sliding_from_json(j["sliding"], c.sliding);
    read(j, "square_sizes", c.square_sizes);
    read(j, "grid", c.grid);
    read(j, "seed", c.seed);
    return c;
  });
}

json rescorer_train_to_json(const RescorerTrainConfig& c) {
  return {{"policy", policy_to_json(c.policy)},
          {"negatives", c.negatives == NegativeSource::Proposals ? "proposals" : "random"},
          {"random_negatives_per_frame", c.random_negatives_per_frame},
          {"train_proposal_avg", c.train_proposal_avg},
          {"ratio", c.ratio ? json::array({c.ratio->pos, c.ratio->neg}) : json(nullptr)},
          {"train", train_config_to_json(c.train)},
          {"filters", c.filters},
          {"kernels", c.kernels},
          {"fc_units", c.fc_units},
          {"channels", channel_cfg_to_json(c.channels)},
          {"svm_head", c.svm_head},
          {"svm", svm_config_to_json(c.svm)}};
}

RescorerTrainConfig rescorer_train_from_json(const json& j, RescorerTrainConfig c) {
  check_keys(j,
             {"policy", "negatives", "random_negatives_per_frame", "train_proposal_avg", "ratio", "train", "filters",
              "kernels", "fc_units", "channels", "svm_head", "svm"},
             "rescorer config");
  return guarded("rescorer config", [&] {
    if (j.contains("policy")) c.policy = policy_from_json(j["policy"], c.policy);
    if (j.contains("negatives")) {
      const std::string s = j["negatives"].get<std::string>();
      if (s == "proposals") {
        c.negatives = NegativeSource::Proposals;
      } else if (s == "random") {
        c.negatives = NegativeSource::Random;
      } else {
        throw DataError("unknown negative source '" + s + "' (proposals, random)");
      }
    }
    read(j, "random_negatives_per_frame", c.random_negatives_per_frame);
    read(j, "train_proposal_avg", c.train_proposal_avg);
    if (j.contains("ratio")) {
      if (j["ratio"].is_null()) {
        c.ratio.reset();
      } else {
        const auto r = j["ratio"].get<std::array<int, 2>>();
        c.ratio = BatchRatio{r[0], r[1]};
      }
    }
    if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
    read(j, "filters", c.filters);
    read(j, "kernels", c.kernels);
    read(j, "fc_units", c.fc_units);
    if (j.contains("channels")) c.channels = channel_cfg_from_json(j["channels"]);
    read(j, "svm_head", c.svm_head);
    if (j.contains("svm")) c.svm = svm_config_from_json(j["svm"], c.svm);
    return c;
  });
}

json cascade_options_to_json(const CascadeConfig& c) {
  return {{"sliding", sliding_to_json(c.sliding)},
          {"proposal_filter_avg", c.proposal_filter_avg},
          {"final_nms_iou", c.final_nms_iou},
          {"final_nms", c.final_nms},
          {"score_blend", c.score_blend == ScoreBlend::Replace ? "replace" : "none"}};
}

void cascade_options_from_json(const json& j, CascadeConfig& c) {
  check_keys(j, {"sliding", "proposal_filter_avg", "final_nms_iou", "final_nms", "score_blend"}, "cascade config");
  guarded("cascade config", [&] {
    if (j.contains("sliding")) c.sliding = sliding_from_json(j["sliding"], c.sliding);
    read(j, "proposal_filter_avg", c.proposal_filter_avg);
    read(j, "final_nms_iou", c.final_nms_iou);
    read(j, "final_nms", c.final_nms);
    if (j.contains("score_blend")) {
      const std::string s = j["score_blend"].get<std::string>();
      if (s != "replace" && s != "none") throw DataError("unknown score_blend '" + s + "' (replace, none)");
      c.score_blend = s == "replace" ? ScoreBlend::Replace : ScoreBlend::None;
    }
    return 0;
  });
}

json with_override(json j, const std::string& dotted_path, const json& value) {
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_path.find('.', start);
    const std::string key = dotted_path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) {
      throw std::invalid_argument("config has no key '" + dotted_path + "'");
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
  return j;
}

}  // namespace pedcascade
