#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace pedcascade {

struct SvmConfig {
  double C = 1e-3;
  double neg_overlap = 0.5;  // proposals with IoU below this are negatives
  std::string feature_layer = "fc1";
  int iterations = 2000;

  void validate() const;
};

struct LinearSvm {
  std::vector<double> w;
  double b = 0.0;

  double score(std::span<const double> x) const;
};

/// 0.5 |w|^2 + C * sum_i max(0, 1 - y_i (w.x_i + b)), labels in {+1, -1} (or 1/0).
double svm_objective(const LinearSvm& svm, std::span<const std::vector<double>> features, std::span<const int> labels,
                     double C);

/// Deterministic full-batch subgradient descent on the primal with step
/// 1 / (lambda t), lambda = 1 / (C n). The bias is not regularised. Returns
/// the iterate with the lowest objective. Throws std::invalid_argument when a
/// class is missing or feature lengths differ.
LinearSvm train_svm(std::span<const std::vector<double>> features, std::span<const int> labels, const SvmConfig& cfg);

nlohmann::json svm_to_json(const LinearSvm& svm, const SvmConfig& cfg);
LinearSvm svm_from_json(const nlohmann::json& j, SvmConfig* cfg = nullptr);

}  // namespace pedcascade
