#include "pedcascade/svm.hpp"

#include "pedcascade/errors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pedcascade {

void SvmConfig::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw std::invalid_argument("SVM C must be > 0");
  if (!(neg_overlap >= 0.0 && neg_overlap <= 1.0)) throw std::invalid_argument("neg_overlap must be in [0, 1]");
  if (iterations < 1) throw std::invalid_argument("SVM iterations must be >= 1");
}

double LinearSvm::score(std::span<const double> x) const {
  if (x.size() != w.size()) throw std::invalid_argument("SVM feature length mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
  return s + b;
}

namespace {

inline double sign_of(int label) { return label > 0 ? 1.0 : -1.0; }

}  // namespace

double svm_objective(const LinearSvm& svm, std::span<const std::vector<double>> features, std::span<const int> labels,
                     double C) {
  double reg = 0.0;
  for (double v : svm.w) reg += v * v;
  double hinge = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    hinge += std::max(0.0, 1.0 - sign_of(labels[i]) * svm.score(features[i]));
  }
  return 0.5 * reg + C * hinge;
}

LinearSvm train_svm(std::span<const std::vector<double>> features, std::span<const int> labels, const SvmConfig& cfg) {
  cfg.validate();
  if (features.empty() || features.size() != labels.size()) throw std::invalid_argument("SVM: bad training set");
  const std::size_t d = features[0].size();
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != d) throw std::invalid_argument("SVM: feature lengths differ");
    (labels[i] > 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("SVM: both classes are required");

  const double n = static_cast<double>(features.size());
  const double lambda = 1.0 / (cfg.C * n);
  LinearSvm cur{std::vector<double>(d, 0.0), 0.0};
  LinearSvm best = cur;
  double best_obj = svm_objective(cur, features, labels, cfg.C);
  std::vector<double> g(d);
  for (int t = 1; t <= cfg.iterations; ++t) {
    // subgradient of lambda/2 |w|^2 + mean hinge
    std::fill(g.begin(), g.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      const double y = sign_of(labels[i]);
      if (y * cur.score(features[i]) < 1.0) {
        for (std::size_t j = 0; j < d; ++j) g[j] -= y * features[i][j];
        gb -= y;
      }
    }
    const double eta = 1.0 / (lambda * t);
    for (std::size_t j = 0; j < d; ++j) cur.w[j] -= eta * (lambda * cur.w[j] + g[j] / n);
    cur.b -= eta * gb / n;
    const double obj = svm_objective(cur, features, labels, cfg.C);
    if (!std::isfinite(obj)) throw NumericError("SVM objective became non-finite at iteration " + std::to_string(t));
    if (obj < best_obj) {
      best_obj = obj;
      best = cur;
    }
  }
  return best;
}

nlohmann::json svm_to_json(const LinearSvm& svm, const SvmConfig& cfg) {
  return {{"format", "pedcascade.svm"},
          {"version", 1},
          {"C", cfg.C},
          {"neg_overlap", cfg.neg_overlap},
          {"feature_layer", cfg.feature_layer},
          {"iterations", cfg.iterations},
          {"w", svm.w},
          {"b", svm.b}};
}

LinearSvm svm_from_json(const nlohmann::json& j, SvmConfig* cfg) {
  try {
    if (j.at("format").get<std::string>() != "pedcascade.svm") throw DataError("not an SVM file");
    if (j.at("version").get<int>() != 1) throw DataError("unsupported SVM file version");
    LinearSvm svm{j.at("w").get<std::vector<double>>(), j.at("b").get<double>()};
    if (cfg != nullptr) {
      cfg->C = j.at("C").get<double>();
      cfg->neg_overlap = j.at("neg_overlap").get<double>();
      cfg->feature_layer = j.at("feature_layer").get<std::string>();
      cfg->iterations = j.value("iterations", cfg->iterations);
    }
    return svm;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed SVM JSON: ") + e.what());
  }
}

}  // namespace pedcascade
