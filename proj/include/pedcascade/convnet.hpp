#pragma once

#include "pedcascade/sampler.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace pedcascade {

enum class LayerKind { Conv, Pool, ReLU, FullyConnected, Softmax, Sigmoid, Step };
enum class PoolKind { Max, Mean };

/// One layer of a feed-forward stack. Which fields matter depends on `kind`.
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  int filters = 0;  // Conv
  int kernel = 0;   // Conv, Pool
  int stride = 1;   // Conv, Pool
  int pad = 0;      // Conv, Pool
  PoolKind pool = PoolKind::Max;
  int units = 0;            // FullyConnected
  double sharpness = 1.0;   // Sigmoid: y = 1 / (1 + exp(-sharpness * x))
  std::string name;

  static LayerSpec conv(int filters, int kernel, int stride = 1, int pad = -1);  // pad -1: (kernel-1)/2
  static LayerSpec pooling(PoolKind kind, int size = 3, int stride = 2);
  static LayerSpec relu();
  static LayerSpec fc(int units);
  static LayerSpec softmax();
  static LayerSpec sigmoid(double sharpness);
  static LayerSpec step();

  bool has_params() const noexcept { return kind == LayerKind::Conv || kind == LayerKind::FullyConnected; }
};

struct Shape {
  int c = 0;
  int h = 0;
  int w = 0;
  std::size_t size() const noexcept { return static_cast<std::size_t>(c) * h * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct NetSpec {
  Shape input{3, 128, 64};
  std::vector<LayerSpec> layers;

  /// Input shape followed by every layer's output shape. Throws
  /// std::invalid_argument when consecutive layers are inconsistent.
  std::vector<Shape> shapes() const;
  std::size_t parameter_count() const;

  /// Gives unnamed layers names like conv1, pool2, relu1, fc1, softmax1.
  void assign_names();
  /// Index of the named layer; throws std::invalid_argument if absent.
  int layer_index(const std::string& name) const;
  bool ends_with_softmax() const noexcept {
    return !layers.empty() && layers.back().kind == LayerKind::Softmax;
  }

  /// CifarNet-style stack:
  /// Conv-Pool-ReLU-Conv-ReLU-Pool-Conv-ReLU-Pool-FC-FC(2)-Softmax.
  static NetSpec cifarnet(int in_channels, std::array<int, 3> filters = {32, 32, 64},
                          std::array<int, 3> kernels = {5, 5, 5}, int fc_units = 32,
                          std::array<PoolKind, 3> pools = {PoolKind::Max, PoolKind::Mean, PoolKind::Mean},
                          int height = 128, int width = 64);
};

struct LayerParams {
  std::vector<double> weights;  // Conv: [F][C][k][k], FC: [units][fan_in]
  std::vector<double> bias;
};

struct TrainLogEntry {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
};

struct NetModel {
  NetSpec spec;
  std::vector<LayerParams> params;  // one entry per layer, empty for parameter-free layers
  std::vector<TrainLogEntry> training_log;

  /// Throws std::invalid_argument if weight shapes do not match the spec.
  void validate() const;
  std::size_t parameter_count() const;
};

/// Zero-mean Gaussian weights (first parameterised layer uses first_sigma), zero biases.
NetModel init_net(const NetSpec& spec, double sigma, double first_sigma, std::uint64_t seed);
NetModel zero_net(const NetSpec& spec);

struct ForwardResult {
  /// Pedestrian-class probability (softmax nets) or the single output value.
  double score = 0.0;
  std::vector<double> output;
  /// activations[0] is the input, activations[l + 1] the output of layer l.
  std::vector<std::vector<double>> activations;
  /// Max-pool argmax indices per layer (empty for other layers).
  std::vector<std::vector<std::uint32_t>> switches;
};

/// Forward pass over a CHW input. Throws std::invalid_argument on size mismatch.
ForwardResult forward(const NetModel& model, std::span<const double> input);

/// Output of the named layer, flattened.
std::vector<double> layer_output(const NetModel& model, std::span<const double> input, const std::string& layer);

struct RegularizationConfig {
  double weight_decay = 0.005;     // all parameterised layers but the last
  double last_layer_decay = 1.0;   // last parameterised layer
};

struct Gradients {
  std::vector<LayerParams> total;    // d(loss)/d(params), data term + penalty
  std::vector<LayerParams> penalty;  // gradient of the L2 term alone
  double data_loss = 0.0;            // mean over the batch
  double penalty_loss = 0.0;
  double loss() const noexcept { return data_loss + penalty_loss; }
};

/// Exact gradients of mean softmax cross-entropy (or, for single-output nets,
/// logistic loss on the output) plus sum_l lambda_l / 2 * |W_l|^2.
/// Labels are 1 (pedestrian) or 0 (background).
Gradients backward(const NetModel& model, std::span<const std::vector<double>> batch, std::span<const int> labels,
                   const RegularizationConfig& reg);

/// Loss only, same definition as backward.
double batch_loss(const NetModel& model, std::span<const std::vector<double>> batch, std::span<const int> labels,
                  const RegularizationConfig& reg);

struct TrainConfig {
  double lr = 0.005;
  double momentum = 0.9;
  int batch = 128;
  double weight_decay = 0.005;
  double last_layer_decay = 1.0;
  int epochs = 60;        // at lr
  int extra_epochs = 10;  // at lr * lr_drop
  double lr_drop = 0.1;
  double init_sigma = 0.01;
  double first_layer_sigma = 1e-4;
  bool flip = true;  // random horizontal flips
  std::uint64_t seed = 1;

  void validate() const;
  RegularizationConfig regularization() const { return {weight_decay, last_layer_decay}; }
};

/// Writes the network input for pool entry `id` (flipped horizontally if requested) into `out`.
using InputFn = std::function<void(std::size_t id, bool flip, std::vector<double>& out)>;

/// SGD with classical momentum (v <- mu v - lr g; w <- w + v). One epoch is
/// sampler.batches_per_epoch() batches. Appends one TrainLogEntry per epoch.
/// Throws NumericError when the loss becomes non-finite.
NetModel train(NetModel model, BatchSampler& sampler, const InputFn& input, const TrainConfig& cfg);

/// Flattened views for optimisers and gradient checks.
std::size_t flat_size(const std::vector<LayerParams>& params);
double& flat_at(std::vector<LayerParams>& params, std::size_t index);
double flat_at(const std::vector<LayerParams>& params, std::size_t index);

nlohmann::json net_spec_to_json(const NetSpec& spec);
NetSpec net_spec_from_json(const nlohmann::json& j);

/// Binary model file: magic "PCNET\0\0\1", u32 version, u64-length JSON manifest,
/// then per parameterised layer u64 count + little-endian f64 weights and
/// u64 count + f64 biases, then the training log (u64 n, then i64 epoch,
/// f64 lr, f64 loss per entry).
void save_net(const std::filesystem::path& path, const NetModel& model);
NetModel load_net(const std::filesystem::path& path);
std::vector<unsigned char> serialize_net(const NetModel& model);
NetModel deserialize_net(std::span<const unsigned char> bytes);

/// CSV with header "epoch,lr,mean_loss".
std::string training_log_csv(const NetModel& model);

}  // namespace pedcascade
