#include "pedcascade/convnet.hpp"

#include "pedcascade/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace pedcascade {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Specs

LayerSpec LayerSpec::conv(int filters, int kernel, int stride, int pad) {
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.filters = filters;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad < 0 ? (kernel - 1) / 2 : pad;
  return l;
}

LayerSpec LayerSpec::pooling(PoolKind kind, int size, int stride) {
  LayerSpec l;
  l.kind = LayerKind::Pool;
  l.pool = kind;
  l.kernel = size;
  l.stride = stride;
  return l;
}

LayerSpec LayerSpec::relu() {
  LayerSpec l;
  l.kind = LayerKind::ReLU;
  return l;
}

LayerSpec LayerSpec::fc(int units) {
  LayerSpec l;
  l.kind = LayerKind::FullyConnected;
  l.units = units;
  return l;
}

LayerSpec LayerSpec::softmax() {
  LayerSpec l;
  l.kind = LayerKind::Softmax;
  return l;
}

LayerSpec LayerSpec::sigmoid(double sharpness) {
  LayerSpec l;
  l.kind = LayerKind::Sigmoid;
  l.sharpness = sharpness;
  return l;
}

LayerSpec LayerSpec::step() {
  LayerSpec l;
  l.kind = LayerKind::Step;
  return l;
}

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Pool: return "pool";
    case LayerKind::ReLU: return "relu";
    case LayerKind::FullyConnected: return "fc";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Step: return "step";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& s) {
  for (LayerKind k : {LayerKind::Conv, LayerKind::Pool, LayerKind::ReLU, LayerKind::FullyConnected,
                      LayerKind::Softmax, LayerKind::Sigmoid, LayerKind::Step}) {
    if (s == kind_name(k)) return k;
  }
  throw DataError("unknown layer kind '" + s + "'");
}

int pool_out(int in, int k, int stride, int pad) {
  int out = static_cast<int>(std::ceil(static_cast<double>(in + 2 * pad - k) / stride)) + 1;
  if (pad > 0 && (out - 1) * stride >= in + pad) --out;
  return out;
}

}  // namespace

std::vector<Shape> NetSpec::shapes() const {
  if (input.c <= 0 || input.h <= 0 || input.w <= 0) throw std::invalid_argument("net input shape must be positive");
  std::vector<Shape> out{input};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const Shape in = out.back();
    Shape s = in;
    const std::string where = "layer " + std::to_string(i) + " (" + kind_name(l.kind) + ")";
    switch (l.kind) {
      case LayerKind::Conv:
        if (l.filters <= 0 || l.kernel <= 0 || l.stride <= 0 || l.pad < 0) {
          throw std::invalid_argument(where + ": bad conv parameters");
        }
        s.c = l.filters;
        s.h = (in.h + 2 * l.pad - l.kernel) / l.stride + 1;
        s.w = (in.w + 2 * l.pad - l.kernel) / l.stride + 1;
        if (in.h + 2 * l.pad < l.kernel || in.w + 2 * l.pad < l.kernel) {
          throw std::invalid_argument(where + ": kernel larger than input");
        }
        break;
      case LayerKind::Pool:
        if (l.kernel <= 0 || l.stride <= 0 || l.pad < 0 || in.h + 2 * l.pad < l.kernel ||
            in.w + 2 * l.pad < l.kernel) {
          throw std::invalid_argument(where + ": bad pool parameters");
        }
        s.h = pool_out(in.h, l.kernel, l.stride, l.pad);
        s.w = pool_out(in.w, l.kernel, l.stride, l.pad);
        break;
      case LayerKind::FullyConnected:
        if (l.units <= 0) throw std::invalid_argument(where + ": units must be positive");
        s = {l.units, 1, 1};
        break;
      case LayerKind::Softmax:
        if (in.h != 1 || in.w != 1 || in.c < 2) throw std::invalid_argument(where + ": softmax needs a vector input");
        break;
      case LayerKind::Sigmoid:
        if (!(l.sharpness > 0.0)) throw std::invalid_argument(where + ": sharpness must be > 0");
        break;
      case LayerKind::ReLU:
      case LayerKind::Step: break;
    }
    if (s.c <= 0 || s.h <= 0 || s.w <= 0) throw std::invalid_argument(where + ": empty output");
    out.push_back(s);
  }
  return out;
}

std::size_t NetSpec::parameter_count() const {
  const auto sh = shapes();
  std::size_t n = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (l.kind == LayerKind::Conv) {
      n += static_cast<std::size_t>(l.filters) * sh[i].c * l.kernel * l.kernel + l.filters;
    } else if (l.kind == LayerKind::FullyConnected) {
      n += static_cast<std::size_t>(l.units) * sh[i].size() + l.units;
    }
  }
  return n;
}

void NetSpec::assign_names() {
  std::array<int, 7> counters{};
  for (auto& l : layers) {
    const int n = ++counters[static_cast<std::size_t>(l.kind)];
    if (l.name.empty()) l.name = std::string(kind_name(l.kind)) + std::to_string(n);
  }
}

int NetSpec::layer_index(const std::string& name) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].name == name) return static_cast<int>(i);
  }
  throw std::invalid_argument("no layer named '" + name + "'");
}

NetSpec NetSpec::cifarnet(int in_channels, std::array<int, 3> filters, std::array<int, 3> kernels, int fc_units,
                          std::array<PoolKind, 3> pools, int height, int width) {
  NetSpec s;
  s.input = {in_channels, height, width};
  s.layers = {LayerSpec::conv(filters[0], kernels[0]),
              LayerSpec::pooling(pools[0]),
              LayerSpec::relu(),
              LayerSpec::conv(filters[1], kernels[1]),
              LayerSpec::relu(),
              LayerSpec::pooling(pools[1]),
              LayerSpec::conv(filters[2], kernels[2]),
              LayerSpec::relu(),
              LayerSpec::pooling(pools[2]),
              LayerSpec::fc(fc_units),
              LayerSpec::fc(2),
              LayerSpec::softmax()};
  s.assign_names();
  return s;
}

namespace {

std::pair<std::size_t, std::size_t> param_sizes(const LayerSpec& l, const Shape& in) {
  if (l.kind == LayerKind::Conv) {
    return {static_cast<std::size_t>(l.filters) * in.c * l.kernel * l.kernel, static_cast<std::size_t>(l.filters)};
  }
  if (l.kind == LayerKind::FullyConnected) {
    return {static_cast<std::size_t>(l.units) * in.size(), static_cast<std::size_t>(l.units)};
  }
  return {0, 0};
}

int last_param_layer(const NetSpec& spec) {
  int last = -1;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].has_params()) last = static_cast<int>(i);
  }
  return last;
}

}  // namespace

void NetModel::validate() const {
  const auto sh = spec.shapes();
  if (params.size() != spec.layers.size()) throw std::invalid_argument("net params/layers count mismatch");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto [nw, nb] = param_sizes(spec.layers[i], sh[i]);
    if (params[i].weights.size() != nw || params[i].bias.size() != nb) {
      throw std::invalid_argument("weight shape mismatch at layer " + std::to_string(i));
    }
  }
}

std::size_t NetModel::parameter_count() const { return flat_size(params); }

NetModel zero_net(const NetSpec& spec_in) {
  NetModel m;
  m.spec = spec_in;
  m.spec.assign_names();
  const auto sh = m.spec.shapes();
  for (std::size_t i = 0; i < m.spec.layers.size(); ++i) {
    const auto [nw, nb] = param_sizes(m.spec.layers[i], sh[i]);
    m.params.push_back({std::vector<double>(nw, 0.0), std::vector<double>(nb, 0.0)});
  }
  return m;
}

NetModel init_net(const NetSpec& spec, double sigma, double first_sigma, std::uint64_t seed) {
  NetModel m = zero_net(spec);
  std::mt19937_64 rng(seed);
  bool first = true;
  for (std::size_t i = 0; i < m.spec.layers.size(); ++i) {
    if (!m.spec.layers[i].has_params()) continue;
    std::normal_distribution<double> dist(0.0, first ? first_sigma : sigma);
    for (double& w : m.params[i].weights) w = dist(rng);
    first = false;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Layer kernels

namespace {

void im2col(const double* in, const Shape& is, const LayerSpec& l, const Shape& os, double* col) {
  const int k = l.kernel;
  const std::size_t P = static_cast<std::size_t>(os.h) * os.w;
  for (int c = 0; c < is.c; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * P;
        for (int oy = 0; oy < os.h; ++oy) {
          const int y = oy * l.stride - l.pad + ky;
          double* dst = row + static_cast<std::size_t>(oy) * os.w;
          if (y < 0 || y >= is.h) {
            std::fill(dst, dst + os.w, 0.0);
            continue;
          }
          const double* src = in + (static_cast<std::size_t>(c) * is.h + y) * is.w;
          for (int ox = 0; ox < os.w; ++ox) {
            const int x = ox * l.stride - l.pad + kx;
            dst[ox] = (x < 0 || x >= is.w) ? 0.0 : src[x];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const Shape& is, const LayerSpec& l, const Shape& os, double* dx) {
  const int k = l.kernel;
  const std::size_t P = static_cast<std::size_t>(os.h) * os.w;
  for (int c = 0; c < is.c; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * P;
        for (int oy = 0; oy < os.h; ++oy) {
          const int y = oy * l.stride - l.pad + ky;
          if (y < 0 || y >= is.h) continue;
          double* dst = dx + (static_cast<std::size_t>(c) * is.h + y) * is.w;
          const double* src = row + static_cast<std::size_t>(oy) * os.w;
          for (int ox = 0; ox < os.w; ++ox) {
            const int x = ox * l.stride - l.pad + kx;
            if (x >= 0 && x < is.w) dst[x] += src[ox];
          }
        }
      }
    }
  }
}

struct PoolWindow {
  int y0, y1, x0, x1;
  int count;  // clipped window size used by mean pooling
};

PoolWindow pool_window(const LayerSpec& l, const Shape& is, int oy, int ox) {
  int hs = oy * l.stride - l.pad;
  int ws = ox * l.stride - l.pad;
  int he = std::min(hs + l.kernel, is.h + l.pad);
  int we = std::min(ws + l.kernel, is.w + l.pad);
  const int count = (he - hs) * (we - ws);
  hs = std::max(hs, 0);
  ws = std::max(ws, 0);
  he = std::min(he, is.h);
  we = std::min(we, is.w);
  return {hs, he, ws, we, count};
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {  // log(1 + exp(x))
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

struct Workspace {
  std::vector<double> col;
  std::vector<double> dcol;
};

void layer_forward(const LayerSpec& l, const LayerParams& p, const Shape& is, const Shape& os, const double* in,
                   double* out, std::vector<std::uint32_t>& sw, Workspace& ws) {
  const std::size_t n_out = os.size();
  switch (l.kind) {
    case LayerKind::Conv: {
      const std::size_t ckk = static_cast<std::size_t>(is.c) * l.kernel * l.kernel;
      const std::size_t P = static_cast<std::size_t>(os.h) * os.w;
      ws.col.resize(ckk * P);
      im2col(in, is, l, os, ws.col.data());
      Eigen::Map<const RowMat> W(p.weights.data(), l.filters, static_cast<Eigen::Index>(ckk));
      Eigen::Map<const RowMat> C(ws.col.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(P));
      Eigen::Map<RowMat> Y(out, l.filters, static_cast<Eigen::Index>(P));
      Y.noalias() = W * C;
      for (int f = 0; f < l.filters; ++f) Y.row(f).array() += p.bias[f];
      break;
    }
    case LayerKind::Pool: {
      if (l.pool == PoolKind::Max) sw.resize(n_out);
      std::size_t o = 0;
      for (int c = 0; c < os.c; ++c) {
        const double* plane = in + static_cast<std::size_t>(c) * is.h * is.w;
        for (int oy = 0; oy < os.h; ++oy) {
          for (int ox = 0; ox < os.w; ++ox, ++o) {
            const PoolWindow w = pool_window(l, is, oy, ox);
            if (l.pool == PoolKind::Max) {
              double best = -std::numeric_limits<double>::infinity();
              std::uint32_t arg = 0;
              for (int y = w.y0; y < w.y1; ++y)
                for (int x = w.x0; x < w.x1; ++x) {
                  const double v = plane[y * is.w + x];
                  if (v > best) {
                    best = v;
                    arg = static_cast<std::uint32_t>((static_cast<std::size_t>(c) * is.h + y) * is.w + x);
                  }
                }
              out[o] = best;
              sw[o] = arg;
            } else {
              double s = 0.0;
              for (int y = w.y0; y < w.y1; ++y)
                for (int x = w.x0; x < w.x1; ++x) s += plane[y * is.w + x];
              out[o] = s / w.count;
            }
          }
        }
      }
      break;
    }
    case LayerKind::ReLU:
      for (std::size_t i = 0; i < n_out; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case LayerKind::FullyConnected: {
      const std::size_t fan_in = is.size();
      for (int u = 0; u < l.units; ++u) {
        const double* row = p.weights.data() + static_cast<std::size_t>(u) * fan_in;
        double acc = 0.0;
        for (std::size_t j = 0; j < fan_in; ++j) acc += row[j] * in[j];
        out[u] = acc + p.bias[u];
      }
      break;
    }
    case LayerKind::Softmax: {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n_out; ++i) m = std::max(m, in[i]);
      double s = 0.0;
      for (std::size_t i = 0; i < n_out; ++i) {
        out[i] = std::exp(in[i] - m);
        s += out[i];
      }
      for (std::size_t i = 0; i < n_out; ++i) out[i] /= s;
      break;
    }
    case LayerKind::Sigmoid:
      for (std::size_t i = 0; i < n_out; ++i) out[i] = sigmoid(l.sharpness * in[i]);
      break;
    case LayerKind::Step:
      for (std::size_t i = 0; i < n_out; ++i) out[i] = in[i] > 0.0 ? 1.0 : 0.0;
      break;
  }
}

// Accumulates parameter gradients into g and writes the input gradient to din (if non-null).
void layer_backward(const LayerSpec& l, const LayerParams& p, const Shape& is, const Shape& os, const double* in,
                    const double* out, const double* dout, const std::vector<std::uint32_t>& sw, LayerParams* g,
                    double* din, Workspace& ws) {
  const std::size_t n_in = is.size();
  const std::size_t n_out = os.size();
  switch (l.kind) {
    case LayerKind::Conv: {
      const std::size_t ckk = static_cast<std::size_t>(is.c) * l.kernel * l.kernel;
      const std::size_t P = static_cast<std::size_t>(os.h) * os.w;
      ws.col.resize(ckk * P);
      im2col(in, is, l, os, ws.col.data());
      Eigen::Map<const RowMat> C(ws.col.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(P));
      Eigen::Map<const RowMat> dY(dout, l.filters, static_cast<Eigen::Index>(P));
      Eigen::Map<RowMat> dW(g->weights.data(), l.filters, static_cast<Eigen::Index>(ckk));
      dW.noalias() += dY * C.transpose();
      for (int f = 0; f < l.filters; ++f) g->bias[f] += dY.row(f).sum();
      if (din != nullptr) {
        Eigen::Map<const RowMat> W(p.weights.data(), l.filters, static_cast<Eigen::Index>(ckk));
        ws.dcol.resize(ckk * P);
        Eigen::Map<RowMat> dC(ws.dcol.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(P));
        dC.noalias() = W.transpose() * dY;
        std::fill(din, din + n_in, 0.0);
        col2im_add(ws.dcol.data(), is, l, os, din);
      }
      break;
    }
    case LayerKind::Pool: {
      if (din == nullptr) break;
      std::fill(din, din + n_in, 0.0);
      if (l.pool == PoolKind::Max) {
        for (std::size_t o = 0; o < n_out; ++o) din[sw[o]] += dout[o];
        break;
      }
      std::size_t o = 0;
      for (int c = 0; c < os.c; ++c) {
        double* plane = din + static_cast<std::size_t>(c) * is.h * is.w;
        for (int oy = 0; oy < os.h; ++oy) {
          for (int ox = 0; ox < os.w; ++ox, ++o) {
            const PoolWindow w = pool_window(l, is, oy, ox);
            const double share = dout[o] / w.count;
            for (int y = w.y0; y < w.y1; ++y)
              for (int x = w.x0; x < w.x1; ++x) plane[y * is.w + x] += share;
          }
        }
      }
      break;
    }
    case LayerKind::ReLU:
      if (din != nullptr)
        for (std::size_t i = 0; i < n_in; ++i) din[i] = in[i] > 0.0 ? dout[i] : 0.0;
      break;
    case LayerKind::FullyConnected: {
      const std::size_t fan_in = n_in;
      for (int u = 0; u < l.units; ++u) {
        double* grow = g->weights.data() + static_cast<std::size_t>(u) * fan_in;
        const double d = dout[u];
        for (std::size_t j = 0; j < fan_in; ++j) grow[j] += d * in[j];
        g->bias[u] += d;
      }
      if (din != nullptr) {
        std::fill(din, din + n_in, 0.0);
        for (int u = 0; u < l.units; ++u) {
          const double* row = p.weights.data() + static_cast<std::size_t>(u) * fan_in;
          const double d = dout[u];
          for (std::size_t j = 0; j < fan_in; ++j) din[j] += row[j] * d;
        }
      }
      break;
    }
    case LayerKind::Softmax: {
      if (din == nullptr) break;
      double dot = 0.0;
      for (std::size_t i = 0; i < n_out; ++i) dot += dout[i] * out[i];
      for (std::size_t i = 0; i < n_out; ++i) din[i] = out[i] * (dout[i] - dot);
      break;
    }
    case LayerKind::Sigmoid:
      if (din != nullptr)
        for (std::size_t i = 0; i < n_in; ++i) din[i] = dout[i] * l.sharpness * out[i] * (1.0 - out[i]);
      break;
    case LayerKind::Step:
      if (din != nullptr) std::fill(din, din + n_in, 0.0);
      break;
  }
}

void run_forward(const NetModel& model, const std::vector<Shape>& shapes, std::span<const double> input,
                 ForwardResult& res, Workspace& ws) {
  const std::size_t L = model.spec.layers.size();
  if (input.size() != shapes[0].size()) {
    throw std::invalid_argument("net input size " + std::to_string(input.size()) + " does not match spec " +
                                std::to_string(shapes[0].size()));
  }
  res.activations.resize(L + 1);
  res.switches.resize(L);
  res.activations[0].assign(input.begin(), input.end());
  for (std::size_t i = 0; i < L; ++i) {
    res.activations[i + 1].resize(shapes[i + 1].size());
    res.switches[i].clear();
    layer_forward(model.spec.layers[i], model.params[i], shapes[i], shapes[i + 1], res.activations[i].data(),
                  res.activations[i + 1].data(), res.switches[i], ws);
  }
  res.output = res.activations[L];
  if (model.spec.ends_with_softmax()) {
    res.score = res.output.size() >= 2 ? res.output[1] : res.output[0];
  } else {
    res.score = res.output.empty() ? 0.0 : res.output[0];
  }
}

// Data loss of one sample and the gradient at the start layer's output.
// Returns the index of the last layer to backpropagate through.
int output_gradient(const NetModel& model, const ForwardResult& res, int label, std::vector<double>& dtop,
                    double& loss) {
  const std::size_t L = model.spec.layers.size();
  if (model.spec.ends_with_softmax()) {
    const auto& z = res.activations[L - 1];
    const auto& p = res.output;
    if (label < 0 || static_cast<std::size_t>(label) >= p.size()) throw std::invalid_argument("label out of range");
    double m = -std::numeric_limits<double>::infinity();
    for (double v : z) m = std::max(m, v);
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    loss = -(z[static_cast<std::size_t>(label)] - m - std::log(s));
    dtop.assign(p.begin(), p.end());
    dtop[static_cast<std::size_t>(label)] -= 1.0;
    return static_cast<int>(L) - 2;
  }
  if (res.output.size() != 1) throw std::invalid_argument("non-softmax nets must have a single output");
  const double t = label > 0 ? 1.0 : -1.0;
  const double s = res.output[0];
  loss = softplus(-t * s);
  dtop = {-t * sigmoid(-t * s)};
  return static_cast<int>(L) - 1;
}

void check_batch(const NetModel& model, std::span<const std::vector<double>> batch, std::span<const int> labels) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (batch.size() != labels.size()) throw std::invalid_argument("batch/labels size mismatch");
  if (model.spec.layers.empty()) throw std::invalid_argument("net has no layers");
}

double l2_penalty(const NetModel& model, const RegularizationConfig& reg, std::vector<LayerParams>* grad) {
  const int last = last_param_layer(model.spec);
  double pen = 0.0;
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    if (!model.spec.layers[i].has_params()) continue;
    const double lambda = static_cast<int>(i) == last ? reg.last_layer_decay : reg.weight_decay;
    double sq = 0.0;
    for (double w : model.params[i].weights) sq += w * w;
    pen += 0.5 * lambda * sq;
    if (grad != nullptr) {
      auto& gw = (*grad)[i].weights;
      for (std::size_t j = 0; j < gw.size(); ++j) gw[j] = lambda * model.params[i].weights[j];
    }
  }
  return pen;
}

std::vector<LayerParams> zeros_like(const std::vector<LayerParams>& p) {
  std::vector<LayerParams> z(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    z[i].weights.assign(p[i].weights.size(), 0.0);
    z[i].bias.assign(p[i].bias.size(), 0.0);
  }
  return z;
}

}  // namespace

ForwardResult forward(const NetModel& model, std::span<const double> input) {
  const auto shapes = model.spec.shapes();
  ForwardResult res;
  Workspace ws;
  run_forward(model, shapes, input, res, ws);
  return res;
}

std::vector<double> layer_output(const NetModel& model, std::span<const double> input, const std::string& layer) {
  const int idx = model.spec.layer_index(layer);
  ForwardResult r = forward(model, input);
  return std::move(r.activations[static_cast<std::size_t>(idx) + 1]);
}

Gradients backward(const NetModel& model, std::span<const std::vector<double>> batch, std::span<const int> labels,
                   const RegularizationConfig& reg) {
  check_batch(model, batch, labels);
  const auto shapes = model.spec.shapes();
  Gradients g;
  g.total = zeros_like(model.params);
  g.penalty = zeros_like(model.params);

  ForwardResult res;
  Workspace ws;
  std::vector<double> dcur, dnext;
  double data_loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    run_forward(model, shapes, batch[b], res, ws);
    double loss = 0.0;
    const int start = output_gradient(model, res, labels[b], dcur, loss);
    data_loss += loss;
    for (int i = start; i >= 0; --i) {
      const auto li = static_cast<std::size_t>(i);
      double* din = nullptr;
      if (i > 0) {
        dnext.resize(shapes[li].size());
        din = dnext.data();
      }
      layer_backward(model.spec.layers[li], model.params[li], shapes[li], shapes[li + 1],
                     res.activations[li].data(), res.activations[li + 1].data(), dcur.data(), res.switches[li],
                     &g.total[li], din, ws);
      if (i > 0) std::swap(dcur, dnext);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& lp : g.total) {
    for (double& v : lp.weights) v *= inv;
    for (double& v : lp.bias) v *= inv;
  }
  g.data_loss = data_loss * inv;
  g.penalty_loss = l2_penalty(model, reg, &g.penalty);
  for (std::size_t i = 0; i < g.total.size(); ++i) {
    for (std::size_t j = 0; j < g.total[i].weights.size(); ++j) g.total[i].weights[j] += g.penalty[i].weights[j];
  }
  return g;
}

double batch_loss(const NetModel& model, std::span<const std::vector<double>> batch, std::span<const int> labels,
                  const RegularizationConfig& reg) {
  check_batch(model, batch, labels);
  const auto shapes = model.spec.shapes();
  ForwardResult res;
  Workspace ws;
  std::vector<double> dtop;
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    run_forward(model, shapes, batch[b], res, ws);
    double loss = 0.0;
    output_gradient(model, res, labels[b], dtop, loss);
    total += loss;
  }
  return total / static_cast<double>(batch.size()) + l2_penalty(model, reg, nullptr);
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("bad lr/momentum");
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  if (epochs < 0 || extra_epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(weight_decay >= 0.0) || !(last_layer_decay >= 0.0)) throw std::invalid_argument("weight decay must be >= 0");
  if (!(lr_drop > 0.0)) throw std::invalid_argument("lr_drop must be > 0");
}

NetModel train(NetModel model, BatchSampler& sampler, const InputFn& input, const TrainConfig& cfg) {
  cfg.validate();
  model.validate();
  std::vector<LayerParams> velocity = zeros_like(model.params);
  std::mt19937_64 flip_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::bernoulli_distribution coin(0.5);
  const RegularizationConfig reg = cfg.regularization();
  const std::size_t per_epoch = sampler.batches_per_epoch();
  const std::size_t n_flat = flat_size(model.params);

  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.epochs + cfg.extra_epochs; ++epoch) {
    const double lr = epoch < cfg.epochs ? cfg.lr : cfg.lr * cfg.lr_drop;
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::vector<std::size_t> ids = sampler.next();
      inputs.resize(ids.size());
      labels.resize(ids.size());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const bool flip = cfg.flip && coin(flip_rng);
        input(ids[i], flip, inputs[i]);
        labels[i] = sampler.label(ids[i]) > 0 ? 1 : 0;
      }
      const Gradients g = backward(model, inputs, labels, reg);
      const double loss = g.loss();
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "training diverged: loss " << loss << " at epoch " << epoch << ", batch " << b << " (lr " << lr << ")";
        throw NumericError(msg.str());
      }
      loss_sum += loss;
      for (std::size_t k = 0; k < n_flat; ++k) {
        double& v = flat_at(velocity, k);
        v = cfg.momentum * v - lr * flat_at(g.total, k);
        flat_at(model.params, k) += v;
      }
    }
    model.training_log.push_back({epoch, lr, per_epoch ? loss_sum / static_cast<double>(per_epoch) : 0.0});
  }
  return model;
}

std::size_t flat_size(const std::vector<LayerParams>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.weights.size() + p.bias.size();
  return n;
}

namespace {

template <class Params>
auto& flat_ref(Params& params, std::size_t index) {
  for (auto& p : params) {
    if (index < p.weights.size()) return p.weights[index];
    index -= p.weights.size();
    if (index < p.bias.size()) return p.bias[index];
    index -= p.bias.size();
  }
  throw std::out_of_range("flat parameter index");
}

}  // namespace

double& flat_at(std::vector<LayerParams>& params, std::size_t index) { return flat_ref(params, index); }
double flat_at(const std::vector<LayerParams>& params, std::size_t index) { return flat_ref(params, index); }

// ---------------------------------------------------------------------------
// Serialisation

nlohmann::json net_spec_to_json(const NetSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) {
    nlohmann::json j{{"kind", kind_name(l.kind)}, {"name", l.name}};
    switch (l.kind) {
      case LayerKind::Conv:
        j["filters"] = l.filters;
        j["kernel"] = l.kernel;
        j["stride"] = l.stride;
        j["pad"] = l.pad;
        break;
      case LayerKind::Pool:
        j["pool"] = l.pool == PoolKind::Max ? "max" : "mean";
        j["size"] = l.kernel;
        j["stride"] = l.stride;
        j["pad"] = l.pad;
        break;
      case LayerKind::FullyConnected: j["units"] = l.units; break;
      case LayerKind::Sigmoid: j["sharpness"] = l.sharpness; break;
      default: break;
    }
    layers.push_back(j);
  }
  return {{"format", "pedcascade.netspec"},
          {"version", 1},
          {"input", {{"channels", spec.input.c}, {"height", spec.input.h}, {"width", spec.input.w}}},
          {"layers", layers}};
}

NetSpec net_spec_from_json(const nlohmann::json& j) {
  try {
    NetSpec s;
    s.input = {j.at("input").at("channels").get<int>(), j.at("input").at("height").get<int>(),
               j.at("input").at("width").get<int>()};
    for (const auto& lj : j.at("layers")) {
      LayerSpec l;
      l.kind = kind_from_name(lj.at("kind").get<std::string>());
      l.name = lj.value("name", std::string{});
      switch (l.kind) {
        case LayerKind::Conv:
          l.filters = lj.at("filters").get<int>();
          l.kernel = lj.at("kernel").get<int>();
          l.stride = lj.value("stride", 1);
          l.pad = lj.value("pad", (l.kernel - 1) / 2);
          break;
        case LayerKind::Pool: {
          const std::string pk = lj.value("pool", std::string("max"));
          if (pk != "max" && pk != "mean") throw DataError("unknown pool kind '" + pk + "'");
          l.pool = pk == "max" ? PoolKind::Max : PoolKind::Mean;
          l.kernel = lj.value("size", 3);
          l.stride = lj.value("stride", 2);
          l.pad = lj.value("pad", 0);
          break;
        }
        case LayerKind::FullyConnected: l.units = lj.at("units").get<int>(); break;
        case LayerKind::Sigmoid: l.sharpness = lj.at("sharpness").get<double>(); break;
        default: break;
      }
      s.layers.push_back(l);
    }
    s.assign_names();
    s.shapes();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed net spec JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("inconsistent net spec: ") + e.what());
  }
}

namespace {

constexpr unsigned char kNetMagic[8] = {'P', 'C', 'N', 'E', 'T', 0, 0, 1};
constexpr std::uint32_t kNetVersion = 1;

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put_f64(std::vector<unsigned char>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> b) : bytes_(b) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const unsigned char> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("net file truncated");
  }
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> serialize_net(const NetModel& model) {
  model.validate();
  std::vector<unsigned char> out(std::begin(kNetMagic), std::end(kNetMagic));
  put_u32(out, kNetVersion);
  const std::string manifest = net_spec_to_json(model.spec).dump();
  put_u64(out, manifest.size());
  out.insert(out.end(), manifest.begin(), manifest.end());
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    if (!model.spec.layers[i].has_params()) continue;
    put_u64(out, model.params[i].weights.size());
    for (double v : model.params[i].weights) put_f64(out, v);
    put_u64(out, model.params[i].bias.size());
    for (double v : model.params[i].bias) put_f64(out, v);
  }
  put_u64(out, model.training_log.size());
  for (const auto& e : model.training_log) {
    put_u64(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(e.epoch)));
    put_f64(out, e.lr);
    put_f64(out, e.mean_loss);
  }
  return out;
}

NetModel deserialize_net(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  const auto magic = r.take(8);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kNetMagic))) throw DataError("not a pedcascade net file");
  if (r.u32() != kNetVersion) throw DataError("unsupported net file version");
  const auto mlen = r.u64();
  const auto mbytes = r.take(static_cast<std::size_t>(mlen));
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mbytes.begin(), mbytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("net manifest: ") + e.what());
  }
  NetModel m = zero_net(net_spec_from_json(manifest));
  for (std::size_t i = 0; i < m.spec.layers.size(); ++i) {
    if (!m.spec.layers[i].has_params()) continue;
    const auto nw = r.u64();
    if (nw != m.params[i].weights.size()) throw DataError("net file weight count mismatch");
    for (double& v : m.params[i].weights) v = r.f64();
    const auto nb = r.u64();
    if (nb != m.params[i].bias.size()) throw DataError("net file bias count mismatch");
    for (double& v : m.params[i].bias) v = r.f64();
  }
  const auto nlog = r.u64();
  for (std::uint64_t k = 0; k < nlog; ++k) {
    TrainLogEntry e;
    e.epoch = static_cast<int>(static_cast<std::int64_t>(r.u64()));
    e.lr = r.f64();
    e.mean_loss = r.f64();
    m.training_log.push_back(e);
  }
  if (!r.done()) throw DataError("trailing bytes in net file");
  return m;
}

void save_net(const std::filesystem::path& path, const NetModel& model) {
  const auto bytes = serialize_net(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

NetModel load_net(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open net file");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_net(bytes);
}

std::string training_log_csv(const NetModel& model) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,lr,mean_loss\n";
  for (const auto& e : model.training_log) out << e.epoch << ',' << e.lr << ',' << e.mean_loss << '\n';
  return out.str();
}

}  // namespace pedcascade
