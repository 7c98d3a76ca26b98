#include "pedcascade/channels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pedcascade {

std::string_view to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::RGB: return "RGB";
    case ChannelKind::LUV: return "LUV";
    case ChannelKind::G_LUV: return "G_LUV";
    case ChannelKind::HOG_L: return "HOG_L";
    case ChannelKind::HOG_LUV: return "HOG_LUV";
  }
  return "?";
}

std::optional<ChannelKind> parse_channel_kind(std::string_view name) {
  for (ChannelKind k : {ChannelKind::RGB, ChannelKind::LUV, ChannelKind::G_LUV, ChannelKind::HOG_L,
                        ChannelKind::HOG_LUV}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

int channel_count(const ChannelConfig& cfg) {
  switch (cfg.kind) {
    case ChannelKind::RGB:
    case ChannelKind::LUV: return 3;
    case ChannelKind::G_LUV: return 4;
    case ChannelKind::HOG_L: return cfg.orientation_bins + 1;
    case ChannelKind::HOG_LUV: return cfg.orientation_bins + 4;
  }
  return 0;
}

bool needs_color(ChannelKind kind) { return kind != ChannelKind::HOG_L; }

ChannelStack::ChannelStack(int width, int height, std::vector<std::vector<double>> channels)
    : width_(width), height_(height), channels_(std::move(channels)) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("channel stack dimensions must be positive");
  const std::size_t n = static_cast<std::size_t>(width) * height;
  const std::size_t stride = static_cast<std::size_t>(width) + 1;
  integrals_.reserve(channels_.size());
  for (const auto& ch : channels_) {
    if (ch.size() != n) throw std::invalid_argument("channel plane size mismatch");
    std::vector<double> I(stride * (static_cast<std::size_t>(height) + 1), 0.0);
    for (int y = 0; y < height; ++y) {
      double row = 0.0;
      for (int x = 0; x < width; ++x) {
        row += ch[static_cast<std::size_t>(y) * width + x];
        I[(y + 1) * stride + x + 1] = I[y * stride + x + 1] + row;
      }
    }
    integrals_.push_back(std::move(I));
  }
}

Luv rgb_to_luv(double r, double g, double b) {
  const double X = 0.412453 * r + 0.357580 * g + 0.180423 * b;
  const double Y = 0.212671 * r + 0.715160 * g + 0.072169 * b;
  const double Z = 0.019334 * r + 0.119193 * g + 0.950227 * b;
  constexpr double eps = 216.0 / 24389.0;
  constexpr double kappa = 24389.0 / 27.0;
  const double L = Y > eps ? 116.0 * std::cbrt(Y) - 16.0 : kappa * Y;
  // D65 white point chromaticity.
  constexpr double un = 0.19783000664283;
  constexpr double vn = 0.46831999493879;
  const double denom = X + 15.0 * Y + 3.0 * Z;
  double u = 0.0;
  double v = 0.0;
  if (denom > 0.0) {
    u = 13.0 * L * (4.0 * X / denom - un);
    v = 13.0 * L * (9.0 * Y / denom - vn);
  }
  return {std::clamp(L / 100.0, 0.0, 1.0), std::clamp((u + 134.0) / 354.0, 0.0, 1.0),
          std::clamp((v + 140.0) / 262.0, 0.0, 1.0)};
}

namespace {

struct Gradients {
  std::vector<double> magnitude;
  std::vector<int> bin;
};

Gradients luminance_gradients(const std::vector<double>& lum, int w, int h, int bins) {
  Gradients g;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  g.magnitude.resize(n);
  g.bin.resize(n);
  auto L = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return lum[static_cast<std::size_t>(y) * w + x];
  };
  constexpr double pi = std::numbers::pi;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (L(x + 1, y) - L(x - 1, y));
      const double gy = 0.5 * (L(x, y + 1) - L(x, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      g.magnitude[i] = std::sqrt(gx * gx + gy * gy);
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += pi;
      if (theta >= pi) theta -= pi;
      g.bin[i] = std::min(bins - 1, static_cast<int>(theta * bins / pi));
    }
  }
  return g;
}

}  // namespace

ChannelStack compute_channels(const Image& input, const ChannelConfig& cfg) {
  input.validate();
  if (cfg.orientation_bins < 1) throw std::invalid_argument("orientation_bins must be >= 1");
  if (needs_color(cfg.kind) && input.planes != 3) {
    throw std::invalid_argument("channel kind " + std::string(to_string(cfg.kind)) +
                                " requires a 3-plane image");
  }
  const Image img = cfg.pre_blur ? triangle_blur(input) : input;
  const int w = img.width;
  const int h = img.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;

  std::vector<std::vector<double>> out;
  if (cfg.kind == ChannelKind::RGB) {
    for (int p = 0; p < 3; ++p) {
      std::vector<double> ch(n);
      for (std::size_t i = 0; i < n; ++i) ch[i] = img.data[i * 3 + p];
      out.push_back(std::move(ch));
    }
    return ChannelStack(w, h, std::move(out));
  }

  std::vector<double> L(n), U(n), V(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = img.data[i * img.planes];
    const double g = img.planes == 3 ? img.data[i * 3 + 1] : r;
    const double b = img.planes == 3 ? img.data[i * 3 + 2] : r;
    const Luv luv = rgb_to_luv(r, g, b);
    L[i] = luv.l;
    U[i] = luv.u;
    V[i] = luv.v;
  }
  if (cfg.kind == ChannelKind::LUV) {
    out = {std::move(L), std::move(U), std::move(V)};
    return ChannelStack(w, h, std::move(out));
  }

  Gradients grad = luminance_gradients(L, w, h, cfg.orientation_bins);
  const bool with_g = cfg.kind == ChannelKind::G_LUV || cfg.kind == ChannelKind::HOG_LUV;
  const bool with_bins = cfg.kind == ChannelKind::HOG_L || cfg.kind == ChannelKind::HOG_LUV;
  if (with_g) out.push_back(grad.magnitude);
  if (with_bins) {
    for (int b = 0; b < cfg.orientation_bins; ++b) {
      std::vector<double> ch(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (grad.bin[i] == b) ch[i] = grad.magnitude[i];
      }
      out.push_back(std::move(ch));
    }
  }
  out.push_back(std::move(L));
  if (cfg.kind != ChannelKind::HOG_L) {
    out.push_back(std::move(U));
    out.push_back(std::move(V));
  }
  return ChannelStack(w, h, std::move(out));
}

double rect_sum(const ChannelStack& stack, int channel, const Box& r) {
  if (!r.valid()) throw std::invalid_argument("rect_sum: invalid box");
  if (r.x != std::floor(r.x) || r.y != std::floor(r.y) || r.w != std::floor(r.w) || r.h != std::floor(r.h)) {
    throw std::invalid_argument("rect_sum: box is not integer aligned");
  }
  if (channel < 0 || channel >= stack.size()) throw std::out_of_range("rect_sum: channel index");
  if (r.x < 0 || r.y < 0 || r.right() > stack.width() || r.bottom() > stack.height()) {
    throw std::out_of_range("rect_sum: box outside the image");
  }
  const int x0 = static_cast<int>(r.x);
  const int y0 = static_cast<int>(r.y);
  return stack.block_sum(channel, x0, y0, x0 + static_cast<int>(r.w), y0 + static_cast<int>(r.h));
}

}  // namespace pedcascade
