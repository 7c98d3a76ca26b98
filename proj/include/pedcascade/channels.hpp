#pragma once

#include "pedcascade/geometry.hpp"
#include "pedcascade/image.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pedcascade {

enum class ChannelKind { RGB, LUV, G_LUV, HOG_L, HOG_LUV };

std::string_view to_string(ChannelKind kind);
std::optional<ChannelKind> parse_channel_kind(std::string_view name);

/// Channel layout per kind (with the default 6 orientation bins):
///   RGB      R G B                       (3)
///   LUV      L U V                       (3)
///   G_LUV    G L U V                     (4)
///   HOG_L    O0..O5 L                    (7)
///   HOG_LUV  G O0..O5 L U V              (10)
/// G is the luminance gradient magnitude, Ok the hard-binned orientation channels.
struct ChannelConfig {
  ChannelKind kind = ChannelKind::HOG_LUV;
  int orientation_bins = 6;
  bool pre_blur = false;  // [1 2 1] triangle blur of the input image

  friend bool operator==(const ChannelConfig&, const ChannelConfig&) = default;
};

int channel_count(const ChannelConfig& cfg);
bool needs_color(ChannelKind kind);

/// Immutable channel planes plus (w+1)x(h+1) integral images.
class ChannelStack {
 public:
  ChannelStack() = default;
  /// Takes ownership of width*height planes and builds their integral images.
  ChannelStack(int width, int height, std::vector<std::vector<double>> channels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int size() const noexcept { return static_cast<int>(channels_.size()); }

  double value(int c, int x, int y) const { return channels_[c][static_cast<std::size_t>(y) * width_ + x]; }
  const std::vector<double>& channel(int c) const { return channels_.at(c); }

  /// Integral image entry: sum over [0, x) x [0, y).
  double integral(int c, int x, int y) const {
    return integrals_[c][static_cast<std::size_t>(y) * (width_ + 1) + x];
  }
  const std::vector<double>& integral_plane(int c) const { return integrals_.at(c); }

  /// Sum over [x0, x1) x [y0, y1) from four integral reads; no bounds checks.
  double block_sum(int c, int x0, int y0, int x1, int y1) const {
    const double* I = integrals_[c].data();
    const std::size_t stride = static_cast<std::size_t>(width_) + 1;
    return I[y1 * stride + x1] - I[y0 * stride + x1] - I[y1 * stride + x0] + I[y0 * stride + x0];
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::vector<double>> channels_;
  std::vector<std::vector<double>> integrals_;
};

/// CIE L*u*v* from linear RGB in [0, 1] (D65), rescaled to [0, 1]:
/// L/100, (u+134)/354, (v+140)/262, clamped.
struct Luv {
  double l, u, v;
};
Luv rgb_to_luv(double r, double g, double b);

/// Computes the channel stack for `img`. Throws std::invalid_argument on a
/// grayscale image with a colour kind or malformed image data.
ChannelStack compute_channels(const Image& img, const ChannelConfig& cfg);

/// Sum of a channel over an integer-aligned box. Throws std::invalid_argument
/// for invalid or non-integer boxes and std::out_of_range outside the image.
double rect_sum(const ChannelStack& stack, int channel, const Box& r);

}  // namespace pedcascade
