#pragma once

#include <filesystem>
#include <vector>

namespace pedcascade {

/// Row-major image with interleaved planes; values are nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int planes = 1;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int p, double fill = 0.0);

  double& at(int x, int y, int p = 0) { return data[(static_cast<std::size_t>(y) * width + x) * planes + p]; }
  double at(int x, int y, int p = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * planes + p];
  }

  /// Border-replicated read.
  double clamped(int x, int y, int p = 0) const;

  /// Bilinear sample at continuous pixel-center coordinates, border replicated.
  double bilinear(double x, double y, int p = 0) const;

  bool empty() const noexcept { return data.empty(); }

  /// Throws std::invalid_argument if dimensions/data size disagree or a value is not finite.
  void validate() const;

  friend bool operator==(const Image&, const Image&) = default;
};

Image flip_horizontal(const Image& img);

/// Copies img into a larger canvas filled with `fill` (top-left aligned).
Image pad_right_bottom(const Image& img, int extra_w, int extra_h, double fill);

/// Separable [1 2 1]/4 triangle filter, border replicated.
Image triangle_blur(const Image& img);

/// Binary PGM (1 plane) or PPM (3 planes), maxval 255 or 65535.
Image read_pnm(const std::filesystem::path& path);

/// Writes binary PGM/PPM with maxval 255; values are clamped to [0, 1] and
/// rounded to the nearest level.
void write_pnm(const std::filesystem::path& path, const Image& img);

}  // namespace pedcascade
