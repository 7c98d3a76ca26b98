#include "pedcascade/image.hpp"

#include "pedcascade/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace pedcascade {

Image::Image(int w, int h, int p, double fill) : width(w), height(h), planes(p) {
  if (w <= 0 || h <= 0 || (p != 1 && p != 3)) {
    throw std::invalid_argument("image dimensions must be positive with 1 or 3 planes");
  }
  data.assign(static_cast<std::size_t>(w) * h * p, fill);
}

double Image::clamped(int x, int y, int p) const {
  x = std::clamp(x, 0, width - 1);
  y = std::clamp(y, 0, height - 1);
  return at(x, y, p);
}

double Image::bilinear(double x, double y, int p) const {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double ax = x - fx;
  const double ay = y - fy;
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double v00 = clamped(x0, y0, p);
  if (ax == 0.0 && ay == 0.0) return v00;
  const double v10 = clamped(x0 + 1, y0, p);
  const double v01 = clamped(x0, y0 + 1, p);
  const double v11 = clamped(x0 + 1, y0 + 1, p);
  const double top = v00 + ax * (v10 - v00);
  const double bottom = v01 + ax * (v11 - v01);
  return top + ay * (bottom - top);
}

void Image::validate() const {
  if (width <= 0 || height <= 0 || (planes != 1 && planes != 3)) {
    throw std::invalid_argument("image dimensions must be positive with 1 or 3 planes");
  }
  if (data.size() != static_cast<std::size_t>(width) * height * planes) {
    throw std::invalid_argument("image data length does not match width*height*planes");
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw std::invalid_argument("image contains non-finite values");
  }
}

Image flip_horizontal(const Image& img) {
  Image out(img.width, img.height, img.planes);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int p = 0; p < img.planes; ++p) out.at(img.width - 1 - x, y, p) = img.at(x, y, p);
  return out;
}

Image pad_right_bottom(const Image& img, int extra_w, int extra_h, double fill) {
  Image out(img.width + extra_w, img.height + extra_h, img.planes, fill);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int p = 0; p < img.planes; ++p) out.at(x, y, p) = img.at(x, y, p);
  return out;
}

Image triangle_blur(const Image& img) {
  Image tmp(img.width, img.height, img.planes);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int p = 0; p < img.planes; ++p)
        tmp.at(x, y, p) =
            0.25 * img.clamped(x - 1, y, p) + 0.5 * img.at(x, y, p) + 0.25 * img.clamped(x + 1, y, p);
  Image out(img.width, img.height, img.planes);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int p = 0; p < img.planes; ++p)
        out.at(x, y, p) =
            0.25 * tmp.clamped(x, y - 1, p) + 0.5 * tmp.at(x, y, p) + 0.25 * tmp.clamped(x, y + 1, p);
  return out;
}

namespace {

int read_header_int(std::istream& in, const std::string& where) {
  // Skips whitespace and '#' comments between header tokens.
  for (;;) {
    const int c = in.peek();
    if (c == EOF) throw DataError(where + ": truncated PNM header");
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else {
      break;
    }
  }
  int value = 0;
  if (!(in >> value) || value <= 0) throw DataError(where + ": bad PNM header field");
  return value;
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(where + ": cannot open image");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw DataError(where + ": not a binary PGM/PPM file");
  }
  const int planes = magic[1] == '6' ? 3 : 1;
  const int w = read_header_int(in, where);
  const int h = read_header_int(in, where);
  const int maxval = read_header_int(in, where);
  if (maxval > 65535) throw DataError(where + ": maxval out of range");
  in.get();  // single whitespace before raster

  Image img(w, h, planes);
  const std::size_t n = img.data.size();
  const int bytes = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(n * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw DataError(where + ": truncated raster");
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bytes == 1 ? raw[i] : (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
    img.data[i] = static_cast<double>(v) / maxval;
  }
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
  img.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << (img.planes == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace pedcascade
