// Core raster types and color primitives shared by every stage of the
// pipeline. All operations here are pure functions of immutable inputs.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace palmscope {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rounding convention used wherever a real becomes a pixel value or a
// percentage: half away from zero.
inline long round_half_away(double v) { return std::lround(v); }

inline std::uint8_t clamp_u8(long v) {
  return static_cast<std::uint8_t>(std::clamp<long>(v, 0, 255));
}

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// 8-bit 3-channel raster, red-green-blue channel order, row-major.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // width * height * 3

  ImageBuffer() = default;
  ImageBuffer(int w, int h, Rgb fill = {0, 0, 0}) : width(w), height(h) {
    if (w < 1 || h < 1) throw Error("ImageBuffer: dimensions must be >= 1");
    data.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < data.size(); i += 3) {
      data[i] = fill.r;
      data[i + 1] = fill.g;
      data[i + 2] = fill.b;
    }
  }

  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * 3;
  }
  Rgb at(int x, int y) const {
    const std::size_t o = offset(x, y);
    return {data[o], data[o + 1], data[o + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t o = offset(x, y);
    data[o] = c.r;
    data[o + 1] = c.g;
    data[o + 2] = c.b;
  }
  bool same_size(int w, int h) const { return width == w && height == h; }
  bool operator==(const ImageBuffer&) const = default;
};

/// Single-channel 8-bit raster.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // width * height

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
    if (w < 1 || h < 1) throw Error("GrayImage: dimensions must be >= 1");
    data.assign(static_cast<std::size_t>(w) * h, fill);
  }

  std::uint8_t at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  void set(int x, int y, std::uint8_t v) {
    data[static_cast<std::size_t>(y) * width + x] = v;
  }
  bool operator==(const GrayImage&) const = default;
};

/// Per-pixel {0,1} raster. Pairs dimension-for-dimension with its source
/// image; callers that combine the two check that themselves.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // values in {0,1}

  BinaryMask() = default;
  BinaryMask(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
    if (w < 1 || h < 1) throw Error("BinaryMask: dimensions must be >= 1");
    if (fill > 1) throw Error("BinaryMask: fill must be 0 or 1");
    data.assign(static_cast<std::size_t>(w) * h, fill);
  }

  std::uint8_t at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  void set(int x, int y, std::uint8_t v) {
    data[static_cast<std::size_t>(y) * width + x] = v;
  }
  long count_set() const {
    long n = 0;
    for (auto v : data) n += v;
    return n;
  }
  bool operator==(const BinaryMask&) const = default;
};

/// Hue in degrees [0,360), saturation and value as fractions [0,1].
/// An achromatic pixel has h = 0 by convention.
struct HsvPixel {
  double h = 0.0;
  double s = 0.0;
  double v = 0.0;
};

struct HsvImage {
  int width = 0;
  int height = 0;
  std::vector<HsvPixel> data;
};

/// Inclusive HSV interval. When hue_wraps is set the hue interval crosses
/// 360 (e.g. [350, 10] accepts reds on both sides of zero).
struct HsvRange {
  HsvPixel low;
  HsvPixel up;
  bool hue_wraps = false;

  void validate() const {
    if (low.s > up.s || low.v > up.v)
      throw Error("HsvRange: low.s/low.v must not exceed up.s/up.v");
    if (!hue_wraps && low.h > up.h)
      throw Error("HsvRange: low.h > up.h without hue_wraps");
  }
};

/// Luminance per ITU-R BT.601 weights, rounded half away from zero.
inline GrayImage rgb_to_gray(const ImageBuffer& img) {
  GrayImage out(img.width, img.height);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = 0.299 * img.data[i * 3] + 0.587 * img.data[i * 3 + 1] +
                     0.114 * img.data[i * 3 + 2];
    out.data[i] = clamp_u8(round_half_away(y));
  }
  return out;
}

/// Hexcone conversion. s = 0 and h = 0 when the max channel is 0.
inline HsvPixel rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double rf = r, gf = g, bf = b;
  const double maxc = std::max({rf, gf, bf});
  const double minc = std::min({rf, gf, bf});
  const double delta = maxc - minc;

  HsvPixel out;
  out.v = maxc / 255.0;
  out.s = maxc == 0.0 ? 0.0 : delta / maxc;
  if (delta == 0.0) {
    out.h = 0.0;
    return out;
  }
  double h;
  if (maxc == rf)
    h = 60.0 * ((gf - bf) / delta);
  else if (maxc == gf)
    h = 60.0 * ((bf - rf) / delta + 2.0);
  else
    h = 60.0 * ((rf - gf) / delta + 4.0);
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

inline HsvPixel rgb_to_hsv(Rgb c) { return rgb_to_hsv(c.r, c.g, c.b); }

inline HsvImage to_hsv(const ImageBuffer& img) {
  HsvImage out{img.width, img.height, {}};
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  out.data.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.data[i] =
        rgb_to_hsv(img.data[i * 3], img.data[i * 3 + 1], img.data[i * 3 + 2]);
  return out;
}

inline bool hsv_in_range(const HsvPixel& p, const HsvRange& range) {
  if (p.s < range.low.s || p.s > range.up.s) return false;
  if (p.v < range.low.v || p.v > range.up.v) return false;
  if (range.hue_wraps) return p.h >= range.low.h || p.h <= range.up.h;
  return p.h >= range.low.h && p.h <= range.up.h;
}

/// Mask pixel = 1 iff h, s and v each lie inclusively within the range.
inline BinaryMask in_range(const HsvImage& img, const HsvRange& range) {
  range.validate();
  BinaryMask out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = hsv_in_range(img.data[i], range) ? 1 : 0;
  return out;
}

}  // namespace palmscope
