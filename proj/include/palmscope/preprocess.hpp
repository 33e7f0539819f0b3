// Input conditioning: bilinear resize, [0,1] normalization, and the affine
// augmentation family (rotate / shear / flip / zoom) with nearest-edge fill.
#pragma once

#include "palmscope/image.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace palmscope {

/// 3-channel float raster produced by normalize_pixels.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // width * height * 3, values in [0,1]
};

namespace detail {

inline Rgb sample_bilinear(const ImageBuffer& img, double sx, double sy) {
  sx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = sx - x0;
  const double fy = sy - y0;

  const Rgb p00 = img.at(x0, y0), p10 = img.at(x1, y0);
  const Rgb p01 = img.at(x0, y1), p11 = img.at(x1, y1);
  auto mix = [&](double a, double b, double c, double d) {
    const double top = a + (b - a) * fx;
    const double bot = c + (d - c) * fx;
    return clamp_u8(round_half_away(top + (bot - top) * fy));
  };
  return {mix(p00.r, p10.r, p01.r, p11.r), mix(p00.g, p10.g, p01.g, p11.g),
          mix(p00.b, p10.b, p01.b, p11.b)};
}

}  // namespace detail

/// Bilinear resize over source pixel centers. A same-size resize is an
/// exact copy.
inline ImageBuffer resize_image(const ImageBuffer& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1)
    throw Error("resize_image: target dimensions must be >= 1");
  ImageBuffer out(out_w, out_h);
  const double scale_x = static_cast<double>(img.width) / out_w;
  const double scale_y = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double sy = (y + 0.5) * scale_y - 0.5;
    for (int x = 0; x < out_w; ++x) {
      const double sx = (x + 0.5) * scale_x - 0.5;
      out.set(x, y, detail::sample_bilinear(img, sx, sy));
    }
  }
  return out;
}

/// Scale every channel to [0,1] by dividing by 255.
inline FloatImage normalize_pixels(const ImageBuffer& img) {
  FloatImage out{img.width, img.height, {}};
  out.data.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = static_cast<float>(img.data[i]) / 255.0f;
  return out;
}

struct AugmentOp {
  enum class Kind { Rotate, ShearH, ShearV, FlipH, FlipV, Zoom };
  Kind kind;
  double value = 0.0;  // degrees for Rotate, factor for Shear/Zoom

  static AugmentOp rotate(double degrees) { return {Kind::Rotate, degrees}; }
  static AugmentOp shear_h(double k) { return {Kind::ShearH, k}; }
  static AugmentOp shear_v(double k) { return {Kind::ShearV, k}; }
  static AugmentOp flip_h() { return {Kind::FlipH, 0.0}; }
  static AugmentOp flip_v() { return {Kind::FlipV, 0.0}; }
  static AugmentOp zoom(double factor) { return {Kind::Zoom, factor}; }
};

using AugmentSpec = std::vector<AugmentOp>;

namespace detail {

using Mat2 = std::array<double, 4>;  // row-major 2x2

inline Mat2 mat_mul(const Mat2& a, const Mat2& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
          a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

// Linear part of one op. Right-angle rotations get exact {0,+-1} entries so
// they compose into pure index permutations.
inline Mat2 op_matrix(const AugmentOp& op) {
  switch (op.kind) {
    case AugmentOp::Kind::Rotate: {
      double th = std::fmod(op.value, 360.0);
      if (th < 0) th += 360.0;
      if (th == 0.0) return {1, 0, 0, 1};
      if (th == 90.0) return {0, -1, 1, 0};
      if (th == 180.0) return {-1, 0, 0, -1};
      if (th == 270.0) return {0, 1, -1, 0};
      const double rad = th * M_PI / 180.0;
      const double c = std::cos(rad), s = std::sin(rad);
      return {c, -s, s, c};
    }
    case AugmentOp::Kind::ShearH:
      return {1, op.value, 0, 1};
    case AugmentOp::Kind::ShearV:
      return {1, 0, op.value, 1};
    case AugmentOp::Kind::FlipH:
      return {-1, 0, 0, 1};
    case AugmentOp::Kind::FlipV:
      return {1, 0, 0, -1};
    case AugmentOp::Kind::Zoom:
      if (op.value <= 0.0) throw Error("augment: zoom factor must be > 0");
      return {op.value, 0, 0, op.value};
  }
  throw Error("augment: unknown op");
}

inline bool is_exact_integer(double v) { return v == std::rint(v); }

}  // namespace detail

/// Apply the composed affine transform about the image center with bilinear
/// sampling and nearest-edge fill. Output dimensions equal input dimensions.
/// When the composed transform maps the pixel grid onto itself (flips and
/// right-angle rotations) the result is an exact index permutation.
inline ImageBuffer augment_image(const ImageBuffer& img, const AugmentSpec& spec) {
  detail::Mat2 fwd{1, 0, 0, 1};
  for (const AugmentOp& op : spec) fwd = detail::mat_mul(detail::op_matrix(op), fwd);

  const double det = fwd[0] * fwd[3] - fwd[1] * fwd[2];
  if (det == 0.0) throw Error("augment: transform is singular");
  const detail::Mat2 inv{fwd[3] / det, -fwd[1] / det, -fwd[2] / det,
                         fwd[0] / det};

  const double cx = (img.width - 1) / 2.0;
  const double cy = (img.height - 1) / 2.0;
  // Source of output pixel p is C + inv * (p - C).
  const double tx = cx - (inv[0] * cx + inv[1] * cy);
  const double ty = cy - (inv[2] * cx + inv[3] * cy);

  const bool exact = detail::is_exact_integer(inv[0]) &&
                     detail::is_exact_integer(inv[1]) &&
                     detail::is_exact_integer(inv[2]) &&
                     detail::is_exact_integer(inv[3]) &&
                     detail::is_exact_integer(tx) && detail::is_exact_integer(ty);

  ImageBuffer out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double sx = inv[0] * x + inv[1] * y + tx;
      const double sy = inv[2] * x + inv[3] * y + ty;
      if (exact) {
        const int ix = std::clamp(static_cast<int>(std::lrint(sx)), 0,
                                  img.width - 1);
        const int iy = std::clamp(static_cast<int>(std::lrint(sy)), 0,
                                  img.height - 1);
        out.set(x, y, img.at(ix, iy));
      } else {
        out.set(x, y, detail::sample_bilinear(img, sx, sy));
      }
    }
  }
  return out;
}

}  // namespace palmscope
