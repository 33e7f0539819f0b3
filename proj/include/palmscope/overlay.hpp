// Report overlays: box outlines, stamped numbers, side-by-side panels.
#pragma once

#include "palmscope/geometry.hpp"
#include "palmscope/image.hpp"

#include <array>
#include <cstdint>

namespace palmscope {

namespace detail {

// 3x5 digit glyphs, one 3-bit row per entry, most significant bit left.
inline constexpr std::array<std::array<std::uint8_t, 5>, 10> kDigitRows{{
    {0b111, 0b101, 0b101, 0b101, 0b111},  // 0
    {0b010, 0b110, 0b010, 0b010, 0b111},  // 1
    {0b111, 0b001, 0b111, 0b100, 0b111},  // 2
    {0b111, 0b001, 0b111, 0b001, 0b111},  // 3
    {0b101, 0b101, 0b111, 0b001, 0b001},  // 4
    {0b111, 0b100, 0b111, 0b001, 0b111},  // 5
    {0b111, 0b100, 0b111, 0b101, 0b111},  // 6
    {0b111, 0b001, 0b001, 0b010, 0b010},  // 7
    {0b111, 0b101, 0b111, 0b101, 0b111},  // 8
    {0b111, 0b101, 0b111, 0b001, 0b111},  // 9
}};

inline void set_clipped(ImageBuffer& img, int x, int y, Rgb color) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  img.set(x, y, color);
}

}  // namespace detail

inline void draw_box_outline(ImageBuffer& img, const Box& box, Rgb color,
                             int thickness = 1) {
  const int x0 = static_cast<int>(std::floor(box.x_min));
  const int y0 = static_cast<int>(std::floor(box.y_min));
  const int x1 = static_cast<int>(std::ceil(box.x_max)) - 1;
  const int y1 = static_cast<int>(std::ceil(box.y_max)) - 1;
  for (int t = 0; t < thickness; ++t) {
    for (int x = x0 - t; x <= x1 + t; ++x) {
      detail::set_clipped(img, x, y0 - t, color);
      detail::set_clipped(img, x, y1 + t, color);
    }
    for (int y = y0 - t; y <= y1 + t; ++y) {
      detail::set_clipped(img, x0 - t, y, color);
      detail::set_clipped(img, x1 + t, y, color);
    }
  }
}

/// Stamp a non-negative number at (x, y) using the 3x5 glyphs.
inline void draw_number(ImageBuffer& img, int x, int y, long value, Rgb color,
                        int scale = 2) {
  if (value < 0) value = 0;
  const std::string digits = std::to_string(value);
  int cursor = x;
  for (char ch : digits) {
    const auto& rows = detail::kDigitRows[ch - '0'];
    for (int ry = 0; ry < 5; ++ry)
      for (int rx = 0; rx < 3; ++rx)
        if (rows[ry] & (0b100 >> rx))
          for (int sy = 0; sy < scale; ++sy)
            for (int sx = 0; sx < scale; ++sx)
              detail::set_clipped(img, cursor + rx * scale + sx,
                                  y + ry * scale + sy, color);
    cursor += 4 * scale;  // glyph width plus one column of spacing
  }
}

/// Place two equal-height images side by side.
inline ImageBuffer hstack(const ImageBuffer& left, const ImageBuffer& right) {
  if (left.height != right.height)
    throw Error("hstack: images must share a height");
  ImageBuffer out(left.width + right.width, left.height);
  for (int y = 0; y < left.height; ++y) {
    for (int x = 0; x < left.width; ++x) out.set(x, y, left.at(x, y));
    for (int x = 0; x < right.width; ++x)
      out.set(left.width + x, y, right.at(x, y));
  }
  return out;
}

}  // namespace palmscope
