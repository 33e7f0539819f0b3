#include <catch2/catch_amalgamated.hpp>

#include "palmscope/imageio.hpp"

#include <cstdio>
#include <filesystem>
#include <unistd.h>
#include <random>

#include <jpeglib.h>
#include <png.h>

using namespace palmscope;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("palmscope_io_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

ImageBuffer random_image(int w, int h, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> channel(0, 255);
  ImageBuffer img(w, h);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(channel(rng));
  return img;
}

// Minimal writers for formats the library itself never emits, used to probe
// the loader's rejection and conversion paths.
void write_png_raw(const fs::path& p, int w, int h, int bit_depth,
                   int color_type, const std::vector<unsigned char>& bytes,
                   std::size_t row_bytes) {
  std::FILE* fp = std::fopen(p.string().c_str(), "wb");
  REQUIRE(fp != nullptr);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  REQUIRE(setjmp(png_jmpbuf(png)) == 0);
  png_init_io(png, fp);
  png_set_IHDR(png, info, w, h, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = const_cast<png_bytep>(bytes.data() + y * row_bytes);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

void write_jpeg(const fs::path& p, const ImageBuffer& img, int quality) {
  std::FILE* fp = std::fopen(p.string().c_str(), "wb");
  REQUIRE(fp != nullptr);
  jpeg_compress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, fp);
  cinfo.image_width = img.width;
  cinfo.image_height = img.height;
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(
        img.data.data() +
        static_cast<std::size_t>(cinfo.next_scanline) * img.width * 3);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(fp);
}

}  // namespace

TEST_CASE("PNG save/load round-trips RGB data exactly") {
  TempDir dir;
  const ImageBuffer img = random_image(37, 23, 5);
  const fs::path p = dir.path / "rt.png";
  save_png(img, p);
  CHECK(load_image(p) == img);
}

TEST_CASE("mask PNG round-trip preserves {0,1} values") {
  TempDir dir;
  std::mt19937 rng(9);
  BinaryMask mask(19, 31);
  for (auto& v : mask.data) v = rng() & 1;
  const fs::path p = dir.path / "mask.png";
  save_mask_png(mask, p);
  CHECK(load_mask_png(p) == mask);
}

TEST_CASE("alpha channels are dropped at load time") {
  TempDir dir;
  const int w = 4, h = 3;
  std::vector<unsigned char> rgba(static_cast<std::size_t>(w) * h * 4);
  for (std::size_t i = 0; i < rgba.size(); i += 4) {
    rgba[i] = 10;
    rgba[i + 1] = 20;
    rgba[i + 2] = 30;
    rgba[i + 3] = 99;  // arbitrary alpha
  }
  const fs::path p = dir.path / "rgba.png";
  write_png_raw(p, w, h, 8, PNG_COLOR_TYPE_RGB_ALPHA, rgba, w * 4);
  const ImageBuffer img = load_image(p);
  CHECK(img.width == w);
  CHECK(img.height == h);
  CHECK(img.at(1, 1) == Rgb{10, 20, 30});
}

TEST_CASE("16-bit PNG input is rejected") {
  TempDir dir;
  const int w = 2, h = 2;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * 6, 0x40);
  const fs::path p = dir.path / "deep.png";
  write_png_raw(p, w, h, 16, PNG_COLOR_TYPE_RGB, bytes, w * 6);
  CHECK_THROWS_AS(load_image(p), Error);
}

TEST_CASE("grayscale PNG expands to three channels") {
  TempDir dir;
  GrayImage gray(5, 4);
  for (std::size_t i = 0; i < gray.data.size(); ++i)
    gray.data[i] = static_cast<std::uint8_t>(i * 11);
  const fs::path p = dir.path / "gray.png";
  save_png(gray, p);
  const ImageBuffer img = load_image(p);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) {
      const Rgb c = img.at(x, y);
      CHECK(c.r == gray.at(x, y));
      CHECK(c.g == gray.at(x, y));
      CHECK(c.b == gray.at(x, y));
    }
}

TEST_CASE("JPEG input decodes through the same loader") {
  TempDir dir;
  ImageBuffer img(16, 16, {120, 180, 60});
  const fs::path p = dir.path / "leaf.jpg";
  write_jpeg(p, img, 95);
  const ImageBuffer back = load_image(p);
  REQUIRE(back.width == 16);
  REQUIRE(back.height == 16);
  // Constant-color blocks survive compression nearly exactly.
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(static_cast<int>(back.data[i]) - static_cast<int>(img.data[i])) <= 3);
}

TEST_CASE("unknown container is refused") {
  TempDir dir;
  const fs::path p = dir.path / "not_an_image.bin";
  std::FILE* fp = std::fopen(p.string().c_str(), "wb");
  std::fputs("plain text, no raster here", fp);
  std::fclose(fp);
  CHECK_THROWS_AS(load_image(p), Error);
  CHECK_THROWS_AS(load_image(dir.path / "missing.png"), Error);
}
