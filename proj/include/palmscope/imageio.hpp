// PNG and JPEG raster I/O. Loading drops any alpha channel and rejects
// 16-bit inputs; everything is normalized to the 8-bit RGB ImageBuffer.
#pragma once

#include "palmscope/image.hpp"

#include <csetjmp>
#include <cstdio>
#include <filesystem>

#include <jpeglib.h>
#include <png.h>

namespace palmscope {

namespace detail {

struct FileHandle {
  std::FILE* fp = nullptr;
  explicit FileHandle(const std::filesystem::path& p, const char* mode) {
    fp = std::fopen(p.string().c_str(), mode);
    if (!fp) throw Error("cannot open file: " + p.string());
  }
  ~FileHandle() {
    if (fp) std::fclose(fp);
  }
  FileHandle(const FileHandle&) = delete;
  FileHandle& operator=(const FileHandle&) = delete;
};

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(mgr->jump, 1);
}

}  // namespace detail

inline bool is_png_file(const std::filesystem::path& path) {
  detail::FileHandle f(path, "rb");
  unsigned char sig[8] = {};
  if (std::fread(sig, 1, 8, f.fp) != 8) return false;
  return png_sig_cmp(sig, 0, 8) == 0;
}

inline ImageBuffer load_png(const std::filesystem::path& path) {
  detail::FileHandle f(path, "rb");
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng: read struct allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng: info struct allocation failed");
  }

  ImageBuffer out;
  std::vector<png_bytep> rows;
  volatile bool failed = false;
  if (setjmp(png_jmpbuf(png))) {
    failed = true;
  } else {
    png_init_io(png, f.fp);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    if (bit_depth == 16) {
      png_destroy_read_struct(&png, &info, nullptr);
      throw Error("16-bit PNG rejected: " + path.string());
    }

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
      png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY ||
        color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
      png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    out = ImageBuffer(static_cast<int>(w), static_cast<int>(h));
    if (png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * 3) {
      png_destroy_read_struct(&png, &info, nullptr);
      throw Error("PNG decode produced unexpected row size: " + path.string());
    }
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
      rows[y] = out.data.data() + static_cast<std::size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (failed) throw Error("PNG decode failed: " + path.string());
  return out;
}

inline ImageBuffer load_jpeg(const std::filesystem::path& path) {
  detail::FileHandle f(path, "rb");
  jpeg_decompress_struct cinfo;
  detail::JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = detail::jpeg_error_exit;

  jpeg_create_decompress(&cinfo);
  ImageBuffer out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error("JPEG decode failed: " + path.string());
  }
  jpeg_stdio_src(&cinfo, f.fp);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;  // libjpeg converts grayscale/YCbCr
  jpeg_start_decompress(&cinfo);

  out = ImageBuffer(static_cast<int>(cinfo.output_width),
                    static_cast<int>(cinfo.output_height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.data.data() +
                   static_cast<std::size_t>(cinfo.output_scanline) *
                       cinfo.output_width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

/// Dispatch on file magic; PNG and JPEG are the only accepted containers.
inline ImageBuffer load_image(const std::filesystem::path& path) {
  detail::FileHandle probe(path, "rb");
  unsigned char sig[8] = {};
  const std::size_t n = std::fread(sig, 1, 8, probe.fp);
  if (n >= 8 && png_sig_cmp(sig, 0, 8) == 0) return load_png(path);
  if (n >= 2 && sig[0] == 0xFF && sig[1] == 0xD8) return load_jpeg(path);
  throw Error("unsupported image format (expect PNG or JPEG): " +
              path.string());
}

namespace detail {

inline void write_png_rows(const std::filesystem::path& path, int width,
                           int height, int color_type,
                           const std::vector<png_bytep>& rows) {
  FileHandle f(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  if (!png) throw Error("libpng: write struct allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng: info struct allocation failed");
  }
  volatile bool failed = false;
  if (setjmp(png_jmpbuf(png))) {
    failed = true;
  } else {
    png_init_io(png, f.fp);
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  if (failed) throw Error("PNG encode failed: " + path.string());
}

}  // namespace detail

inline void save_png(const ImageBuffer& img, const std::filesystem::path& path) {
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.data.data() +
                                    static_cast<std::size_t>(y) * img.width * 3);
  detail::write_png_rows(path, img.width, img.height, PNG_COLOR_TYPE_RGB, rows);
}

inline void save_png(const GrayImage& img, const std::filesystem::path& path) {
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.data.data() +
                                    static_cast<std::size_t>(y) * img.width);
  detail::write_png_rows(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, rows);
}

/// Masks are stored as 0/255 grayscale PNG so they are viewable directly.
inline void save_mask_png(const BinaryMask& mask,
                          const std::filesystem::path& path) {
  GrayImage g(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    g.data[i] = mask.data[i] ? 255 : 0;
  save_png(g, path);
}

/// Inverse of save_mask_png: any channel value >= 128 reads back as 1.
inline BinaryMask load_mask_png(const std::filesystem::path& path) {
  const ImageBuffer img = load_png(path);
  BinaryMask mask(img.width, img.height);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i)
    mask.data[i] = img.data[i * 3] >= 128 ? 1 : 0;
  return mask;
}

}  // namespace palmscope
