#pragma once

// Requires linking against libpng.

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mwtrack/error.hpp"
#include "mwtrack/image.hpp"

namespace mwtrack {

/// Reads an 8-bit grayscale PNG. Palette, RGB and 16-bit inputs are rejected.
inline GrayFrame read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) fail(ErrorKind::io, "cannot open " + path.string());

  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0)
    fail(ErrorKind::io, path.string() + ": not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) fail(ErrorKind::io, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(ErrorKind::io, "png_create_info_struct failed");
  }

  GrayFrame frame;
  std::string error;
  // libpng reports errors through longjmp; keep non-trivial objects out of
  // the jump path and translate to an exception afterwards.
  if (setjmp(png_jmpbuf(png))) {
    error = path.string() + ": corrupt PNG";
  } else {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth > 8) {
      error = path.string() + ": only 8-bit grayscale PNG is supported";
    } else {
      if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
      png_read_update_info(png, info);
      frame = GrayFrame(int(w), int(h));
      std::vector<png_bytep> rows(h);
      for (png_uint_32 y = 0; y < h; ++y) rows[y] = frame.pixels.data() + std::size_t(y) * w;
      png_read_image(png, rows.data());
      png_read_end(png, nullptr);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!error.empty()) fail(ErrorKind::io, error);
  return frame;
}

/// Writes an 8-bit grayscale PNG.
inline void write_png(const std::filesystem::path& path, const GrayFrame& frame) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) fail(ErrorKind::io, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png == nullptr ? nullptr : png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    fail(ErrorKind::io, "libpng initialisation failed");
  }
  bool ok = true;
  if (setjmp(png_jmpbuf(png))) {
    ok = false;
  } else {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, png_uint_32(frame.width), png_uint_32(frame.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < frame.height; ++y)
      png_write_row(png, const_cast<png_bytep>(frame.pixels.data() + std::size_t(y) * std::size_t(frame.width)));
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  if (!ok) fail(ErrorKind::io, "failed writing " + path.string());
}

/// Dispatches on extension: .pgm or .png.
inline GrayFrame read_frame(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm" || ext == ".PGM") return read_pgm(path);
  if (ext == ".png" || ext == ".PNG") return read_png(path);
  fail(ErrorKind::io, path.string() + ": unsupported frame format (expected .pgm or .png)");
}

}  // namespace mwtrack
