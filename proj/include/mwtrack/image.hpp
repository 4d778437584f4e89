#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mwtrack/error.hpp"

namespace mwtrack {

/// 8-bit grayscale image, row-major.
struct GrayFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayFrame() = default;
  GrayFrame(int w, int h, std::uint8_t fill = 0) : width(w), height(h), pixels(std::size_t(w) * std::size_t(h), fill) {
    require(w > 0 && h > 0, ErrorKind::invalid_input, "frame dimensions must be positive");
  }

  std::uint8_t at(int x, int y) const { return pixels[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
  std::uint8_t& at(int x, int y) { return pixels[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }

  bool operator==(const GrayFrame&) const = default;
};

namespace detail {

inline std::string pgm_token(std::istream& in) {
  std::string tok;
  int ch = 0;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(char(ch));
  }
  return tok;
}

}  // namespace detail

/// Reads a binary (P5) 8-bit PGM.
inline GrayFrame read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  if (detail::pgm_token(in) != "P5") fail(ErrorKind::io, path.string() + ": not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(detail::pgm_token(in));
    h = std::stoi(detail::pgm_token(in));
    maxval = std::stoi(detail::pgm_token(in));
  } catch (const std::exception&) {
    fail(ErrorKind::io, path.string() + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0) fail(ErrorKind::io, path.string() + ": bad PGM dimensions");
  if (maxval <= 0 || maxval > 255) fail(ErrorKind::io, path.string() + ": only 8-bit PGM is supported");
  GrayFrame frame(w, h);
  in.read(reinterpret_cast<char*>(frame.pixels.data()), std::streamsize(frame.pixels.size()));
  if (in.gcount() != std::streamsize(frame.pixels.size())) fail(ErrorKind::io, path.string() + ": truncated PGM");
  return frame;
}

inline void write_pgm(const std::filesystem::path& path, const GrayFrame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << "P5\n" << frame.width << ' ' << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.pixels.data()), std::streamsize(frame.pixels.size()));
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

}  // namespace mwtrack
