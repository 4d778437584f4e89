#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "mwtrack/error.hpp"
#include "mwtrack/eval.hpp"
#include "mwtrack/sequence.hpp"

namespace mwtrack {

inline constexpr std::string_view kResultsHeader = "frame,x,y,w,h,score";

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline bool parse_int(std::string_view s, std::int64_t& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

inline bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

/// Parses "x,y,w,h".
inline Box parse_box(std::string_view text) {
  const auto f = split_commas(text);
  Box b;
  if (f.size() != 4 || !parse_double(f[0], b.x) || !parse_double(f[1], b.y) || !parse_double(f[2], b.w) ||
      !parse_double(f[3], b.h))
    fail(ErrorKind::invalid_input, "expected x,y,w,h but got '" + std::string(text) + "'");
  if (!b.valid()) fail(ErrorKind::invalid_input, "box must have positive width and height");
  return b;
}

inline void write_results(std::ostream& out, std::span<const ResultRow> rows) {
  out << kResultsHeader << '\n';
  for (const ResultRow& r : rows)
    out << r.frame << ',' << format_double(r.x) << ',' << format_double(r.y) << ',' << format_double(r.w) << ','
        << format_double(r.h) << ',' << format_double(r.score) << '\n';
}

inline void write_results(const std::filesystem::path& path, std::span<const ResultRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  write_results(out, rows);
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

inline std::vector<ResultRow> read_results(std::istream& in, const std::string& name = "results") {
  std::vector<ResultRow> rows;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) fail(ErrorKind::io, name + ": empty results file");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) fail(ErrorKind::io, name + ":1: unexpected header '" + line + "'");
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const auto f = split_commas(line);
    ResultRow r;
    if (f.size() != 6 || !parse_int(f[0], r.frame) || !parse_double(f[1], r.x) || !parse_double(f[2], r.y) ||
        !parse_double(f[3], r.w) || !parse_double(f[4], r.h) || !parse_double(f[5], r.score))
      fail(ErrorKind::io, name + ":" + std::to_string(lineno) + ": malformed results row");
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<ResultRow> read_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  return read_results(in, path.string());
}

/// Ground truth: one "frame,x,y,w,h" line per frame, 1-based frame numbers.
inline std::vector<std::pair<std::int64_t, Box>> read_ground_truth(std::istream& in, const std::string& name = "gt") {
  std::vector<std::pair<std::int64_t, Box>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line) || line.front() == '#') continue;
    const auto f = split_commas(line);
    std::int64_t frame = 0;
    Box b;
    if (f.size() != 5 || !parse_int(f[0], frame) || !parse_double(f[1], b.x) || !parse_double(f[2], b.y) ||
        !parse_double(f[3], b.w) || !parse_double(f[4], b.h) || frame < 1 || !b.valid())
      fail(ErrorKind::io, name + ":" + std::to_string(lineno) + ": malformed ground-truth row");
    rows.emplace_back(frame, b);
  }
  return rows;
}

inline std::vector<std::pair<std::int64_t, Box>> read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  return read_ground_truth(in, path.string());
}

inline void write_ground_truth(const std::filesystem::path& path, std::span<const Box> boxes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  for (std::size_t k = 0; k < boxes.size(); ++k)
    out << (k + 1) << ',' << format_double(boxes[k].x) << ',' << format_double(boxes[k].y) << ','
        << format_double(boxes[k].w) << ',' << format_double(boxes[k].h) << '\n';
}

struct FrameFile {
  std::int64_t number = 0;
  std::filesystem::path path;
};

/**
 * Lists the .pgm/.png files in `dir` whose stems end in digits, ordered by
 * that number. Numbering must be contiguous; a gap aborts with the id of the
 * first missing frame.
 */
inline std::vector<FrameFile> list_frames(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(ErrorKind::io, "frame directory not found: " + dir.string());
  std::vector<FrameFile> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    if (ext != ".pgm" && ext != ".png") continue;
    const std::string stem = entry.path().stem().string();
    std::size_t k = stem.size();
    while (k > 0 && std::isdigit(static_cast<unsigned char>(stem[k - 1]))) --k;
    std::int64_t number = 0;
    if (k == stem.size() || !parse_int(std::string_view(stem).substr(k), number)) continue;
    frames.push_back({number, entry.path()});
  }
  if (frames.empty()) fail(ErrorKind::io, "no numbered .pgm/.png frames in " + dir.string());
  std::sort(frames.begin(), frames.end(), [](const FrameFile& a, const FrameFile& b) { return a.number < b.number; });
  for (std::size_t k = 1; k < frames.size(); ++k) {
    if (frames[k].number == frames[k - 1].number)
      fail(ErrorKind::io, "duplicate frame " + std::to_string(frames[k].number) + " in " + dir.string());
    if (frames[k].number != frames[k - 1].number + 1)
      fail(ErrorKind::io, "missing frame " + std::to_string(frames[k - 1].number + 1) + " in " + dir.string());
  }
  return frames;
}

}  // namespace mwtrack
