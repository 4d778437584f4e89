#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "mwtrack/error.hpp"
#include "mwtrack/eval.hpp"
#include "mwtrack/image.hpp"
#include "mwtrack/metric.hpp"

namespace mwtrack {

/// Canonical patch side length; patches are indexed (row = y, col = x).
inline constexpr int kPatchSize = 32;
inline constexpr int kOrientationBins = 9;
inline constexpr int kCellsPerSide = 3;
inline constexpr int kModes = 5;
inline constexpr int kHogDim = kModes * kCellsPerSide * kCellsPerSide * kOrientationBins;  // 405
inline constexpr int kRawDim = kPatchSize * kPatchSize;
inline constexpr double kNormFloor = 1e-6;

using Patch = Eigen::MatrixXd;

enum class FeatureMode { hog, raw };

inline int feature_dim(FeatureMode mode) { return mode == FeatureMode::hog ? kHogDim : kRawDim; }

inline FeatureMode parse_feature_mode(const std::string& s) {
  if (s == "hog") return FeatureMode::hog;
  if (s == "raw") return FeatureMode::raw;
  fail(ErrorKind::invalid_input, "unknown feature mode '" + s + "' (expected hog|raw)");
}

/// Bilinear sample of `box` onto a kPatchSize x kPatchSize grid. Sample
/// centers map pixel-center to pixel-center; coordinates outside the frame
/// clamp to the nearest edge.
inline Patch crop_and_resize(const GrayFrame& frame, const Box& box) {
  if (!(box.w > 0.0 && box.h > 0.0)) fail(ErrorKind::invalid_state, "zero-area box");
  const double sx = box.w / kPatchSize;
  const double sy = box.h / kPatchSize;
  const double max_x = frame.width - 1;
  const double max_y = frame.height - 1;
  Patch patch(kPatchSize, kPatchSize);
  std::array<int, kPatchSize> x0{}, x1{};
  std::array<double, kPatchSize> fx{};
  for (int j = 0; j < kPatchSize; ++j) {
    const double x = std::clamp(box.x + (j + 0.5) * sx - 0.5, 0.0, max_x);
    x0[j] = int(std::floor(x));
    x1[j] = std::min(x0[j] + 1, frame.width - 1);
    fx[j] = x - x0[j];
  }
  for (int i = 0; i < kPatchSize; ++i) {
    const double y = std::clamp(box.y + (i + 0.5) * sy - 0.5, 0.0, max_y);
    const int y0 = int(std::floor(y));
    const int y1 = std::min(y0 + 1, frame.height - 1);
    const double fy = y - y0;
    for (int j = 0; j < kPatchSize; ++j) {
      const double top = (1.0 - fx[j]) * frame.at(x0[j], y0) + fx[j] * frame.at(x1[j], y0);
      const double bottom = (1.0 - fx[j]) * frame.at(x0[j], y1) + fx[j] * frame.at(x1[j], y1);
      patch(i, j) = (1.0 - fy) * top + fy * bottom;
    }
  }
  return patch;
}

/// Gradient magnitude split between the two nearest unsigned-orientation
/// bins. Bin k is centered at k * 20 degrees; bin 8 wraps into bin 0.
struct OrientationVote {
  int bin_lo = 0;
  int bin_hi = 0;
  double w_lo = 0.0;
  double w_hi = 0.0;
};

inline OrientationVote orientation_vote(double gx, double gy) {
  OrientationVote v;
  const double mag = std::hypot(gx, gy);
  if (mag == 0.0) return v;
  double angle = std::atan2(gy, gx);
  if (angle < 0.0) angle += std::numbers::pi;
  if (angle >= std::numbers::pi) angle -= std::numbers::pi;
  const double pos = angle / (std::numbers::pi / kOrientationBins);
  const int lo = std::min(int(std::floor(pos)), kOrientationBins - 1);
  const double frac = std::clamp(pos - lo, 0.0, 1.0);
  v.bin_lo = lo;
  v.bin_hi = (lo + 1) % kOrientationBins;
  v.w_lo = mag * (1.0 - frac);
  v.w_hi = mag * frac;
  return v;
}

/// Per-pixel orientation histograms of an intensity image (central
/// differences, borders clamped), stored as one plane per bin.
inline std::array<Eigen::MatrixXd, kOrientationBins> binned_gradients(const Eigen::MatrixXd& image) {
  const auto rows = image.rows();
  const auto cols = image.cols();
  std::array<Eigen::MatrixXd, kOrientationBins> planes;
  for (auto& p : planes) p = Eigen::MatrixXd::Zero(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      const double gx = image(y, std::min(x + 1, cols - 1)) - image(y, std::max<Eigen::Index>(x - 1, 0));
      const double gy = image(std::min(y + 1, rows - 1), x) - image(std::max<Eigen::Index>(y - 1, 0), x);
      const OrientationVote v = orientation_vote(gx, gy);
      planes[std::size_t(v.bin_lo)](y, x) += v.w_lo;
      planes[std::size_t(v.bin_hi)](y, x) += v.w_hi;
    }
  }
  return planes;
}

inline Eigen::MatrixXd to_intensity(const GrayFrame& frame) {
  Eigen::MatrixXd img(frame.height, frame.width);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) img(y, x) = frame.at(x, y);
  return img;
}

/**
 * One summed-area table per orientation bin; any axis-aligned rectangle's
 * histogram is four lookups per bin.
 */
class IntegralHistogram {
 public:
  explicit IntegralHistogram(const Eigen::MatrixXd& image) {
    const auto planes = binned_gradients(image);
    rows_ = image.rows();
    cols_ = image.cols();
    for (int b = 0; b < kOrientationBins; ++b) {
      Eigen::MatrixXd& t = tables_[std::size_t(b)];
      t = Eigen::MatrixXd::Zero(rows_ + 1, cols_ + 1);
      const Eigen::MatrixXd& p = planes[std::size_t(b)];
      for (Eigen::Index y = 0; y < rows_; ++y) {
        double run = 0.0;
        for (Eigen::Index x = 0; x < cols_; ++x) {
          run += p(y, x);
          t(y + 1, x + 1) = t(y, x + 1) + run;
        }
      }
    }
  }

  explicit IntegralHistogram(const GrayFrame& frame) : IntegralHistogram(to_intensity(frame)) {}

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  const Eigen::MatrixXd& table(int bin) const { return tables_[std::size_t(bin)]; }

  /// Sum of bin `bin` over pixels x in [x0, x1), y in [y0, y1).
  double rect_sum(int bin, Eigen::Index x0, Eigen::Index y0, Eigen::Index x1, Eigen::Index y1) const {
    const Eigen::MatrixXd& t = tables_[std::size_t(bin)];
    return t(y1, x1) - t(y0, x1) - t(y1, x0) + t(y0, x0);
  }

  std::array<double, kOrientationBins> histogram(Eigen::Index x0, Eigen::Index y0, Eigen::Index x1,
                                                 Eigen::Index y1) const {
    require(0 <= x0 && x0 <= x1 && x1 <= cols_ && 0 <= y0 && y0 <= y1 && y1 <= rows_, ErrorKind::invalid_input,
            "rectangle outside the integral histogram");
    std::array<double, kOrientationBins> h{};
    for (int b = 0; b < kOrientationBins; ++b) h[std::size_t(b)] = rect_sum(b, x0, y0, x1, y1);
    return h;
  }

 private:
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  std::array<Eigen::MatrixXd, kOrientationBins> tables_;
};

inline IntegralHistogram integral_histogram(const GrayFrame& frame) { return IntegralHistogram(frame); }

/// A block-division mode: a sub-rectangle of the patch split into 3x3 cells.
struct ModeRegion {
  int x = 0;
  int y = 0;
  int size = 0;
};

/// Whole patch followed by the four quadrants (TL, TR, BL, BR).
inline constexpr std::array<ModeRegion, kModes> kModeRegions{{
    {0, 0, kPatchSize},
    {0, 0, kPatchSize / 2},
    {kPatchSize / 2, 0, kPatchSize / 2},
    {0, kPatchSize / 2, kPatchSize / 2},
    {kPatchSize / 2, kPatchSize / 2, kPatchSize / 2},
}};

/// Cell boundary k (0..3) along a side of length `size`.
inline constexpr int cell_edge(int size, int k) { return k * size / kCellsPerSide; }

namespace detail {

inline void normalize_blocks(Vector& v) {
  constexpr int block = kCellsPerSide * kCellsPerSide * kOrientationBins;
  for (int m = 0; m < kModes; ++m) {
    auto seg = v.segment(m * block, block);
    const double norm = seg.norm();
    if (norm > kNormFloor)
      seg /= norm;
    else
      seg.setZero();
  }
}

inline void check_patch(const Patch& patch) {
  if (patch.rows() != kPatchSize || patch.cols() != kPatchSize)
    fail(ErrorKind::invalid_input, "patch must be " + std::to_string(kPatchSize) + "x" + std::to_string(kPatchSize));
}

}  // namespace detail

/// 405-dim HOG descriptor computed with an integral histogram of the patch.
inline Vector extract_hog(const Patch& patch) {
  detail::check_patch(patch);
  const IntegralHistogram ih(patch);
  Vector out(kHogDim);
  int k = 0;
  for (const ModeRegion& mode : kModeRegions) {
    for (int cy = 0; cy < kCellsPerSide; ++cy) {
      for (int cx = 0; cx < kCellsPerSide; ++cx) {
        const auto h = ih.histogram(mode.x + cell_edge(mode.size, cx), mode.y + cell_edge(mode.size, cy),
                                    mode.x + cell_edge(mode.size, cx + 1), mode.y + cell_edge(mode.size, cy + 1));
        for (double v : h) out[k++] = v;
      }
    }
  }
  detail::normalize_blocks(out);
  return out;
}

/// Same descriptor accumulated pixel by pixel without the integral tables.
inline Vector extract_hog_direct(const Patch& patch) {
  detail::check_patch(patch);
  const auto planes = binned_gradients(patch);
  Vector out = Vector::Zero(kHogDim);
  int base = 0;
  for (const ModeRegion& mode : kModeRegions) {
    for (int cy = 0; cy < kCellsPerSide; ++cy) {
      for (int cx = 0; cx < kCellsPerSide; ++cx) {
        for (int y = mode.y + cell_edge(mode.size, cy); y < mode.y + cell_edge(mode.size, cy + 1); ++y)
          for (int x = mode.x + cell_edge(mode.size, cx); x < mode.x + cell_edge(mode.size, cx + 1); ++x)
            for (int b = 0; b < kOrientationBins; ++b) out[base + b] += planes[std::size_t(b)](y, x);
        base += kOrientationBins;
      }
    }
  }
  detail::normalize_blocks(out);
  return out;
}

/// Raw intensities, mean-subtracted and scaled to unit L2 norm.
inline Vector extract_raw(const Patch& patch) {
  detail::check_patch(patch);
  Vector out = Eigen::Map<const Vector>(patch.data(), patch.size());
  out.array() -= out.mean();
  const double norm = out.norm();
  if (norm > kNormFloor)
    out /= norm;
  else
    out.setZero();
  return out;
}

inline Vector extract(const Patch& patch, FeatureMode mode = FeatureMode::hog) {
  return mode == FeatureMode::hog ? extract_hog(patch) : extract_raw(patch);
}

}  // namespace mwtrack
