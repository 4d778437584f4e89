#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "mwtrack/error.hpp"

namespace mwtrack {

/// Axis-aligned box, top-left corner plus size, in real pixel units.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0 && std::isfinite(x) && std::isfinite(y); }

  static Box centered(double cx, double cy, double w, double h) { return {cx - 0.5 * w, cy - 0.5 * h, w, h}; }

  bool operator==(const Box&) const = default;
};

/// VOC overlap ratio: intersection area over union area.
inline double vor(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Center location error.
inline double cle(const Box& a, const Box& b) { return std::hypot(a.cx() - b.cx(), a.cy() - b.cy()); }

/// Fraction of frames whose overlap is strictly above 0.5.
inline double success_rate(std::span<const double> vors) {
  require(!vors.empty(), ErrorKind::invalid_input, "success_rate of an empty list");
  const auto hits = std::count_if(vors.begin(), vors.end(), [](double v) { return v > 0.5; });
  return double(hits) / double(vors.size());
}

}  // namespace mwtrack
