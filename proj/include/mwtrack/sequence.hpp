#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mwtrack/error.hpp"
#include "mwtrack/eval.hpp"
#include "mwtrack/image.hpp"
#include "mwtrack/tracker.hpp"

namespace mwtrack {

/// One output row per processed frame.
struct ResultRow {
  std::int64_t frame = 0;
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  double score = 0.0;

  Box box() const { return {x, y, w, h}; }
  bool operator==(const ResultRow&) const = default;
};

struct PhaseTotals {
  double features = 0.0;
  double solve = 0.0;
  double reservoir = 0.0;
  double metric_update = 0.0;
  double total = 0.0;
  int frames = 0;  ///< frames timed (the initial frame is not)

  void add(const FrameTimings& t) {
    features += t.features;
    solve += t.solve;
    reservoir += t.reservoir;
    metric_update += t.metric_update;
    total += t.total;
    ++frames;
  }
  double mean_total() const { return frames > 0 ? total / frames : 0.0; }
};

struct TrackRun {
  std::vector<ResultRow> rows;
  PhaseTotals timing;
  TrackerStats stats;
};

/**
 * Tracks through `frames` starting from `init_box` on the first one. The first
 * row is the initial box itself. `frame_numbers` (1-based ids written to the
 * results) defaults to 1..n. `load(k)` supplies frame k on demand.
 */
inline TrackRun track_frames(std::size_t count, const std::function<GrayFrame(std::size_t)>& load, const Box& init_box,
                             const TrackerConfig& cfg, std::span<const std::int64_t> frame_numbers = {}) {
  require(count >= 1, ErrorKind::invalid_input, "sequence has no frames");
  require(frame_numbers.empty() || frame_numbers.size() == count, ErrorKind::invalid_input,
          "frame number list does not match the frame count");
  auto number = [&](std::size_t k) { return frame_numbers.empty() ? std::int64_t(k + 1) : frame_numbers[k]; };

  TrackRun run;
  Tracker tracker(load(0), init_box, cfg);
  run.rows.push_back({number(0), init_box.x, init_box.y, init_box.w, init_box.h, tracker.state().current.score});
  for (std::size_t k = 1; k < count; ++k) {
    const ParticleState s = tracker.step(load(k));
    const Box b = tracker.box(s);
    run.rows.push_back({number(k), b.x, b.y, b.w, b.h, s.score});
    run.timing.add(tracker.last_timings());
  }
  run.stats = tracker.state().stats;
  return run;
}

inline TrackRun track_frames(std::span<const GrayFrame> frames, const Box& init_box, const TrackerConfig& cfg) {
  return track_frames(frames.size(), [&](std::size_t k) { return frames[k]; }, init_box, cfg);
}

struct Summary {
  double mean_cle = 0.0;
  double mean_vor = 0.0;
  double success_rate = 0.0;
  std::vector<double> cle;  ///< per matched frame
  std::vector<double> vor;
  std::size_t matched = 0;
};

/// Metrics over the frames present in both lists, matched by frame number.
inline Summary summarize(std::span<const ResultRow> rows, std::span<const std::pair<std::int64_t, Box>> truth) {
  Summary s;
  for (const ResultRow& r : rows) {
    for (const auto& [frame, box] : truth) {
      if (frame != r.frame) continue;
      s.cle.push_back(cle(r.box(), box));
      s.vor.push_back(vor(r.box(), box));
      break;
    }
  }
  s.matched = s.vor.size();
  require(s.matched > 0, ErrorKind::invalid_input, "no result rows match the ground truth frames");
  for (std::size_t k = 0; k < s.matched; ++k) {
    s.mean_cle += s.cle[k];
    s.mean_vor += s.vor[k];
  }
  s.mean_cle /= double(s.matched);
  s.mean_vor /= double(s.matched);
  s.success_rate = success_rate(s.vor);
  return s;
}

inline std::vector<std::pair<std::int64_t, Box>> numbered(std::span<const Box> boxes) {
  std::vector<std::pair<std::int64_t, Box>> out;
  out.reserve(boxes.size());
  for (std::size_t k = 0; k < boxes.size(); ++k) out.emplace_back(std::int64_t(k + 1), boxes[k]);
  return out;
}

}  // namespace mwtrack
