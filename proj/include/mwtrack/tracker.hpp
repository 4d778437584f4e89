#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mwtrack/error.hpp"
#include "mwtrack/eval.hpp"
#include "mwtrack/features.hpp"
#include "mwtrack/image.hpp"
#include "mwtrack/metric.hpp"
#include "mwtrack/metric_learning.hpp"
#include "mwtrack/regression.hpp"
#include "mwtrack/reservoir.hpp"

namespace mwtrack {

/// How the cached inverses follow a metric update.
enum class MetricRefresh {
  rebuild,   ///< recompute (P'MP)^{-1} from scratch
  rank_one,  ///< two Sherman-Morrison updates per applied triplet
};

struct TrackerConfig {
  int particles = 200;
  double std_x = 10.0;
  double std_y = 10.0;
  double std_scale = 0.1;
  double gamma_f = 1.0;
  double gamma_b = 1.0;
  double rho = 0.1;
  std::size_t buffer = 300;  ///< reservoir capacity per class
  double q = 1.6;            ///< time-weight factor
  int triplets = 500;
  int update_period = 5;     ///< frames between metric updates
  double c = 1.0;            ///< learner aggressiveness
  double pos_radius = 2.0;
  double neg_inner = 8.0;
  double neg_outer = 30.0;
  int pos_per_frame = 2;
  int neg_per_frame = 8;
  double scale_min = 0.2;
  double scale_max = 5.0;
  int rebuild_every = 200;   ///< incremental basis edits before a forced rebuild
  bool learn_metric = true;
  MetricRefresh refresh = MetricRefresh::rebuild;
  FeatureMode feature = FeatureMode::hog;
  std::uint64_t seed = 0;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) fail(ErrorKind::invalid_input, std::string(name) + " must be positive");
    };
    auto nonnegative = [](double v, const char* name) {
      if (!(v >= 0.0)) fail(ErrorKind::invalid_input, std::string(name) + " must be nonnegative");
    };
    positive(particles, "particles");
    nonnegative(std_x, "std_x");
    nonnegative(std_y, "std_y");
    nonnegative(std_scale, "std_scale");
    positive(gamma_f, "gamma_f");
    positive(gamma_b, "gamma_b");
    nonnegative(rho, "rho");
    positive(double(buffer), "buffer");
    positive(q, "q");
    nonnegative(triplets, "triplets");
    positive(update_period, "update_period");
    positive(c, "c");
    nonnegative(pos_radius, "pos_radius");
    positive(neg_inner, "neg_inner");
    positive(neg_outer, "neg_outer");
    positive(pos_per_frame, "pos_per_frame");
    positive(neg_per_frame, "neg_per_frame");
    positive(scale_min, "scale_min");
    positive(rebuild_every, "rebuild_every");
    require(neg_inner > pos_radius, ErrorKind::invalid_input, "negative annulus must start outside the positive radius");
    require(neg_outer >= neg_inner, ErrorKind::invalid_input, "negative annulus outer radius below inner radius");
    require(scale_max >= scale_min, ErrorKind::invalid_input, "scale_max below scale_min");
  }
};

/// Object hypothesis: box center and scale relative to the initial box.
struct ParticleState {
  double cx = 0.0;
  double cy = 0.0;
  double scale = 1.0;
  double score = 0.0;
};

/// Independent random streams so that, e.g., changing the particle count does
/// not perturb reservoir draws.
struct RngStreams {
  std::mt19937_64 particles;
  std::mt19937_64 samples;
  std::mt19937_64 reservoir;
  std::mt19937_64 triplets;

  explicit RngStreams(std::uint64_t seed = 0)
      : particles(stream(seed, 1)), samples(stream(seed, 2)), reservoir(stream(seed, 3)), triplets(stream(seed, 4)) {}

 private:
  static std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), tag};
    return std::mt19937_64(seq);
  }
};

/// Sigmoid of exp(-theta_f/gamma_f) - rho exp(-theta_b/gamma_b).
inline double score_from_residuals(double theta_f, double theta_b, const TrackerConfig& cfg) {
  const double z = std::exp(-theta_f / cfg.gamma_f) - cfg.rho * std::exp(-theta_b / cfg.gamma_b);
  return 1.0 / (1.0 + std::exp(-z));
}

/// Gaussian random walk in (cx, cy, scale); scale is clamped to the configured range.
template <typename Rng>
std::vector<ParticleState> propagate(const ParticleState& prev, const TrackerConfig& cfg, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<ParticleState> out(std::size_t(cfg.particles));
  for (auto& p : out) {
    p.cx = prev.cx + cfg.std_x * unit(rng);
    p.cy = prev.cy + cfg.std_y * unit(rng);
    p.scale = std::clamp(prev.scale + cfg.std_scale * unit(rng), cfg.scale_min, cfg.scale_max);
    p.score = 0.0;
  }
  return out;
}

/// Index of the highest-scoring particle; the first one wins ties.
inline std::size_t map_estimate(std::span<const ParticleState> particles) {
  require(!particles.empty(), ErrorKind::invalid_input, "map_estimate of an empty particle set");
  std::size_t best = 0;
  for (std::size_t k = 1; k < particles.size(); ++k)
    if (particles[k].score > particles[best].score) best = k;
  return best;
}

struct TrainingSamples {
  std::vector<Vector> positives;
  std::vector<Vector> negatives;
  std::vector<std::pair<double, double>> positive_centers;
  std::vector<std::pair<double, double>> negative_centers;
};

/// Boxes for a state given the initial box size.
inline Box state_box(const ParticleState& s, double base_w, double base_h) {
  return Box::centered(s.cx, s.cy, base_w * s.scale, base_h * s.scale);
}

/**
 * Positives: centers uniform in the disk of radius pos_radius around the MAP
 * center. Negatives: centers uniform in the annulus [neg_inner, neg_outer].
 * Both use the MAP scale.
 */
template <typename Rng>
TrainingSamples select_training_samples(const GrayFrame& frame, const ParticleState& map_state, double base_w,
                                        double base_h, const TrackerConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TrainingSamples out;
  const double w = base_w * map_state.scale;
  const double h = base_h * map_state.scale;
  auto take = [&](double cx, double cy) { return extract(crop_and_resize(frame, Box::centered(cx, cy, w, h)), cfg.feature); };

  for (int k = 0; k < cfg.pos_per_frame; ++k) {
    const double r = cfg.pos_radius * std::sqrt(unit(rng));
    const double a = 2.0 * std::numbers::pi * unit(rng);
    const double cx = map_state.cx + r * std::cos(a);
    const double cy = map_state.cy + r * std::sin(a);
    out.positives.push_back(take(cx, cy));
    out.positive_centers.emplace_back(cx, cy);
  }
  const double r_in2 = cfg.neg_inner * cfg.neg_inner;
  const double r_out2 = cfg.neg_outer * cfg.neg_outer;
  for (int k = 0; k < cfg.neg_per_frame; ++k) {
    const double r = std::sqrt(r_in2 + (r_out2 - r_in2) * unit(rng));
    const double a = 2.0 * std::numbers::pi * unit(rng);
    const double cx = map_state.cx + r * std::cos(a);
    const double cy = map_state.cy + r * std::sin(a);
    out.negatives.push_back(take(cx, cy));
    out.negative_centers.emplace_back(cx, cy);
  }
  return out;
}

using FeatureBuffer = ReservoirBuffer<Vector>;

struct TripletSample {
  std::vector<Triplet> triplets;
  bool underpopulated = false;  ///< a buffer had fewer than 2 items; no triplets drawn
};

/**
 * n triplets: pick the anchor class uniformly, draw (p, p+) without
 * replacement from that class's buffer and p- from the other buffer.
 */
template <typename Rng>
TripletSample sample_triplets(const FeatureBuffer& fg, const FeatureBuffer& bg, int n, Rng& rng) {
  TripletSample out;
  if (fg.size() < 2 || bg.size() < 2) {
    out.underpopulated = true;
    return out;
  }
  std::bernoulli_distribution coin(0.5);
  out.triplets.reserve(std::size_t(std::max(n, 0)));
  for (int k = 0; k < n; ++k) {
    const bool anchor_fg = coin(rng);
    const FeatureBuffer& same = anchor_fg ? fg : bg;
    const FeatureBuffer& other = anchor_fg ? bg : fg;
    std::uniform_int_distribution<std::size_t> pick_same(0, same.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_rest(0, same.size() - 2);
    std::uniform_int_distribution<std::size_t> pick_other(0, other.size() - 1);
    const std::size_t i = pick_same(rng);
    std::size_t j = pick_rest(rng);
    if (j >= i) ++j;
    const std::size_t l = pick_other(rng);
    out.triplets.push_back({same[i].feature, same[j].feature, other[l].feature});
  }
  return out;
}

struct FrameTimings {
  double features = 0.0;
  double solve = 0.0;
  double reservoir = 0.0;
  double metric_update = 0.0;
  double total = 0.0;
};

struct TrackerStats {
  std::int64_t clamped_residuals = 0;
  std::int64_t rebuilds = 0;
  std::int64_t singular_fallbacks = 0;
  std::int64_t metric_updates = 0;
  std::int64_t underpopulated_triplet_draws = 0;
};

struct TrackerState {
  MetricMatrix metric;
  FeatureBuffer foreground{1, 1.0, SampleClass::foreground};
  FeatureBuffer background{1, 1.0, SampleClass::background};
  BasisSet fg_basis;
  BasisSet bg_basis;
  ParticleState current;
  std::int64_t frame_index = 0;
  double base_w = 0.0;
  double base_h = 0.0;
  RngStreams rng;
  TrackerStats stats;
  BatchSummary last_metric_update;
};

namespace detail {

inline Matrix buffer_matrix(const FeatureBuffer& buffer, Eigen::Index dim) {
  Matrix p(dim, Eigen::Index(buffer.size()));
  for (std::size_t k = 0; k < buffer.size(); ++k) p.col(Eigen::Index(k)) = buffer[k].feature;
  return p;
}

inline void rebuild_from_buffer(BasisSet& basis, const FeatureBuffer& buffer, const MetricMatrix& metric,
                                TrackerStats& stats) {
  basis = BasisSet(buffer_matrix(buffer, metric.dim()), metric, basis.tolerances());
  ++stats.rebuilds;
}

/// Offers `feature` to the reservoir and mirrors any change into the basis.
template <typename Rng>
void insert_mirrored(FeatureBuffer& buffer, BasisSet& basis, const MetricMatrix& metric, const Vector& feature,
                     std::int64_t frame, Rng& rng, int rebuild_every, TrackerStats& stats) {
  const auto result = buffer.insert(feature, frame, rng);
  if (!result.inserted) return;
  try {
    if (result.evicted)
      basis.replace(metric, Eigen::Index(*result.evicted), feature);
    else
      basis.expand(metric, feature);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::near_singular_expansion && e.kind() != ErrorKind::degenerate_removal) throw;
    ++stats.singular_fallbacks;
    rebuild_from_buffer(basis, buffer, metric, stats);
    return;
  }
  if (basis.edits_since_rebuild() >= rebuild_every || basis.uses_pseudoinverse())
    rebuild_from_buffer(basis, buffer, metric, stats);
}

inline void refresh_rank_one(BasisSet& basis, const FeatureBuffer& buffer, const MetricMatrix& metric,
                             std::span<const UpdateRecord> records, int rebuild_every, TrackerStats& stats) {
  try {
    for (const UpdateRecord& rec : records) {
      if (rec.eta <= 0.0) continue;
      basis.apply_metric_rank_one(rec.a_minus, rec.eta);
      basis.apply_metric_rank_one(rec.a_plus, -rec.eta);
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::rank_one_singularity) throw;
    ++stats.singular_fallbacks;
    rebuild_from_buffer(basis, buffer, metric, stats);
    return;
  }
  basis.mark_current(metric);
  if (basis.edits_since_rebuild() >= rebuild_every) rebuild_from_buffer(basis, buffer, metric, stats);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/**
 * Particle-filter tracker whose observation model compares metric-weighted
 * regression residuals against foreground and background bases.
 */
class Tracker {
 public:
  Tracker(const GrayFrame& first_frame, const Box& init_box, TrackerConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (!init_box.valid()) fail(ErrorKind::invalid_state, "degenerate initial box");
    require(init_box.x < first_frame.width && init_box.y < first_frame.height && init_box.x + init_box.w > 0 &&
                init_box.y + init_box.h > 0,
            ErrorKind::invalid_state, "initial box does not intersect the frame");

    TrackerState& s = state_;
    const Eigen::Index dim = feature_dim(cfg_.feature);
    s.rng = RngStreams(cfg_.seed);
    s.metric = MetricMatrix::identity(dim);
    s.foreground = FeatureBuffer(cfg_.buffer, cfg_.q, SampleClass::foreground);
    s.background = FeatureBuffer(cfg_.buffer, cfg_.q, SampleClass::background);
    s.base_w = init_box.w;
    s.base_h = init_box.h;
    s.current = {init_box.cx(), init_box.cy(), 1.0, 0.0};
    s.frame_index = 0;

    s.foreground.insert(extract(crop_and_resize(first_frame, init_box), cfg_.feature), 0, s.rng.reservoir);
    const TrainingSamples seed = select_training_samples(first_frame, s.current, s.base_w, s.base_h, cfg_, s.rng.samples);
    for (const Vector& f : seed.positives) s.foreground.insert(f, 0, s.rng.reservoir);
    for (const Vector& f : seed.negatives) s.background.insert(f, 0, s.rng.reservoir);

    s.fg_basis = BasisSet(detail::buffer_matrix(s.foreground, dim), s.metric);
    s.bg_basis = BasisSet(detail::buffer_matrix(s.background, dim), s.metric);

    const Vector y = extract(crop_and_resize(first_frame, init_box), cfg_.feature);
    s.current.score = score_feature(y);
  }

  const TrackerConfig& config() const { return cfg_; }
  const TrackerState& state() const { return state_; }
  const FrameTimings& last_timings() const { return timings_; }
  const std::vector<ParticleState>& last_particles() const { return particles_; }

  Box box(const ParticleState& s) const { return state_box(s, state_.base_w, state_.base_h); }
  Box current_box() const { return box(state_.current); }

  /// Likelihood score of a feature vector against the current bases.
  double score_feature(const Vector& y) const {
    const TrackerState& s = state_;
    const double theta_f = s.fg_basis.solve(s.metric, y).residual;
    const double theta_b = s.bg_basis.solve(s.metric, y).residual;
    return score_from_residuals(theta_f, theta_b, cfg_);
  }

  /// Processes one frame and returns the MAP state. On error the tracker is
  /// left at its previous state.
  ParticleState step(const GrayFrame& frame) {
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    FrameTimings timings;
    TrackerState next = state_;
    ++next.frame_index;

    std::vector<ParticleState> particles = propagate(next.current, cfg_, next.rng.particles);

    auto t0 = clock::now();
    const Eigen::Index dim = next.metric.dim();
    Matrix ys(dim, Eigen::Index(particles.size()));
    for (std::size_t k = 0; k < particles.size(); ++k)
      ys.col(Eigen::Index(k)) = extract(crop_and_resize(frame, state_box(particles[k], next.base_w, next.base_h)), cfg_.feature);
    timings.features = detail::seconds_since(t0);

    t0 = clock::now();
    const Matrix mys = next.metric.matrix() * ys;
    int clamped_f = 0, clamped_b = 0;
    const Vector theta_f = next.fg_basis.residuals(next.metric, ys, mys, &clamped_f);
    const Vector theta_b = next.bg_basis.residuals(next.metric, ys, mys, &clamped_b);
    next.stats.clamped_residuals += clamped_f + clamped_b;
    for (std::size_t k = 0; k < particles.size(); ++k)
      particles[k].score = score_from_residuals(theta_f[Eigen::Index(k)], theta_b[Eigen::Index(k)], cfg_);
    const ParticleState map = particles[map_estimate(particles)];
    timings.solve = detail::seconds_since(t0);

    t0 = clock::now();
    const TrainingSamples fresh = select_training_samples(frame, map, next.base_w, next.base_h, cfg_, next.rng.samples);
    timings.features += detail::seconds_since(t0);

    t0 = clock::now();
    for (const Vector& f : fresh.positives)
      detail::insert_mirrored(next.foreground, next.fg_basis, next.metric, f, next.frame_index, next.rng.reservoir,
                              cfg_.rebuild_every, next.stats);
    for (const Vector& f : fresh.negatives)
      detail::insert_mirrored(next.background, next.bg_basis, next.metric, f, next.frame_index, next.rng.reservoir,
                              cfg_.rebuild_every, next.stats);
    timings.reservoir = detail::seconds_since(t0);

    if (cfg_.learn_metric && next.frame_index % cfg_.update_period == 0) {
      t0 = clock::now();
      update_metric(next);
      timings.metric_update = detail::seconds_since(t0);
    }

    next.current = map;
    state_ = std::move(next);
    particles_ = std::move(particles);
    timings.total = detail::seconds_since(t_start);
    timings_ = timings;
    return state_.current;
  }

 private:
  void update_metric(TrackerState& s) const {
    TripletSample draw = sample_triplets(s.foreground, s.background, cfg_.triplets, s.rng.triplets);
    if (draw.underpopulated) ++s.stats.underpopulated_triplet_draws;
    if (draw.triplets.empty()) return;
    LearnerConfig learner;
    learner.aggressiveness = cfg_.c;
    s.last_metric_update = batch_update(s.metric, draw.triplets, learner);
    ++s.stats.metric_updates;
    if (s.last_metric_update.updates_applied == 0) {
      s.fg_basis.mark_current(s.metric);
      s.bg_basis.mark_current(s.metric);
      return;
    }
    if (cfg_.refresh == MetricRefresh::rank_one) {
      detail::refresh_rank_one(s.fg_basis, s.foreground, s.metric, s.last_metric_update.records, cfg_.rebuild_every,
                               s.stats);
      detail::refresh_rank_one(s.bg_basis, s.background, s.metric, s.last_metric_update.records, cfg_.rebuild_every,
                               s.stats);
    } else {
      detail::rebuild_from_buffer(s.fg_basis, s.foreground, s.metric, s.stats);
      detail::rebuild_from_buffer(s.bg_basis, s.background, s.metric, s.stats);
    }
  }

  TrackerConfig cfg_;
  TrackerState state_;
  FrameTimings timings_;
  std::vector<ParticleState> particles_;
};

}  // namespace mwtrack
