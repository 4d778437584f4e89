#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mwtrack/sequence.hpp"
#include "mwtrack/synth.hpp"
#include "mwtrack/tracker.hpp"

namespace mwtrack {
namespace {

SynthSequence short_sequence(int length, std::uint64_t seed = 1) {
  SynthSpec spec;
  spec.length = length;
  spec.seed = seed;
  return generate_sequence(spec);
}

TEST(Score, ClosedFormValues) {
  const TrackerConfig cfg;
  EXPECT_NEAR(score_from_residuals(0.0, 0.0, cfg), 0.710950, 1e-6);
  EXPECT_NEAR(score_from_residuals(1e300, 0.0, cfg), 0.475021, 1e-6);
}

TEST(Score, MonotoneOnGrid) {
  const TrackerConfig cfg;
  for (int i = 0; i <= 40; ++i) {
    for (int j = 0; j <= 40; ++j) {
      const double tf = 0.25 * i, tb = 0.25 * j;
      if (i < 40) ASSERT_GT(score_from_residuals(tf, tb, cfg), score_from_residuals(tf + 0.25, tb, cfg));
      if (j < 40) ASSERT_LT(score_from_residuals(tf, tb, cfg), score_from_residuals(tf, tb + 0.25, cfg));
    }
  }
}

TEST(Map, TieGoesToFirstAndMatchesScan) {
  std::vector<ParticleState> ps{{0, 0, 1, 0.2}, {1, 0, 1, 0.9}, {2, 0, 1, 0.9}};
  EXPECT_EQ(map_estimate(ps), 1u);
  EXPECT_EQ(map_estimate(std::span(ps).first(1)), 0u);
  EXPECT_THROW((void)map_estimate(std::vector<ParticleState>{}), Error);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> coarse(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ParticleState> r(50);
    for (auto& p : r) p.score = coarse(rng) / 10.0;
    std::size_t best = 0;
    for (std::size_t k = 0; k < r.size(); ++k)
      if (r[k].score > r[best].score) best = k;
    ASSERT_EQ(map_estimate(r), best);
  }
}

TEST(Propagate, ZeroStdAndCounts) {
  TrackerConfig cfg;
  std::mt19937_64 rng(1);
  const ParticleState prev{50, 60, 1.2, 0.5};
  const auto ps = propagate(prev, cfg, rng);
  EXPECT_EQ(ps.size(), 200u);
  cfg.std_x = cfg.std_y = cfg.std_scale = 0.0;
  for (const auto& p : propagate(prev, cfg, rng)) {
    EXPECT_EQ(p.cx, 50.0);
    EXPECT_EQ(p.cy, 60.0);
    EXPECT_EQ(p.scale, 1.2);
  }
}

TEST(Propagate, MomentsAndScaleClamp) {
  TrackerConfig cfg;
  cfg.particles = 20000;
  std::mt19937_64 rng(2);
  const auto ps = propagate(ParticleState{10, -4, 1.0, 0}, cfg, rng);
  double mx = 0.0, vx = 0.0;
  for (const auto& p : ps) mx += p.cx;
  mx /= double(ps.size());
  for (const auto& p : ps) vx += (p.cx - mx) * (p.cx - mx);
  vx /= double(ps.size() - 1);
  EXPECT_NEAR(mx, 10.0, 4.0 * 10.0 / std::sqrt(20000.0));
  EXPECT_NEAR(std::sqrt(vx), 10.0, 0.2);
  cfg.std_scale = 10.0;
  for (const auto& p : propagate(ParticleState{0, 0, 1.0, 0}, cfg, rng)) {
    ASSERT_GE(p.scale, 0.2);
    ASSERT_LE(p.scale, 5.0);
  }
}

TEST(TrainingSamples, RadiiAndCounts) {
  const auto seq = short_sequence(1);
  TrackerConfig cfg;
  std::mt19937_64 rng(3);
  const ParticleState map{80, 90, 1.0, 0};
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = select_training_samples(seq.frames[0], map, 24, 24, cfg, rng);
    ASSERT_EQ(t.positives.size(), 2u);
    ASSERT_EQ(t.negatives.size(), 8u);
    for (auto [x, y] : t.positive_centers) ASSERT_LE(std::hypot(x - 80, y - 90), 2.0 + 1e-12);
    for (auto [x, y] : t.negative_centers) {
      const double r = std::hypot(x - 80, y - 90);
      ASSERT_GE(r, 8.0 - 1e-12);
      ASSERT_LE(r, 30.0 + 1e-12);
    }
  }
  cfg.pos_radius = 0.0;
  const auto t = select_training_samples(seq.frames[0], map, 24, 24, cfg, rng);
  const Vector at_map = extract(crop_and_resize(seq.frames[0], Box::centered(80, 90, 24, 24)));
  for (const auto& f : t.positives) EXPECT_EQ(f, at_map);
}

TEST(Triplets, ClassInvariants) {
  const int d = 6;
  FeatureBuffer fg(10, 1.0, SampleClass::foreground), bg(10, 1.0, SampleClass::background);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 3; ++k) fg.insert(Vector::Constant(d, 1.0 + k), 0, rng);
  for (int k = 0; k < 4; ++k) bg.insert(Vector::Constant(d, -1.0 - k), 0, rng);
  const auto draw = sample_triplets(fg, bg, 500, rng);
  EXPECT_FALSE(draw.underpopulated);
  ASSERT_EQ(draw.triplets.size(), 500u);
  int fg_anchor = 0;
  for (const auto& t : draw.triplets) {
    const bool anchor_fg = t.p[0] > 0;
    fg_anchor += anchor_fg;
    ASSERT_EQ(t.p_plus[0] > 0, anchor_fg);
    ASSERT_NE(t.p_minus[0] > 0, anchor_fg);
    ASSERT_NE(t.p[0], t.p_plus[0]);  // distinct slots hold distinct vectors here
  }
  EXPECT_GT(fg_anchor, 200);
  EXPECT_LT(fg_anchor, 300);
}

TEST(Triplets, UnderpopulatedBufferYieldsNone) {
  FeatureBuffer fg(10, 1.0), bg(10, 1.0);
  std::mt19937_64 rng(4);
  fg.insert(Vector::Ones(3), 0, rng);
  fg.insert(Vector::Zero(3), 0, rng);
  bg.insert(Vector::Ones(3), 0, rng);
  const auto draw = sample_triplets(fg, bg, 10, rng);
  EXPECT_TRUE(draw.underpopulated);
  EXPECT_TRUE(draw.triplets.empty());
}

TEST(Tracker, InitialBuffersAndResidual) {
  const auto seq = short_sequence(1);
  const Tracker tracker(seq.frames[0], seq.truth[0], TrackerConfig{});
  EXPECT_EQ(tracker.state().foreground.size(), 3u);
  EXPECT_EQ(tracker.state().background.size(), 8u);
  const Vector y = extract(crop_and_resize(seq.frames[0], seq.truth[0]));
  const auto rep = tracker.state().fg_basis.solve(tracker.state().metric, y);
  EXPECT_LT(rep.residual, 1e-9);
}

TEST(Tracker, RejectsBadInitialBox) {
  const auto seq = short_sequence(1);
  EXPECT_THROW(Tracker(seq.frames[0], Box{500, 500, 10, 10}, TrackerConfig{}), Error);
  EXPECT_THROW(Tracker(seq.frames[0], Box{5, 5, 0, 10}, TrackerConfig{}), Error);
}

TEST(Tracker, ZeroDynamicsKeepsState) {
  const auto seq = short_sequence(3);
  TrackerConfig cfg;
  cfg.std_x = cfg.std_y = cfg.std_scale = 0.0;
  Tracker tracker(seq.frames[0], seq.truth[0], cfg);
  const ParticleState before = tracker.state().current;
  const ParticleState after = tracker.step(seq.frames[1]);
  EXPECT_EQ(after.cx, before.cx);
  EXPECT_EQ(after.cy, before.cy);
  EXPECT_EQ(after.scale, before.scale);
}

TEST(Tracker, BufferBasisMirroring) {
  const auto seq = short_sequence(40);
  TrackerConfig cfg;
  cfg.buffer = 30;  // forces evictions within the run
  Tracker tracker(seq.frames[0], seq.truth[0], cfg);
  for (int t = 1; t < 40; ++t) {
    tracker.step(seq.frames[std::size_t(t)]);
    const TrackerState& s = tracker.state();
    ASSERT_EQ(s.fg_basis.size(), Eigen::Index(s.foreground.size()));
    ASSERT_EQ(s.bg_basis.size(), Eigen::Index(s.background.size()));
    for (std::size_t k = 0; k < s.foreground.size(); ++k)
      ASSERT_EQ(s.fg_basis.samples().col(Eigen::Index(k)), s.foreground[k].feature);
    for (std::size_t k = 0; k < s.background.size(); ++k)
      ASSERT_EQ(s.bg_basis.samples().col(Eigen::Index(k)), s.background[k].feature);
    ASSERT_EQ(s.fg_basis.metric_version(), s.metric.version());
  }
  EXPECT_EQ(tracker.state().foreground.size(), 30u);
}

TEST(Tracker, DeterministicTrajectories) {
  const auto seq = short_sequence(25);
  TrackerConfig cfg;
  cfg.seed = 9;
  const auto a = track_frames(seq.frames, seq.truth[0], cfg);
  const auto b = track_frames(seq.frames, seq.truth[0], cfg);
  EXPECT_EQ(a.rows, b.rows);
  cfg.seed = 10;
  EXPECT_NE(track_frames(seq.frames, seq.truth[0], cfg).rows, a.rows);
}

TEST(Tracker, RankOneRefreshMatchesRebuild) {
  const auto seq = short_sequence(30);
  TrackerConfig cfg;
  cfg.triplets = 40;
  cfg.rebuild_every = 1000000;  // keep the incremental path alive between updates
  const auto rebuilt = track_frames(seq.frames, seq.truth[0], cfg);
  cfg.refresh = MetricRefresh::rank_one;
  const auto incremental = track_frames(seq.frames, seq.truth[0], cfg);
  ASSERT_EQ(rebuilt.rows.size(), incremental.rows.size());
  for (std::size_t k = 0; k < rebuilt.rows.size(); ++k) {
    EXPECT_NEAR(rebuilt.rows[k].box().cx(), incremental.rows[k].box().cx(), 1e-6) << "frame " << k;
    EXPECT_NEAR(rebuilt.rows[k].box().cy(), incremental.rows[k].box().cy(), 1e-6) << "frame " << k;
  }
}

TEST(Tracker, StationaryObjectStaysLocked) {
  SynthSpec spec;
  spec.length = 51;
  spec.amplitude = 0.0;
  spec.drift = 0.0;
  spec.seed = 2;
  const auto seq = generate_sequence(spec);
  const auto run = track_frames(seq.frames, seq.truth[0], TrackerConfig{});
  for (std::size_t k = 1; k < run.rows.size(); ++k) ASSERT_LE(cle(run.rows[k].box(), seq.truth[k]), 2.0) << "frame " << k;
}

TEST(Tracker, TrueObjectOutscoresNegatives) {
  const auto seq = short_sequence(60, 3);
  TrackerConfig cfg;
  Tracker tracker(seq.frames[0], seq.truth[0], cfg);
  std::mt19937_64 rng(17);
  int wins = 0, frames = 0;
  for (std::size_t t = 1; t < seq.frames.size(); ++t) {
    tracker.step(seq.frames[t]);
    const Box truth = seq.truth[t];
    const ParticleState at_truth{truth.cx(), truth.cy(), 1.0, 0};
    const auto neg = select_training_samples(seq.frames[t], at_truth, truth.w, truth.h, cfg, rng);
    double mean_neg = 0.0;
    for (const auto& f : neg.negatives) mean_neg += tracker.score_feature(f);
    mean_neg /= double(neg.negatives.size());
    wins += tracker.score_feature(extract(crop_and_resize(seq.frames[t], truth))) > mean_neg;
    ++frames;
  }
  EXPECT_GE(double(wins) / frames, 0.95);
}

TEST(Config, Validation) {
  TrackerConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.neg_inner = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = TrackerConfig{};
  cfg.particles = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

}  // namespace
}  // namespace mwtrack
