// mwtrack: track, synth, eval and bench front end for the mwtrack library.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mwtrack/io.hpp"
#include "mwtrack/png.hpp"
#include "mwtrack/sequence.hpp"
#include "mwtrack/synth.hpp"
#include "mwtrack/tracker.hpp"

namespace fs = std::filesystem;
using namespace mwtrack;

namespace {

struct TrackOptions {
  TrackerConfig cfg;
  std::string frames;
  std::string gt;
  std::string init;
  std::string out = "results.csv";
  std::string curves;
  std::string feature = "hog";
  std::string refresh = "rebuild";
  bool no_metric_learning = false;
};

void add_tracker_flags(CLI::App* app, TrackOptions& o) {
  TrackerConfig& c = o.cfg;
  app->add_option("--seed", c.seed, "random seed (all streams derive from it)");
  app->add_option("--particles", c.particles, "particles per frame");
  app->add_option("--buffer", c.buffer, "reservoir capacity per class");
  app->add_option("--q", c.q, "time-weight factor");
  app->add_option("--c", c.c, "metric learner aggressiveness");
  app->add_option("--rho", c.rho, "background term weight");
  app->add_option("--gamma-f", c.gamma_f, "foreground residual scale");
  app->add_option("--gamma-b", c.gamma_b, "background residual scale");
  app->add_option("--triplets", c.triplets, "triplets per metric update");
  app->add_option("--update-period", c.update_period, "frames between metric updates");
  app->add_option("--feature", o.feature, "feature mode")->check(CLI::IsMember({"hog", "raw"}));
  app->add_option("--std-x", c.std_x, "particle std in x (px)");
  app->add_option("--std-y", c.std_y, "particle std in y (px)");
  app->add_option("--std-scale", c.std_scale, "particle std in scale");
  app->add_option("--rebuild-every", c.rebuild_every, "incremental edits before a forced inverse rebuild");
  app->add_option("--refresh", o.refresh, "basis refresh after a metric update")
      ->check(CLI::IsMember({"rebuild", "rank-one"}));
  app->add_flag("--no-metric-learning", o.no_metric_learning, "keep the metric at identity");
  app->set_config("--config", "", "key = value file; flags given on the command line win");
}

TrackerConfig finish_config(const TrackOptions& o) {
  TrackerConfig cfg = o.cfg;
  cfg.feature = parse_feature_mode(o.feature);
  cfg.refresh = o.refresh == "rank-one" ? MetricRefresh::rank_one : MetricRefresh::rebuild;
  cfg.learn_metric = !o.no_metric_learning;
  cfg.validate();
  return cfg;
}

void write_curves(const fs::path& path, std::span<const ResultRow> rows, const Summary& s,
                  std::span<const std::pair<std::int64_t, Box>> truth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << "frame,cle,vor\n";
  std::size_t k = 0;
  for (const ResultRow& r : rows) {
    for (const auto& t : truth) {
      if (t.first != r.frame) continue;
      out << r.frame << ',' << format_double(s.cle[k]) << ',' << format_double(s.vor[k]) << '\n';
      ++k;
      break;
    }
  }
}

void print_summary(std::ostream& os, std::size_t frames, const Summary* s, std::optional<double> sec_per_frame) {
  os << std::fixed;
  os << "frames        " << frames << '\n';
  if (s != nullptr) {
    os << "mean CLE      " << std::setprecision(3) << s->mean_cle << '\n';
    os << "mean VOR      " << std::setprecision(4) << s->mean_vor << '\n';
    os << "success rate  " << std::setprecision(4) << s->success_rate << '\n';
  }
  if (sec_per_frame) os << "mean s/frame  " << std::setprecision(4) << *sec_per_frame << '\n';
  os.unsetf(std::ios::floatfield);
}

struct LoadedSequence {
  std::vector<FrameFile> files;
  std::vector<std::pair<std::int64_t, Box>> truth;
  Box init;
};

LoadedSequence load_sequence(const TrackOptions& o) {
  LoadedSequence seq;
  seq.files = list_frames(o.frames);
  if (!o.gt.empty()) seq.truth = read_ground_truth(fs::path(o.gt));
  if (!o.init.empty()) {
    seq.init = parse_box(o.init);
  } else {
    const auto first = std::find_if(seq.truth.begin(), seq.truth.end(), [](const auto& t) { return t.first == 1; });
    if (first == seq.truth.end()) fail(ErrorKind::invalid_input, "need --init or a ground-truth row for frame 1");
    seq.init = first->second;
  }
  return seq;
}

/// Tracks every frame, keeping the rows produced before any failure.
int run_track(const TrackOptions& o, bool bench) {
  const TrackerConfig cfg = finish_config(o);
  const LoadedSequence seq = load_sequence(o);

  std::vector<ResultRow> rows;
  PhaseTotals timing;
  std::string failure;
  try {
    Tracker tracker(read_frame(seq.files[0].path), seq.init, cfg);
    rows.push_back({1, seq.init.x, seq.init.y, seq.init.w, seq.init.h, tracker.state().current.score});
    for (std::size_t k = 1; k < seq.files.size(); ++k) {
      const ParticleState s = tracker.step(read_frame(seq.files[k].path));
      const Box b = tracker.box(s);
      rows.push_back({std::int64_t(k + 1), b.x, b.y, b.w, b.h, s.score});
      timing.add(tracker.last_timings());
    }
  } catch (const Error& e) {
    failure = "frame " + std::to_string(rows.size() + 1) + ": " + e.what();
  }

  if (!bench) write_results(fs::path(o.out), rows);

  std::optional<Summary> summary;
  if (!seq.truth.empty() && !rows.empty()) {
    summary = summarize(rows, seq.truth);
    if (!o.curves.empty()) write_curves(o.curves, rows, *summary, seq.truth);
  }
  const std::optional<double> spf = timing.frames > 0 ? std::optional(timing.mean_total()) : std::nullopt;
  print_summary(std::cout, rows.size(), summary ? &*summary : nullptr, spf);

  if (bench && timing.frames > 0) {
    const double n = timing.frames;
    std::cout << std::fixed << std::setprecision(5);
    std::cout << "phase s/frame features " << timing.features / n << '\n';
    std::cout << "phase s/frame solve    " << timing.solve / n << '\n';
    std::cout << "phase s/frame reservoir " << timing.reservoir / n << '\n';
    std::cout << "phase s/frame metric   " << timing.metric_update / n << '\n';
  }

  if (!failure.empty()) {
    std::cerr << "error: " << failure << '\n';
    return 1;
  }
  return 0;
}

struct SynthOptions {
  SynthSpec spec;
  std::string out;
  std::string occlusion;
  std::string format = "pgm";
};

int run_synth(SynthOptions& o) {
  if (!o.occlusion.empty()) {
    const auto f = split_commas(o.occlusion);
    std::int64_t a = 0, b = 0;
    if (f.size() != 2 || !parse_int(f[0], a) || !parse_int(f[1], b))
      fail(ErrorKind::invalid_input, "--occlusion expects t0,t1");
    o.spec.occlusion = std::pair{int(a), int(b)};
  }
  const SynthSequence seq = generate_sequence(o.spec);
  fs::create_directories(o.out);
  for (std::size_t k = 0; k < seq.frames.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "%05zu.%s", k + 1, o.format.c_str());
    if (o.format == "png")
      write_png(fs::path(o.out) / name, seq.frames[k]);
    else
      write_pgm(fs::path(o.out) / name, seq.frames[k]);
  }
  write_ground_truth(fs::path(o.out) / "gt.txt", seq.truth);
  const Box& b = seq.truth.front();
  std::cout << "wrote " << seq.frames.size() << " frames to " << o.out << "\ninit " << format_double(b.x) << ','
            << format_double(b.y) << ',' << format_double(b.w) << ',' << format_double(b.h) << '\n';
  return 0;
}

int run_eval(const std::string& results, const std::string& gt, const std::string& curves) {
  const auto rows = read_results(fs::path(results));
  const auto truth = read_ground_truth(fs::path(gt));
  const Summary s = summarize(rows, truth);
  if (!curves.empty()) write_curves(curves, rows, s, truth);
  print_summary(std::cout, rows.size(), &s, std::nullopt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metric-weighted linear representation tracker"};
  app.require_subcommand(1);

  TrackOptions track;
  CLI::App* track_cmd = app.add_subcommand("track", "track an object through a frame directory");
  track_cmd->add_option("--frames", track.frames, "directory of numbered .pgm/.png frames")->required();
  track_cmd->add_option("--gt", track.gt, "ground truth (frame,x,y,w,h per line, 1-based)");
  track_cmd->add_option("--init", track.init, "initial box x,y,w,h (default: ground truth of frame 1)");
  track_cmd->add_option("--out", track.out, "results CSV");
  track_cmd->add_option("--curves", track.curves, "per-frame CLE/VOR CSV (needs --gt)");
  add_tracker_flags(track_cmd, track);

  TrackOptions bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "time the tracker per phase");
  bench_cmd->add_option("--frames", bench.frames, "frame directory (default: a generated synthetic sequence)");
  bench_cmd->add_option("--gt", bench.gt, "ground truth");
  bench_cmd->add_option("--init", bench.init, "initial box x,y,w,h");
  int bench_length = 100;
  bench_cmd->add_option("--length", bench_length, "synthetic sequence length when --frames is absent");
  add_tracker_flags(bench_cmd, bench);

  SynthOptions synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic sequence");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--width", synth.spec.width);
  synth_cmd->add_option("--height", synth.spec.height);
  synth_cmd->add_option("--length", synth.spec.length, "frames");
  synth_cmd->add_option("--object-size", synth.spec.object_size);
  synth_cmd->add_option("--amplitude", synth.spec.amplitude, "radius of the circular path (px)");
  synth_cmd->add_option("--period", synth.spec.period, "frames per revolution");
  synth_cmd->add_option("--drift", synth.spec.drift, "appearance drift rate");
  synth_cmd->add_option("--correlated-noise", synth.spec.correlated_noise, "amplitude of drifting blotches");
  synth_cmd->add_option("--occlusion", synth.occlusion, "occluded frame range t0,t1 (1-based)");
  synth_cmd->add_option("--seed", synth.spec.seed);
  synth_cmd->add_option("--format", synth.format)->check(CLI::IsMember({"pgm", "png"}));

  std::string eval_results, eval_gt, eval_curves;
  CLI::App* eval_cmd = app.add_subcommand("eval", "recompute metrics from a results CSV");
  eval_cmd->add_option("--results", eval_results)->required();
  eval_cmd->add_option("--gt", eval_gt)->required();
  eval_cmd->add_option("--curves", eval_curves, "per-frame CLE/VOR CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*track_cmd) return run_track(track, false);
    if (*synth_cmd) return run_synth(synth);
    if (*eval_cmd) return run_eval(eval_results, eval_gt, eval_curves);
    if (*bench_cmd) {
      if (!bench.frames.empty()) return run_track(bench, true);
      // No frames given: bench on a generated sequence.
      SynthSpec spec;
      spec.length = bench_length;
      const SynthSequence seq = generate_sequence(spec);
      const TrackRun run = track_frames(seq.frames, seq.truth.front(), finish_config(bench));
      const Summary s = summarize(run.rows, numbered(seq.truth));
      print_summary(std::cout, run.rows.size(), &s, run.timing.mean_total());
      const double n = run.timing.frames;
      std::cout << std::fixed << std::setprecision(5);
      std::cout << "phase s/frame features " << run.timing.features / n << '\n';
      std::cout << "phase s/frame solve    " << run.timing.solve / n << '\n';
      std::cout << "phase s/frame reservoir " << run.timing.reservoir / n << '\n';
      std::cout << "phase s/frame metric   " << run.timing.metric_update / n << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
