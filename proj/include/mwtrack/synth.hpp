#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "mwtrack/error.hpp"
#include "mwtrack/eval.hpp"
#include "mwtrack/image.hpp"

namespace mwtrack {

/// Parameters of a synthetic tracking sequence: a textured square moving on a
/// circular path over a structured background.
struct SynthSpec {
  int width = 160;
  int height = 160;
  int length = 200;
  int object_size = 24;
  double amplitude = 40.0;  ///< radius of the circular path, px
  double period = 100.0;    ///< frames per revolution
  /// Appearance drift rate: the object's brightness ramps by `drift` gray
  /// levels per frame (reflected within +-40) and every pixel gets Gaussian
  /// noise with standard deviation 8 * drift.
  double drift = 0.5;
  /// Amplitude of smooth blotches painted on the object. Their positions and
  /// signed strengths follow slow random walks, so the perturbation is
  /// correlated in space and in time. 0 disables them.
  double correlated_noise = 0.0;
  int blob_count = 6;
  std::optional<std::pair<int, int>> occlusion;  ///< inclusive frame range (1-based)
  std::uint64_t seed = 0;

  void validate() const {
    require(width >= 8 && height >= 8, ErrorKind::invalid_input, "synthetic frame must be at least 8x8");
    require(length >= 1, ErrorKind::invalid_input, "sequence length must be at least 1");
    require(object_size >= 4, ErrorKind::invalid_input, "object size must be at least 4");
    require(amplitude >= 0.0, ErrorKind::invalid_input, "amplitude must be nonnegative");
    require(period > 0.0, ErrorKind::invalid_input, "period must be positive");
    require(drift >= 0.0, ErrorKind::invalid_input, "drift must be nonnegative");
    require(correlated_noise >= 0.0, ErrorKind::invalid_input, "correlated noise must be nonnegative");
    require(2.0 * amplitude + object_size < std::min(width, height), ErrorKind::invalid_input,
            "path does not fit inside the frame");
    if (occlusion)
      require(occlusion->first >= 1 && occlusion->first <= occlusion->second, ErrorKind::invalid_input,
              "occlusion range must be 1-based and ordered");
  }
};

struct SynthSequence {
  std::vector<GrayFrame> frames;
  std::vector<Box> truth;  ///< one box per frame
};

/// Object center at 0-based frame t.
inline std::pair<double, double> synth_center(const SynthSpec& spec, int t) {
  const double phase = 2.0 * std::numbers::pi * t / spec.period;
  const double cx0 = 0.5 * spec.width;
  const double cy0 = 0.5 * spec.height;
  return {cx0 + spec.amplitude * std::sin(phase), cy0 + spec.amplitude * std::cos(phase)};
}

namespace detail {

inline double synth_background(int x, int y) {
  const double waves = 40.0 * std::sin(x / 7.0) * std::cos(y / 11.0) + 20.0 * std::sin((x + 2.0 * y) / 17.0);
  const int tile = ((x / 20) + (y / 20)) % 3;
  return 110.0 + waves + 15.0 * tile;
}

// Object texture on [0, size)^2: a coarse checkerboard with a bright
// diagonal bar and a dark ring, distinct from the smooth background.
inline double synth_texture(double u, double v, double size) {
  const int cu = int(std::floor(4.0 * u / size));
  const int cv = int(std::floor(4.0 * v / size));
  double val = ((cu + cv) % 2 == 0) ? 200.0 : 60.0;
  if (std::abs(u - v) < 0.12 * size) val = 240.0;
  const double r = std::hypot(u - 0.5 * size, v - 0.5 * size);
  if (r > 0.28 * size && r < 0.38 * size) val = 20.0;
  return val;
}

inline double triangle(double x, double amplitude) {
  if (amplitude <= 0.0) return 0.0;
  const double period = 4.0 * amplitude;
  double m = std::fmod(x, period);
  if (m < 0.0) m += period;
  if (m < amplitude) return m;
  if (m < 3.0 * amplitude) return 2.0 * amplitude - m;
  return m - period;
}

}  // namespace detail

inline SynthSequence generate_sequence(const SynthSpec& spec) {
  spec.validate();
  SynthSequence seq;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double size = spec.object_size;
  const double noise_std = 8.0 * spec.drift;

  std::vector<double> background(std::size_t(spec.width) * std::size_t(spec.height));
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x)
      background[std::size_t(y) * std::size_t(spec.width) + std::size_t(x)] = detail::synth_background(x, y);

  std::optional<Box> occluder;
  if (spec.occlusion) {
    const auto [ox, oy] = synth_center(spec, spec.occlusion->first - 1);
    occluder = Box{ox - 0.5 * size, oy - 1.25 * size, 0.5 * size, 2.5 * size};
  }

  struct Blob {
    double u, v, amp;
  };
  std::vector<Blob> blobs;
  const double blob_sigma2 = std::pow(0.15 * size, 2);

  for (int t = 0; t < spec.length; ++t) {
    const auto [cx, cy] = synth_center(spec, t);
    const Box box = Box::centered(cx, cy, size, size);
    const double offset = detail::triangle(spec.drift * t, 40.0);

    if (spec.correlated_noise > 0.0) {
      if (blobs.empty()) {
        for (int k = 0; k < spec.blob_count; ++k) blobs.push_back({unit(rng) * size, unit(rng) * size, gauss(rng)});
      } else {
        for (Blob& b : blobs) {
          b.u = std::clamp(b.u + 0.3 * gauss(rng), 0.0, size);
          b.v = std::clamp(b.v + 0.3 * gauss(rng), 0.0, size);
          b.amp = std::clamp(b.amp + 0.1 * gauss(rng), -2.0, 2.0);
        }
      }
    }

    GrayFrame frame(spec.width, spec.height);
    const bool occluded = occluder && t + 1 >= spec.occlusion->first && t + 1 <= spec.occlusion->second;
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        double val = background[std::size_t(y) * std::size_t(spec.width) + std::size_t(x)];
        const double u = x + 0.5 - box.x;
        const double v = y + 0.5 - box.y;
        if (u >= 0.0 && u < size && v >= 0.0 && v < size) {
          val = detail::synth_texture(u, v, size) + offset;
          for (const Blob& b : blobs)
            val += spec.correlated_noise * b.amp * std::exp(-((u - b.u) * (u - b.u) + (v - b.v) * (v - b.v)) / (2.0 * blob_sigma2));
        }
        if (occluded && x + 0.5 >= occluder->x && x + 0.5 < occluder->x + occluder->w && y + 0.5 >= occluder->y &&
            y + 0.5 < occluder->y + occluder->h)
          val = 30.0;
        if (noise_std > 0.0) val += noise_std * gauss(rng);
        frame.at(x, y) = std::uint8_t(std::clamp(std::lround(val), 0L, 255L));
      }
    }
    seq.frames.push_back(std::move(frame));
    seq.truth.push_back(box);
  }
  return seq;
}

}  // namespace mwtrack
