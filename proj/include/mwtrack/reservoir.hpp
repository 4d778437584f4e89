#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mwtrack/error.hpp"

namespace mwtrack {

enum class SampleClass { foreground, background };

/// Uniform draw in the open interval (0, 1).
template <typename Rng>
double open_unit(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  double u = 0.0;
  do {
    u = dist(rng);
  } while (u <= 0.0 || u >= 1.0);
  return u;
}

template <typename Payload>
struct BufferedSample {
  Payload feature;
  std::int64_t frame_index = 0;
  double u = 0.5;
  double log_u = std::log(0.5);  ///< ln(u) < 0
};

/**
 * Fixed-capacity reservoir with time-weighted keys.
 *
 * A sample arriving at frame I gets weight w = q^I and key k = u^(1/w). Keys
 * are compared in the log domain rebased to a reference frame R:
 *   ln(u) * q^(R - I),
 * which is the order-preserving transform k -> k^(q^R). Only age differences
 * enter the exponent, so large frame indices never overflow; very old items
 * saturate to -inf and are evicted first.
 *
 * When an insertion evicts an item, the evicted slot is erased and the new
 * sample is appended, so slot order always matches a basis that mirrors the
 * buffer through remove-then-append.
 */
template <typename Payload>
class ReservoirBuffer {
 public:
  using Item = BufferedSample<Payload>;

  struct InsertResult {
    bool inserted = false;
    std::optional<std::size_t> evicted;  ///< slot index that was removed
  };

  ReservoirBuffer(std::size_t capacity, double q, SampleClass label = SampleClass::foreground)
      : capacity_(capacity), q_(q), log_q_(std::log(q)), label_(label) {
    require(capacity > 0, ErrorKind::invalid_input, "reservoir capacity must be positive");
    require(q > 0.0 && std::isfinite(q), ErrorKind::invalid_input, "time-weight factor q must be positive");
    items_.reserve(capacity);
  }

  std::size_t capacity() const { return capacity_; }
  double q() const { return q_; }
  SampleClass label() const { return label_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<Item>& items() const { return items_; }
  const Item& operator[](std::size_t i) const { return items_[i]; }

  double effective_log_key(const Item& item, std::int64_t reference_frame) const {
    require(reference_frame >= item.frame_index, ErrorKind::invalid_input,
            "reference frame precedes the item's frame");
    const double age = double(reference_frame - item.frame_index);
    if (age == 0.0) return item.log_u;
    const double factor = std::exp(age * log_q_);
    return item.log_u * factor;  // -inf when factor overflows
  }

  /// Slot with the smallest key; ties go to the lowest index.
  std::pair<std::size_t, double> min_key_item(std::int64_t reference_frame) const {
    require(!items_.empty(), ErrorKind::empty_buffer, "min_key_item on an empty reservoir");
    std::size_t best = 0;
    double best_key = effective_log_key(items_[0], reference_frame);
    for (std::size_t i = 1; i < items_.size(); ++i) {
      const double key = effective_log_key(items_[i], reference_frame);
      if (key < best_key) {
        best = i;
        best_key = key;
      }
    }
    return {best, best_key};
  }

  /// Offers a sample observed at `frame_index`. Always consumes one uniform
  /// draw from `rng`, whether or not the sample is kept.
  template <typename Rng>
  InsertResult insert(Payload sample, std::int64_t frame_index, Rng& rng) {
    check_payload(sample);
    require(items_.empty() || frame_index >= newest_frame_, ErrorKind::invalid_input,
            "samples must arrive in frame order");
    const double u = open_unit(rng);
    Item item{std::move(sample), frame_index, u, std::log(u)};
    InsertResult result;
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
      result.inserted = true;
    } else {
      const auto [slot, key] = min_key_item(frame_index);
      if (item.log_u > key) {
        items_.erase(items_.begin() + std::ptrdiff_t(slot));
        items_.push_back(std::move(item));
        result.inserted = true;
        result.evicted = slot;
      }
    }
    newest_frame_ = std::max(newest_frame_, frame_index);
    return result;
  }

 private:
  void check_payload(const Payload& sample) const {
    if constexpr (requires { { sample.size() } -> std::convertible_to<std::ptrdiff_t>; }) {
      if (!items_.empty() && std::ptrdiff_t(sample.size()) != std::ptrdiff_t(items_.front().feature.size()))
        fail(ErrorKind::invalid_input, "sample dimension " + std::to_string(sample.size()) +
                                           " does not match buffer dimension " +
                                           std::to_string(items_.front().feature.size()));
    }
  }

  std::size_t capacity_;
  double q_;
  double log_q_;
  SampleClass label_;
  std::vector<Item> items_;
  std::int64_t newest_frame_ = std::numeric_limits<std::int64_t>::min();
};

}  // namespace mwtrack
