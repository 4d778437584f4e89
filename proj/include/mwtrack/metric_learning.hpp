#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "mwtrack/error.hpp"
#include "mwtrack/metric.hpp"

namespace mwtrack {

/// Proximity comparison: `p` should be closer to `p_plus` (same class) than to
/// `p_minus` (other class) by a unit margin.
struct Triplet {
  Vector p;
  Vector p_plus;
  Vector p_minus;
};

struct LearnerConfig {
  double aggressiveness = 1.0;  ///< C, upper clamp on the step length
  /// Triplets with ||U||_F below this times (|a+|^2 + |a-|^2) are skipped.
  double degenerate_rel = 1e-12;
};

struct UpdateRecord {
  double eta = 0.0;
  Vector a_plus;   ///< p - p_plus
  Vector a_minus;  ///< p - p_minus
  double loss_before = 0.0;
  double loss_after = 0.0;
};

struct BatchSummary {
  double loss_before = 0.0;  ///< sum of hinge losses over the batch before any update
  double loss_after = 0.0;   ///< same sum under the final metric
  std::vector<UpdateRecord> records;
  int updates_applied = 0;   ///< records with eta > 0
};

inline double mahalanobis(const MetricMatrix& metric, const Vector& p, const Vector& q) {
  metric.check_dim(p.size());
  metric.check_dim(q.size());
  return metric.quadratic(p - q);
}

namespace detail {

inline void check_triplet(const MetricMatrix& metric, const Triplet& t) {
  metric.check_dim(t.p.size());
  metric.check_dim(t.p_plus.size());
  metric.check_dim(t.p_minus.size());
}

// 1 + D(p, p+) - D(p, p-), before the max{0, .} clamp.
inline double margin_violation(const MetricMatrix& metric, const Vector& a_plus, const Vector& a_minus) {
  return 1.0 + metric.quadratic(a_plus) - metric.quadratic(a_minus);
}

}  // namespace detail

inline double hinge_loss(const MetricMatrix& metric, const Triplet& t) {
  detail::check_triplet(metric, t);
  return std::max(0.0, detail::margin_violation(metric, t.p - t.p_plus, t.p - t.p_minus));
}

/// Terms of U = a- a-' - a+ a+' needed by the step length, from inner products
/// only (U is never formed).
struct StepTerms {
  double u_frobenius_sq = 0.0;  ///< ||U||_F^2
  double denominator = 0.0;     ///< 2 a-'U a- - 2 a+'U a+ - ||U||_F^2
};

inline StepTerms step_terms(const Vector& a_plus, const Vector& a_minus) {
  const double pp = a_plus.squaredNorm();
  const double mm = a_minus.squaredNorm();
  const double pm = a_plus.dot(a_minus);
  const double minus_u_minus = mm * mm - pm * pm;  // a-' U a-
  const double plus_u_plus = pm * pm - pp * pp;    // a+' U a+
  StepTerms terms;
  terms.u_frobenius_sq = std::max(0.0, mm * mm + pp * pp - 2.0 * pm * pm);
  terms.denominator = 2.0 * minus_u_minus - 2.0 * plus_u_plus - terms.u_frobenius_sq;
  return terms;
}

namespace detail {

inline bool degenerate(const StepTerms& terms, const Vector& a_plus, const Vector& a_minus,
                       const LearnerConfig& cfg) {
  const double floor = cfg.degenerate_rel * (a_plus.squaredNorm() + a_minus.squaredNorm());
  return std::sqrt(terms.u_frobenius_sq) < floor || terms.denominator <= 0.0;
}

inline double clamp_step(double violation, const StepTerms& terms, const LearnerConfig& cfg) {
  return std::min(cfg.aggressiveness, std::max(0.0, violation / terms.denominator));
}

}  // namespace detail

/// Passive-aggressive step length, clamped to [0, C].
inline double step_length(const MetricMatrix& metric, const Triplet& t, const LearnerConfig& cfg) {
  detail::check_triplet(metric, t);
  const Vector a_plus = t.p - t.p_plus;
  const Vector a_minus = t.p - t.p_minus;
  const StepTerms terms = step_terms(a_plus, a_minus);
  if (detail::degenerate(terms, a_plus, a_minus, cfg)) return 0.0;
  return detail::clamp_step(detail::margin_violation(metric, a_plus, a_minus), terms, cfg);
}

/**
 * One online update M <- M + eta (a- a-' - a+ a+'). Passive (M untouched)
 * when the triplet already satisfies its margin or is degenerate.
 */
inline UpdateRecord update(MetricMatrix& metric, const Triplet& t, const LearnerConfig& cfg) {
  detail::check_triplet(metric, t);
  UpdateRecord rec;
  rec.a_plus = t.p - t.p_plus;
  rec.a_minus = t.p - t.p_minus;
  const double violation = detail::margin_violation(metric, rec.a_plus, rec.a_minus);
  rec.loss_before = std::max(0.0, violation);
  rec.loss_after = rec.loss_before;
  if (rec.loss_before <= 0.0) return rec;

  const StepTerms terms = step_terms(rec.a_plus, rec.a_minus);
  if (detail::degenerate(terms, rec.a_plus, rec.a_minus, cfg)) return rec;
  rec.eta = detail::clamp_step(violation, terms, cfg);
  if (rec.eta <= 0.0) return rec;

  metric.add_triplet_update(rec.eta, rec.a_minus, rec.a_plus);
  rec.loss_after = std::max(0.0, violation - rec.eta * terms.u_frobenius_sq);
  return rec;
}

/// Applies `update` to each triplet in order. Every triplet is validated
/// before the metric is touched.
inline BatchSummary batch_update(MetricMatrix& metric, std::span<const Triplet> triplets,
                                 const LearnerConfig& cfg) {
  for (const Triplet& t : triplets) detail::check_triplet(metric, t);
  BatchSummary summary;
  summary.records.reserve(triplets.size());
  for (const Triplet& t : triplets) summary.loss_before += hinge_loss(metric, t);
  for (const Triplet& t : triplets) {
    summary.records.push_back(update(metric, t, cfg));
    if (summary.records.back().eta > 0.0) ++summary.updates_applied;
  }
  for (const Triplet& t : triplets) summary.loss_after += hinge_loss(metric, t);
  return summary;
}

}  // namespace mwtrack
