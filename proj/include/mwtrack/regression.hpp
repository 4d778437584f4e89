#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mwtrack/error.hpp"
#include "mwtrack/metric.hpp"

namespace mwtrack {

/// Singularity cutoffs for the incremental inverse updates and the
/// pseudoinverse fallback. All are relative to the local scale of the quantity
/// being tested.
struct RegressionTolerances {
  double schur = 1e-10;        ///< expand: |r - c'Hc| vs |r| + |c'Hc|
  double removal = 1e-10;      ///< remove: |H(i,i)| vs max |diag(H)|
  double rank_one = 1e-10;     ///< Sherman-Morrison: |1 + v'Hu| vs 1 + |v'Hu|
  double pinv = 1e-10;         ///< rebuild: eigenvalues below pinv * max |eigenvalue| are dropped
};

/// Solution of min_x (y - Px)' M (y - Px).
struct Representation {
  Vector coefficients;
  double residual = 0.0;
  /// True when the raw residual was negative (indefinite metric) and was
  /// clamped to zero.
  bool clamped = false;
};

/**
 * Basis samples P (one column per sample) together with the cached inverse
 * H = (P' M P)^{-1}, maintained incrementally under column expansion, removal,
 * replacement and rank-one changes of M.
 *
 * All mutators give the strong exception guarantee: on error the basis is left
 * exactly as it was, so the caller can fall back to rebuild().
 *
 * Column indices are zero-based.
 */
class BasisSet {
 public:
  BasisSet() = default;

  /// Empty basis for samples of dimension `dim`, current against `metric`.
  explicit BasisSet(const MetricMatrix& metric, RegressionTolerances tol = {})
      : samples_(metric.dim(), 0), inverse_(0, 0), metric_version_(metric.version()), tol_(tol) {}

  /// Builds from explicit columns with a from-scratch inverse.
  BasisSet(Matrix samples, const MetricMatrix& metric, RegressionTolerances tol = {})
      : samples_(std::move(samples)), tol_(tol) {
    metric.check_dim(samples_.rows());
    rebuild(metric);
  }

  Eigen::Index size() const { return samples_.cols(); }
  Eigen::Index dim() const { return samples_.rows(); }
  bool empty() const { return samples_.cols() == 0; }
  const Matrix& samples() const { return samples_; }
  const Matrix& cached_inverse() const { return inverse_; }
  std::uint64_t metric_version() const { return metric_version_; }
  int edits_since_rebuild() const { return edits_since_rebuild_; }
  /// Whether the last rebuild had to truncate the spectrum.
  bool uses_pseudoinverse() const { return pseudoinverse_; }
  const RegressionTolerances& tolerances() const { return tol_; }

  /// Declares the cache current for `metric` after the caller has mirrored a
  /// metric change through apply_metric_rank_one().
  void mark_current(const MetricMatrix& metric) {
    metric.check_dim(dim());
    metric_version_ = metric.version();
  }

  /// x* = H P' M y and its residual (y - Px*)' M (y - Px*), clamped at 0.
  Representation solve(const MetricMatrix& metric, const Vector& y) const {
    check_solvable(metric);
    metric.check_dim(y.size());
    const Vector my = metric.matrix() * y;
    Representation rep;
    rep.coefficients = inverse_ * (samples_.transpose() * my);
    const Vector diff = y - samples_ * rep.coefficients;
    const double raw = diff.dot(metric.matrix() * diff);
    rep.clamped = raw < 0.0;
    rep.residual = rep.clamped ? 0.0 : raw;
    return rep;
  }

  /// Residuals for every column of `ys`; `metric_ys` must equal M * ys. The
  /// product is passed in so two bases sharing a metric compute it once.
  Vector residuals(const MetricMatrix& metric, const Matrix& ys, const Matrix& metric_ys,
                   int* clamped_count = nullptr) const {
    check_solvable(metric);
    metric.check_dim(ys.rows());
    require(metric_ys.rows() == ys.rows() && metric_ys.cols() == ys.cols(), ErrorKind::invalid_input,
            "metric_ys shape does not match ys");
    const Matrix coeffs = inverse_ * (samples_.transpose() * metric_ys);
    const Matrix diff = ys - samples_ * coeffs;
    const Matrix mdiff = metric.matrix() * diff;
    Vector out(ys.cols());
    int clamped = 0;
    for (Eigen::Index k = 0; k < ys.cols(); ++k) {
      const double raw = diff.col(k).dot(mdiff.col(k));
      if (raw < 0.0) ++clamped;
      out[k] = std::max(raw, 0.0);
    }
    if (clamped_count != nullptr) *clamped_count = clamped;
    return out;
  }

  Vector residuals(const MetricMatrix& metric, const Matrix& ys) const {
    return residuals(metric, ys, metric.matrix() * ys);
  }

  /// Appends `sample` as the last column using the block inverse update.
  void expand(const MetricMatrix& metric, const Vector& sample) {
    check_current(metric);
    metric.check_dim(sample.size());
    const Vector m_sample = metric.matrix() * sample;
    const double r = sample.dot(m_sample);
    const Eigen::Index n = size();
    const Vector c = samples_.transpose() * m_sample;
    const Vector hc = inverse_ * c;
    const double chc = c.dot(hc);
    const double schur = r - chc;
    const double scale = std::abs(r) + std::abs(chc);
    if (!(std::abs(schur) > tol_.schur * scale))
      fail(ErrorKind::near_singular_expansion,
           "Schur complement " + std::to_string(schur) + " relative to scale " + std::to_string(scale));

    Matrix next(n + 1, n + 1);
    next.topLeftCorner(n, n) = inverse_ + (hc * hc.transpose()) / schur;
    next.topRightCorner(n, 1) = -hc / schur;
    next.bottomLeftCorner(1, n) = -hc.transpose() / schur;
    next(n, n) = 1.0 / schur;

    Matrix grown(dim(), n + 1);
    grown.leftCols(n) = samples_;
    grown.col(n) = sample;

    samples_.swap(grown);
    inverse_.swap(next);
    ++edits_since_rebuild_;
  }

  /// Deletes column `index` with the decremental inverse update.
  void remove(Eigen::Index index) {
    const Eigen::Index n = size();
    if (index < 0 || index >= n)
      fail(ErrorKind::invalid_input, "column index " + std::to_string(index) + " out of range");
    require(n >= 2, ErrorKind::invalid_input, "cannot remove from a basis with fewer than 2 columns");
    const double pivot = inverse_(index, index);
    const double scale = inverse_.diagonal().cwiseAbs().maxCoeff();
    if (!(std::abs(pivot) > tol_.removal * scale))
      fail(ErrorKind::degenerate_removal, "pivot H(i,i) = " + std::to_string(pivot));

    const std::vector<Eigen::Index> keep = all_but(n, index);
    const auto ki = Eigen::Index(keep.size());
    Vector col(ki);
    for (Eigen::Index a = 0; a < ki; ++a) col[a] = inverse_(keep[a], index);
    Matrix next(ki, ki);
    for (Eigen::Index b = 0; b < ki; ++b)
      for (Eigen::Index a = 0; a < ki; ++a)
        next(a, b) = inverse_(keep[a], keep[b]) - col[a] * col[b] / pivot;

    Matrix shrunk(dim(), ki);
    for (Eigen::Index a = 0; a < ki; ++a) shrunk.col(a) = samples_.col(keep[a]);

    samples_.swap(shrunk);
    inverse_.swap(next);
    ++edits_since_rebuild_;
  }

  /// Removes column `index` and appends `sample` as the new last column.
  void replace(const MetricMatrix& metric, Eigen::Index index, const Vector& sample) {
    check_current(metric);
    metric.check_dim(sample.size());
    BasisSet next = *this;
    next.remove(index);
    next.expand(metric, sample);
    *this = std::move(next);
  }

  /**
   * Mirrors M <- M + s a a' into the cache via Sherman-Morrison with
   * u = s P'a and v = P'a. The basis is not marked current; the caller does
   * that once the whole metric update has been applied.
   */
  void apply_metric_rank_one(const Vector& direction, double scale) {
    require(direction.size() == dim(), ErrorKind::invalid_input, "direction dimension mismatch");
    if (scale == 0.0 || empty()) {
      ++edits_since_rebuild_;
      return;
    }
    const Vector v = samples_.transpose() * direction;
    const Vector hv = inverse_ * v;
    const double vhv = v.dot(hv);
    const double denom = 1.0 + scale * vhv;
    if (!(std::abs(denom) > tol_.rank_one * (1.0 + std::abs(scale * vhv))))
      fail(ErrorKind::rank_one_singularity, "1 + v'Hu = " + std::to_string(denom));
    inverse_.noalias() -= (scale / denom) * (hv * hv.transpose());
    ++edits_since_rebuild_;
  }

  /// Recomputes H from scratch, truncating the spectrum when P'MP is singular.
  void rebuild(const MetricMatrix& metric) {
    metric.check_dim(dim());
    const Eigen::Index n = size();
    Matrix next(n, n);
    bool pinv = false;
    if (n > 0) {
      const Matrix mp = metric.matrix() * samples_;
      Matrix gram = samples_.transpose() * mp;
      gram = 0.5 * (gram + gram.transpose()).eval();
      next = symmetric_pseudoinverse(gram, tol_.pinv, &pinv);
    }
    inverse_.swap(next);
    pseudoinverse_ = pinv;
    metric_version_ = metric.version();
    edits_since_rebuild_ = 0;
  }

  /// Inverse of a symmetric (possibly indefinite) matrix through its
  /// eigendecomposition; eigenvalues with |lambda| <= rel * max |lambda| are
  /// treated as zero. Sets *truncated when any were dropped.
  static Matrix symmetric_pseudoinverse(const Matrix& sym, double rel, bool* truncated = nullptr) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    const Vector& lambda = eig.eigenvalues();
    const double top = lambda.cwiseAbs().maxCoeff();
    const double cutoff = rel * top;
    Vector inv(lambda.size());
    bool dropped = false;
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
      if (std::abs(lambda[k]) > cutoff && top > 0.0) {
        inv[k] = 1.0 / lambda[k];
      } else {
        inv[k] = 0.0;
        dropped = true;
      }
    }
    if (truncated != nullptr) *truncated = dropped;
    const Matrix& vecs = eig.eigenvectors();
    Matrix out = vecs * inv.asDiagonal() * vecs.transpose();
    return 0.5 * (out + out.transpose());
  }

 private:
  void check_solvable(const MetricMatrix& metric) const {
    require(!empty(), ErrorKind::empty_basis, "solve needs at least one basis sample");
    check_current(metric);
  }

  void check_current(const MetricMatrix& metric) const {
    metric.check_dim(dim());
    if (metric.version() != metric_version_)
      fail(ErrorKind::stale_cache, "basis cached against metric version " + std::to_string(metric_version_) +
                                       ", metric is at " + std::to_string(metric.version()));
  }

  static std::vector<Eigen::Index> all_but(Eigen::Index n, Eigen::Index skip) {
    std::vector<Eigen::Index> keep;
    keep.reserve(std::size_t(n - 1));
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != skip) keep.push_back(k);
    return keep;
  }

  Matrix samples_;
  Matrix inverse_;
  std::uint64_t metric_version_ = 0;
  int edits_since_rebuild_ = 0;
  bool pseudoinverse_ = false;
  RegressionTolerances tol_;
};

/// Free-function form of BasisSet::solve.
inline Representation solve(const BasisSet& basis, const MetricMatrix& metric, const Vector& y) {
  return basis.solve(metric, y);
}

}  // namespace mwtrack
