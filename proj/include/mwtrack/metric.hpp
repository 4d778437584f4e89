#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "mwtrack/error.hpp"

namespace mwtrack {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/**
 * Symmetric d x d matrix defining the (pseudo-)metric D(p, q) = (p-q)' M (p-q).
 *
 * Every mutation bumps version(), which lets a BasisSet detect that its cached
 * inverse was computed against an older metric. Mutations go through
 * symmetric rank-one forms only, so exact symmetry is preserved entry by entry.
 */
class MetricMatrix {
 public:
  MetricMatrix() = default;

  static MetricMatrix identity(Eigen::Index dim) {
    require(dim > 0, ErrorKind::invalid_input, "metric dimension must be positive");
    MetricMatrix m;
    m.entries_ = Matrix::Identity(dim, dim);
    return m;
  }

  /// Takes ownership of an explicit matrix; it must be square and symmetric.
  static MetricMatrix from_matrix(Matrix entries) {
    require(entries.rows() > 0 && entries.rows() == entries.cols(), ErrorKind::invalid_input,
            "metric must be a nonempty square matrix");
    const double scale = entries.cwiseAbs().maxCoeff();
    const double asym = (entries - entries.transpose()).cwiseAbs().maxCoeff();
    require(asym <= 1e-12 * (scale > 0.0 ? scale : 1.0), ErrorKind::invalid_input,
            "metric must be symmetric");
    MetricMatrix m;
    m.entries_ = std::move(entries);
    return m;
  }

  Eigen::Index dim() const { return entries_.rows(); }
  const Matrix& matrix() const { return entries_; }
  std::uint64_t version() const { return version_; }

  /// M <- M + s * a a'. Only the lower triangle is computed and mirrored.
  void add_rank_one(const Vector& a, double s) {
    check_dim(a.size());
    if (s == 0.0) return;
    const Eigen::Index d = dim();
    for (Eigen::Index j = 0; j < d; ++j) {
      const double saj = s * a[j];
      if (saj == 0.0) continue;
      for (Eigen::Index i = j; i < d; ++i) entries_(i, j) += saj * a[i];
    }
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index i = j + 1; i < d; ++i) entries_(j, i) = entries_(i, j);
    ++version_;
  }

  /// M <- M + eta (a_minus a_minus' - a_plus a_plus'), the triplet update form.
  void add_triplet_update(double eta, const Vector& a_minus, const Vector& a_plus) {
    check_dim(a_minus.size());
    check_dim(a_plus.size());
    if (eta == 0.0) return;
    const Eigen::Index d = dim();
    for (Eigen::Index j = 0; j < d; ++j) {
      const double mj = eta * a_minus[j];
      const double pj = eta * a_plus[j];
      for (Eigen::Index i = j; i < d; ++i) entries_(i, j) += mj * a_minus[i] - pj * a_plus[i];
    }
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index i = j + 1; i < d; ++i) entries_(j, i) = entries_(i, j);
    ++version_;
  }

  /// Bilinear form v' M v.
  double quadratic(const Vector& v) const {
    check_dim(v.size());
    return v.dot(entries_ * v);
  }

  void check_dim(Eigen::Index n) const {
    if (n != dim())
      fail(ErrorKind::invalid_input,
           "dimension mismatch: metric is " + std::to_string(dim()) + ", vector is " + std::to_string(n));
  }

 private:
  Matrix entries_;
  std::uint64_t version_ = 0;
};

}  // namespace mwtrack
