#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "mwtrack/metric_learning.hpp"
#include "oracles.hpp"

namespace mwtrack {
namespace {

using testing::random_matrix;
using testing::random_vector;

Vector vec(std::initializer_list<double> v) {
  Vector out(Eigen::Index(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

MetricMatrix random_symmetric(std::mt19937_64& rng, Eigen::Index d) {
  const Matrix a = random_matrix(rng, d, d);
  return MetricMatrix::from_matrix(0.5 * (a + a.transpose()));
}

// Brute-force: forms U explicitly and evaluates every term elementwise.
struct ExplicitTerms {
  double u_frobenius_sq;
  double denominator;
};

ExplicitTerms explicit_terms(const Vector& a_plus, const Vector& a_minus) {
  const Eigen::Index d = a_plus.size();
  Matrix u(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) u(i, j) = a_minus[i] * a_minus[j] - a_plus[i] * a_plus[j];
  double fro = 0.0, mum = 0.0, pup = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      fro += u(i, j) * u(i, j);
      mum += a_minus[i] * u(i, j) * a_minus[j];
      pup += a_plus[i] * u(i, j) * a_plus[j];
    }
  }
  return {fro, 2.0 * mum - 2.0 * pup - fro};
}

TEST(Mahalanobis, SquaredEuclideanUnderIdentity) {
  const auto m = MetricMatrix::identity(2);
  EXPECT_DOUBLE_EQ(mahalanobis(m, vec({1, 2}), vec({0, 0})), 5.0);
  EXPECT_DOUBLE_EQ(mahalanobis(m, vec({1, 2}), vec({1, 2})), 0.0);
}

TEST(Mahalanobis, MatchesElementwiseExpansion) {
  std::mt19937_64 rng(1);
  const auto m = random_symmetric(rng, 7);
  const Vector p = random_vector(rng, 7), q = random_vector(rng, 7);
  double want = 0.0;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) want += (p[i] - q[i]) * m.matrix()(i, j) * (p[j] - q[j]);
  EXPECT_NEAR(mahalanobis(m, p, q), want, 1e-12 * (1.0 + std::abs(want)));
}

TEST(Mahalanobis, DimensionMismatch) {
  const auto m = MetricMatrix::identity(2);
  EXPECT_THROW((void)mahalanobis(m, vec({1, 2, 3}), vec({0, 0, 0})), Error);
}

TEST(HingeLoss, MarginSatisfiedAndViolated) {
  const auto m = MetricMatrix::identity(2);
  EXPECT_DOUBLE_EQ(hinge_loss(m, {vec({0, 0}), vec({0, 0}), vec({2, 0})}), 0.0);
  EXPECT_DOUBLE_EQ(hinge_loss(m, {vec({0, 0}), vec({0, 0}), vec({std::sqrt(0.5), 0})}), 0.5);
}

TEST(HingeLoss, ComposesFromDistances) {
  std::mt19937_64 rng(2);
  const auto m = random_symmetric(rng, 6);
  for (int k = 0; k < 20; ++k) {
    const Triplet t{random_vector(rng, 6), random_vector(rng, 6), random_vector(rng, 6)};
    const double want = std::max(0.0, 1.0 + mahalanobis(m, t.p, t.p_plus) - mahalanobis(m, t.p, t.p_minus));
    EXPECT_NEAR(hinge_loss(m, t), want, 1e-12 * (1.0 + want));
  }
}

TEST(StepLength, ZeroLossGivesZeroStep) {
  const auto m = MetricMatrix::identity(2);
  EXPECT_EQ(step_length(m, {vec({0, 0}), vec({0.1, 0}), vec({3, 0})}, {}), 0.0);
}

TEST(StepLength, DegenerateTripletGivesZeroStep) {
  const auto m = MetricMatrix::identity(2);
  // p+ == p- makes a+ == a-, so U = 0.
  EXPECT_EQ(step_length(m, {vec({0, 0}), vec({0.3, 0.1}), vec({0.3, 0.1})}, {}), 0.0);
}

TEST(StepLength, ClampedByAggressiveness) {
  const auto m = MetricMatrix::identity(2);
  LearnerConfig cfg;
  cfg.aggressiveness = 1e-3;
  EXPECT_DOUBLE_EQ(step_length(m, {vec({0, 0}), vec({0.5, 0}), vec({0, 0.6})}, cfg), 1e-3);
}

TEST(StepLength, DenominatorIdentityAgainstExplicitU) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 200; ++k) {
    const Vector ap = random_vector(rng, 9), am = random_vector(rng, 9);
    const ExplicitTerms want = explicit_terms(ap, am);
    const StepTerms got = step_terms(ap, am);
    EXPECT_NEAR(got.u_frobenius_sq, want.u_frobenius_sq, 1e-10 * want.u_frobenius_sq);
    EXPECT_NEAR(got.denominator, want.denominator, 1e-10 * want.u_frobenius_sq);
    // The denominator collapses to ||U||_F^2.
    EXPECT_NEAR(want.denominator, want.u_frobenius_sq, 1e-10 * want.u_frobenius_sq);
  }
}

TEST(Update, PassiveOnZeroLoss) {
  auto m = MetricMatrix::identity(2);
  const Matrix before = m.matrix();
  const auto rec = update(m, {vec({0, 0}), vec({0, 0.1}), vec({3, 0})}, {});
  EXPECT_EQ(rec.eta, 0.0);
  EXPECT_EQ(m.matrix(), before);
  EXPECT_EQ(m.version(), 0u);
}

TEST(Update, UnclampedStepZeroesTheLoss) {
  auto m = MetricMatrix::identity(3);
  const Triplet t{vec({0, 0, 0}), vec({0.4, 0.2, 0}), vec({0.1, 0.5, 0.3})};
  LearnerConfig cfg;
  cfg.aggressiveness = 1e6;
  const auto rec = update(m, t, cfg);
  ASSERT_GT(rec.eta, 0.0);
  EXPECT_LT(rec.eta, cfg.aggressiveness);
  EXPECT_NEAR(hinge_loss(m, t), 0.0, 1e-10);
  EXPECT_NEAR(rec.loss_after, 0.0, 1e-10);
}

TEST(Update, KeepsExactSymmetry) {
  std::mt19937_64 rng(4);
  auto m = MetricMatrix::identity(8);
  for (int k = 0; k < 100; ++k) {
    (void)update(m, {random_vector(rng, 8), random_vector(rng, 8), random_vector(rng, 8)}, {});
    ASSERT_EQ((m.matrix() - m.matrix().transpose()).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Update, RecordedLossMatchesRemeasuredLoss) {
  std::mt19937_64 rng(5);
  auto m = MetricMatrix::identity(6);
  for (int k = 0; k < 100; ++k) {
    const Triplet t{random_vector(rng, 6), random_vector(rng, 6), random_vector(rng, 6)};
    const auto rec = update(m, t, {});
    EXPECT_GE(rec.eta, 0.0);
    EXPECT_LE(rec.eta, 1.0);
    EXPECT_LE(rec.loss_after, rec.loss_before);
    if (rec.eta > 0.0) EXPECT_LT(rec.loss_after, rec.loss_before);
    EXPECT_NEAR(hinge_loss(m, t), rec.loss_after, 1e-9 * (1.0 + rec.loss_before));
  }
}

TEST(BatchUpdate, EmptyBatch) {
  auto m = MetricMatrix::identity(3);
  const auto summary = batch_update(m, std::vector<Triplet>{}, {});
  EXPECT_EQ(summary.loss_before, 0.0);
  EXPECT_EQ(summary.loss_after, 0.0);
  EXPECT_EQ(m.matrix(), Matrix::Identity(3, 3));
}

TEST(BatchUpdate, BatchOfOneEqualsUpdate) {
  const Triplet t{vec({0, 0}), vec({0.5, 0}), vec({0, 0.6})};
  auto a = MetricMatrix::identity(2);
  auto b = MetricMatrix::identity(2);
  const auto rec = update(a, t, {});
  const auto summary = batch_update(b, std::vector<Triplet>{t}, {});
  EXPECT_EQ(a.matrix(), b.matrix());
  ASSERT_EQ(summary.records.size(), 1u);
  EXPECT_EQ(summary.records[0].eta, rec.eta);
}

TEST(BatchUpdate, DimensionMismatchLeavesMetricUntouched) {
  auto m = MetricMatrix::identity(2);
  const std::vector<Triplet> batch{{vec({0, 0}), vec({0.5, 0}), vec({0, 0.6})},
                                   {vec({0, 0, 0}), vec({0.5, 0, 0}), vec({0, 0.6, 0})}};
  EXPECT_THROW((void)batch_update(m, batch, {}), Error);
  EXPECT_EQ(m.matrix(), Matrix::Identity(2, 2));
  EXPECT_EQ(m.version(), 0u);
}

TEST(BatchUpdate, ReducesLossOnCorrelatedClusters) {
  // Two Gaussian clusters in R^5 separated along one axis, with a strong
  // nuisance correlation between two other axes.
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  auto draw = [&](double offset) {
    Vector x(5);
    const double z = 1.5 * g(rng);
    x << offset + 0.2 * g(rng), z + 0.1 * g(rng), z + 0.1 * g(rng), 0.3 * g(rng), 0.3 * g(rng);
    return x;
  };
  std::vector<Triplet> batch;
  std::bernoulli_distribution coin(0.5);
  for (int k = 0; k < 500; ++k) {
    const double a = coin(rng) ? 1.0 : -1.0;
    batch.push_back({draw(a), draw(a), draw(-a)});
  }
  auto m = MetricMatrix::identity(5);
  const auto summary = batch_update(m, batch, {});
  EXPECT_GT(summary.loss_before, 0.0);
  EXPECT_LT(summary.loss_after, 0.5 * summary.loss_before);
}

}  // namespace
}  // namespace mwtrack
