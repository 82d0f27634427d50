#include "dmfsync/evaluation.h"

#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "dmfsync/errors.h"
#include "test_oracles.h"

namespace dmfsync {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<Rotation> RandomTruth(int n, std::mt19937_64& rng) {
  std::vector<Rotation> truth;
  for (int i = 0; i < n; ++i) {
    truth.push_back(Rotation::FromMatrixUnchecked(testing::RandomRotationMatrix(rng)));
  }
  return truth;
}

Rotation AboutAxis(const Eigen::Vector3d& axis, double angle) {
  return Rotation::FromMatrixUnchecked(testing::AxisAngleMatrix(axis, angle));
}

double ChordalCost(const std::vector<Rotation>& est,
                   const std::vector<Rotation>& gt, const Eigen::Matrix3d& q) {
  double cost = 0.0;
  for (size_t i = 0; i < est.size(); ++i) {
    cost += (est[i].matrix() * q - gt[i].matrix()).squaredNorm();
  }
  return cost;
}

TEST(Align, IdenticalInputsGiveIdentity) {
  std::mt19937_64 rng(1);
  const auto truth = RandomTruth(6, rng);
  EXPECT_LT((Align(truth, truth).matrix() - Eigen::Matrix3d::Identity()).norm(), 1e-12);
}

TEST(Align, RemovesExactGauge) {
  std::mt19937_64 rng(2);
  const auto truth = RandomTruth(8, rng);
  const Rotation q = Rotation::FromMatrixUnchecked(testing::RandomRotationMatrix(rng));
  std::vector<Rotation> estimate;
  for (const auto& r : truth) estimate.push_back(r * q.Transpose());
  EXPECT_LT((Align(estimate, truth).matrix() - q.matrix()).norm(), 1e-12);
  const ErrorReport report = AngularErrorReport(estimate, truth);
  for (double e : report.per_node_errors_deg) EXPECT_LT(e, 1e-6);
}

TEST(Align, BeatsRandomCandidates) {
  std::mt19937_64 rng(3);
  const auto truth = RandomTruth(5, rng);
  const auto estimate = RandomTruth(5, rng);
  const Eigen::Matrix3d q = Align(estimate, truth).matrix();
  const double best = ChordalCost(estimate, truth, q);
  for (int trial = 0; trial < 100000; ++trial) {
    ASSERT_LE(best, ChordalCost(estimate, truth, testing::RandomRotationMatrix(rng)) + 1e-12);
  }
}

TEST(Align, Errors) {
  std::mt19937_64 rng(4);
  const auto truth = RandomTruth(3, rng);
  EXPECT_THROW(Align({}, {}), DimensionMismatchError);
  EXPECT_THROW(Align(RandomTruth(2, rng), truth), DimensionMismatchError);
  // Two estimates anti-aligned about a common axis cancel to rank one.
  const std::vector<Rotation> gt = {Rotation(), Rotation()};
  const std::vector<Rotation> est = {AboutAxis(Eigen::Vector3d::UnitZ(), std::numbers::pi / 2),
                                     AboutAxis(Eigen::Vector3d::UnitZ(), -std::numbers::pi / 2)};
  EXPECT_THROW(Align(est, gt), DegenerateProjectionError);
}

TEST(AngularErrorReport, ZeroUpToGauge) {
  std::mt19937_64 rng(5);
  const auto truth = RandomTruth(9, rng);
  const Rotation q = Rotation::FromMatrixUnchecked(testing::RandomRotationMatrix(rng));
  std::vector<Rotation> estimate;
  for (const auto& r : truth) estimate.push_back(r * q);
  const ErrorReport report = AngularErrorReport(estimate, truth);
  EXPECT_LT(report.mean_deg, 1e-6);
  EXPECT_LT(report.median_deg, 1e-6);
  EXPECT_EQ(report.per_node_errors_deg.size(), 9u);
}

TEST(AngularErrorReport, BalancedPerturbationsKeepGauge) {
  // Opposite perturbations about the same axis cancel in the alignment sum,
  // so the gauge stays exact and the errors are the constructed angles.
  std::mt19937_64 rng(6);
  const auto truth = RandomTruth(7, rng);
  const Eigen::Vector3d axes[3] = {Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitX(),
                                   Eigen::Vector3d::UnitY()};
  const double angles[3] = {1.0, 2.0, 9.0};
  std::vector<Rotation> estimate = {truth[0]};
  for (int k = 0; k < 3; ++k) {
    estimate.push_back(truth[1 + 2 * k] * AboutAxis(axes[k], angles[k] * kDeg));
    estimate.push_back(truth[2 + 2 * k] * AboutAxis(axes[k], -angles[k] * kDeg));
  }
  const ErrorReport report = AngularErrorReport(estimate, truth);
  EXPECT_LT((report.alignment.matrix() - Eigen::Matrix3d::Identity()).norm(), 1e-12);
  EXPECT_NEAR(report.median_deg, 2.0, 1e-9);
  EXPECT_NEAR(report.mean_deg, 24.0 / 7.0, 1e-9);
}

TEST(AngularErrorReport, ThreeNodeStatisticsAgainstSearchedGauge) {
  std::mt19937_64 rng(7);
  const auto truth = RandomTruth(3, rng);
  const std::vector<Rotation> estimate = {
      truth[0] * AboutAxis(Eigen::Vector3d::UnitX(), 1.0 * kDeg),
      truth[1] * AboutAxis(Eigen::Vector3d::UnitY(), 2.0 * kDeg),
      truth[2] * AboutAxis(Eigen::Vector3d::UnitZ(), 9.0 * kDeg)};
  const ErrorReport report = AngularErrorReport(estimate, truth);

  // Independent gauge: hill-climb the chordal cost from the identity.
  Eigen::Matrix3d q = Eigen::Matrix3d::Identity();
  std::normal_distribution<double> normal;
  double cost = ChordalCost(estimate, truth, q);
  for (double scale = 0.1; scale > 1e-8; scale *= 0.5) {
    for (int trial = 0; trial < 300; ++trial) {
      const Eigen::Matrix3d candidate =
          q * testing::AxisAngleMatrix(
                  Eigen::Vector3d(normal(rng), normal(rng), normal(rng)),
                  scale * normal(rng));
      const double c = ChordalCost(estimate, truth, candidate);
      if (c < cost) {
        cost = c;
        q = candidate;
      }
    }
  }
  std::vector<double> expected;
  for (int i = 0; i < 3; ++i) {
    expected.push_back(testing::AngleBetween(estimate[i].matrix() * q,
                                             truth[i].matrix()) / kDeg);
    EXPECT_NEAR(report.per_node_errors_deg[i], expected[i], 1e-4);
  }
  std::sort(expected.begin(), expected.end());
  EXPECT_NEAR(report.median_deg, expected[1], 1e-4);
  EXPECT_NEAR(report.mean_deg, (expected[0] + expected[1] + expected[2]) / 3, 1e-4);
  // The 9 degree node dominates; alignment spreads part of it to the others.
  EXPECT_GT(expected[2], 4.0);
}

TEST(AngularErrorReport, SingleNodeIsAbsorbedByGauge) {
  std::mt19937_64 rng(8);
  const auto a = RandomTruth(1, rng);
  const auto b = RandomTruth(1, rng);
  const ErrorReport report = AngularErrorReport(a, b);
  EXPECT_LT(report.mean_deg, 1e-6);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(Median({9.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(Median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_EQ(Median({5.0}), 5.0);
}

}  // namespace
}  // namespace dmfsync
