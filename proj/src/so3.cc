#include "dmfsync/so3.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "dmfsync/errors.h"

namespace dmfsync {

Rotation Rotation::FromMatrix(const Eigen::Matrix3d& m, double tolerance) {
  if (!IsRotation(m, tolerance)) {
    std::ostringstream msg;
    msg << "matrix is not a rotation (orthogonality residual "
        << OrthogonalityResidual(m) << ", det " << m.determinant() << ")";
    throw InvariantError(msg.str());
  }
  return Rotation(m);
}

double OrthogonalityResidual(const Eigen::Matrix3d& m) {
  return (m * m.transpose() - Eigen::Matrix3d::Identity()).norm();
}

bool IsRotation(const Eigen::Matrix3d& m, double tolerance) {
  if (!m.allFinite()) return false;
  return OrthogonalityResidual(m) <= tolerance &&
         std::abs(m.determinant() - 1.0) <= tolerance;
}

Rotation FromEuler(double yaw, double pitch, double roll) {
  const Eigen::Matrix3d m =
      (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
       Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
          .toRotationMatrix();
  return Rotation::FromMatrixUnchecked(m);
}

Rotation FromAngleAxis(const AngleAxis& angle_axis) {
  const Eigen::Vector3d& k = angle_axis.axis;
  Eigen::Matrix3d skew;
  skew << 0.0, -k.z(), k.y(),
          k.z(), 0.0, -k.x(),
          -k.y(), k.x(), 0.0;
  const double s = std::sin(angle_axis.angle);
  const double c = std::cos(angle_axis.angle);
  const Eigen::Matrix3d m =
      Eigen::Matrix3d::Identity() + s * skew + (1.0 - c) * skew * skew;
  return Rotation::FromMatrixUnchecked(m);
}

AngleAxis ToAngleAxis(const Rotation& rotation) {
  const Eigen::AngleAxisd aa(rotation.matrix());
  AngleAxis out;
  out.angle = aa.angle();
  out.axis = aa.angle() == 0.0 ? Eigen::Vector3d::UnitZ() : aa.axis();
  if (out.angle > std::numbers::pi) {
    out.angle = 2.0 * std::numbers::pi - out.angle;
    out.axis = -out.axis;
  }
  return out;
}

double GeodesicDistance(const Rotation& a, const Rotation& b) {
  // atan2 of the sine and cosine parts equals the clamped arccos of the
  // cosine on SO(3) but keeps full precision for tiny angles.
  const Eigen::Matrix3d r = a.matrix().transpose() * b.matrix();
  const double cos_angle = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double sin_angle =
      0.5 * Eigen::Vector3d(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1))
                .norm();
  return std::atan2(sin_angle, cos_angle);
}

Rotation ProjectToSO3(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) {
    throw DegenerateProjectionError("cannot project a non-finite matrix");
  }
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d& sigma = svd.singularValues();
  if (sigma(0) == 0.0 || sigma(1) <= 1e-12 * sigma(0)) {
    throw DegenerateProjectionError(
        "nearest rotation is not unique (rank < 2)");
  }
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, (u * v.transpose()).determinant() < 0 ? -1.0 : 1.0);
  return Rotation::FromMatrixUnchecked(u * d.asDiagonal() * v.transpose());
}

Rotation RandomRotation(std::mt19937_64& rng, SamplingMode mode) {
  switch (mode) {
    case SamplingMode::kEulerUniform: {
      constexpr double kPi = std::numbers::pi;
      std::uniform_real_distribution<double> full(-kPi, kPi);
      std::uniform_real_distribution<double> half(-kPi / 2.0, kPi / 2.0);
      const double yaw = full(rng);
      const double pitch = half(rng);
      const double roll = full(rng);
      return FromEuler(yaw, pitch, roll);
    }
    case SamplingMode::kHaarUniform: {
      std::normal_distribution<double> normal(0.0, 1.0);
      Eigen::Quaterniond q;
      do {
        q.w() = normal(rng);
        q.x() = normal(rng);
        q.y() = normal(rng);
        q.z() = normal(rng);
      } while (q.norm() < 1e-12);
      q.normalize();
      return Rotation::FromMatrixUnchecked(q.toRotationMatrix());
    }
  }
  return Rotation();
}

Rotation RandomPerturbation(double sigma, std::mt19937_64& rng,
                            double* sampled_angle) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector3d axis;
  do {
    // Sequenced draws; argument evaluation order is unspecified.
    axis.x() = normal(rng);
    axis.y() = normal(rng);
    axis.z() = normal(rng);
  } while (axis.norm() < 1e-12);
  axis.normalize();
  const double angle = std::abs(sigma * normal(rng));
  if (sampled_angle != nullptr) *sampled_angle = angle;
  return FromAngleAxis({axis, angle});
}

}  // namespace dmfsync
