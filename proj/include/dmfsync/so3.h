#pragma once

#include <random>

#include <Eigen/Core>
#include <Eigen/LU>

namespace dmfsync {

// Tolerance on ||R R^T - I||_F and |det(R) - 1| for a matrix to count as a
// rotation.
inline constexpr double kRotationTolerance = 1e-9;

// Element of SO(3). Construction through FromMatrix validates the
// orthogonality and determinant invariants.
class Rotation {
 public:
  Rotation() : m_(Eigen::Matrix3d::Identity()) {}

  static Rotation Identity() { return Rotation(); }

  // Throws InvariantError when `m` is not a rotation within `tolerance`.
  static Rotation FromMatrix(const Eigen::Matrix3d& m,
                             double tolerance = kRotationTolerance);

  // For matrices that are rotations by construction (products, transposes,
  // closed-form parameterizations).
  static Rotation FromMatrixUnchecked(const Eigen::Matrix3d& m) {
    return Rotation(m);
  }

  const Eigen::Matrix3d& matrix() const { return m_; }

  Rotation Transpose() const { return Rotation(m_.transpose()); }

  Rotation operator*(const Rotation& other) const {
    return Rotation(m_ * other.m_);
  }

  bool operator==(const Rotation& other) const { return m_ == other.m_; }

 private:
  explicit Rotation(const Eigen::Matrix3d& m) : m_(m) {}

  Eigen::Matrix3d m_;
};

struct AngleAxis {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double angle = 0.0;
};

enum class SamplingMode {
  kEulerUniform,
  kHaarUniform,
};

// ||m m^T - I||_F.
double OrthogonalityResidual(const Eigen::Matrix3d& m);

bool IsRotation(const Eigen::Matrix3d& m, double tolerance = kRotationTolerance);

// Intrinsic Z-Y-X composition: Rz(yaw) * Ry(pitch) * Rx(roll).
Rotation FromEuler(double yaw, double pitch, double roll);

// Rodrigues formula. The axis is expected to have unit norm.
Rotation FromAngleAxis(const AngleAxis& angle_axis);

// Inverse of FromAngleAxis; angle in [0, pi]. Axis is +z for the identity.
AngleAxis ToAngleAxis(const Rotation& rotation);

// Rotation angle of a^T b in radians, in [0, pi].
double GeodesicDistance(const Rotation& a, const Rotation& b);

// Nearest rotation in Frobenius norm: U diag(1, 1, det(U V^T)) V^T.
// Throws DegenerateProjectionError when the two smallest singular values
// vanish and the result is not unique.
Rotation ProjectToSO3(const Eigen::Matrix3d& m);

Rotation RandomRotation(std::mt19937_64& rng, SamplingMode mode);

// Uniform random axis, angle ~ N(0, sigma^2) folded to |angle|. When
// `sampled_angle` is non-null it receives |angle|.
Rotation RandomPerturbation(double sigma, std::mt19937_64& rng,
                            double* sampled_angle = nullptr);

}  // namespace dmfsync
