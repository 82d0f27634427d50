#include "dmfsync/spectral_recovery.h"

#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "dmfsync/errors.h"

namespace dmfsync {

AbsoluteRotations Recover(const Eigen::MatrixXd& w, int n) {
  const int dim = 3 * n;
  if (n < 1 || w.rows() != dim || w.cols() != dim) {
    throw DimensionMismatchError("expected a " + std::to_string(dim) + "x" +
                                 std::to_string(dim) + " matrix, got " +
                                 std::to_string(w.rows()) + "x" +
                                 std::to_string(w.cols()));
  }
  if (!w.allFinite()) {
    throw SpectralGapError("matrix has non-finite entries");
  }
  const Eigen::MatrixXd symmetric = 0.5 * (w + w.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen(symmetric);
  if (eigen.info() != Eigen::Success) {
    throw SpectralGapError("eigendecomposition did not converge");
  }
  // Eigenvalues come in ascending order.
  const Eigen::VectorXd& lambda = eigen.eigenvalues();
  const double lambda1 = lambda(dim - 1);
  const double lambda3 = lambda(dim - 3);
  const double lambda4 = dim > 3 ? lambda(dim - 4) : -INFINITY;
  if (!(lambda1 > 0.0) || lambda3 <= kSpectralGapTolerance * lambda1 ||
      lambda3 - lambda4 <= kSpectralGapTolerance * lambda1) {
    std::ostringstream msg;
    msg << "no dominant rank-3 component (lambda1 = " << lambda1
        << ", lambda3 = " << lambda3;
    if (dim > 3) msg << ", lambda4 = " << lambda4;
    msg << ")";
    throw SpectralGapError(msg.str());
  }

  Eigen::MatrixXd top = eigen.eigenvectors().rightCols<3>() * std::sqrt(n);

  // The eigenbasis is an arbitrary element of O(3): a reflection flips the
  // sign of every block determinant at once, so it has to be undone globally.
  int negative = 0;
  for (int i = 0; i < n; ++i) {
    if (top.block<3, 3>(3 * i, 0).determinant() < 0.0) ++negative;
  }
  if (2 * negative > n) top.col(0) *= -1.0;

  AbsoluteRotations rotations;
  rotations.reserve(n);
  for (int i = 0; i < n; ++i) {
    rotations.push_back(ProjectToSO3(top.block<3, 3>(3 * i, 0)));
  }
  const Rotation gauge = rotations.front().Transpose();
  for (auto& rotation : rotations) rotation = rotation * gauge;
  rotations.front() = Rotation::Identity();
  return rotations;
}

AbsoluteRotations SpectralBaseline(const ObservedBlockMatrix& observed) {
  return Recover(observed.zhat, observed.n);
}

}  // namespace dmfsync
