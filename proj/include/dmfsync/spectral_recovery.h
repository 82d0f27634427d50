#pragma once

#include <vector>

#include <Eigen/Core>

#include "dmfsync/block_matrix.h"
#include "dmfsync/so3.h"

namespace dmfsync {

// Absolute rotations R_1 ... R_n, index-aligned with the view graph nodes.
using AbsoluteRotations = std::vector<Rotation>;

// Relative gap below which the top-3 eigenspace counts as unresolved.
inline constexpr double kSpectralGapTolerance = 1e-9;

// Extracts absolute rotations from a completed 3n x 3n pairwise matrix:
// symmetrize, take the eigenvectors of the three largest eigenvalues scaled
// by sqrt(n), fix the global reflection so most 3x3 blocks have positive
// determinant, project every block onto SO(3) and right-multiply by R_1^T so
// that R_1 = I.
//
// Throws SpectralGapError when lambda_3 <= tol * lambda_1 or the third and
// fourth eigenvalues are not separated (lambda_3 - lambda_4 <= tol *
// lambda_1); DegenerateProjectionError from the block projection;
// DimensionMismatchError when w is not 3n x 3n.
AbsoluteRotations Recover(const Eigen::MatrixXd& w, int n);

// Recover() applied to the observed matrix with zeros at missing blocks.
AbsoluteRotations SpectralBaseline(const ObservedBlockMatrix& observed);

}  // namespace dmfsync
