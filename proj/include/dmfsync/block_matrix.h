#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "dmfsync/view_graph.h"

namespace dmfsync {

// Partial 3n x 3n matrix of pairwise rotations with its binary sampling mask.
// Unobserved entries hold explicit zeros in both matrices.
struct ObservedBlockMatrix {
  int n = 0;
  Eigen::MatrixXd zhat;
  Eigen::MatrixXd mask;
  // Number of observed scalar entries, 9 * (n + 2 |E|).
  std::int64_t num_observed = 0;

  int Dim() const { return 3 * n; }
};

enum class LossType {
  kL1,
  kL2,
};

const char* LossTypeName(LossType loss);

// Diagonal blocks I, block (i, j) = R_ij, block (j, i) = R_ij^T.
ObservedBlockMatrix Assemble(const ViewGraph& graph);

// Masked completion loss (1/|Omega|) ||(w - zhat) o mask|| in the entry-wise
// l1 norm, or the squared Frobenius norm for kL2. Throws
// DimensionMismatchError.
double CompletionResidual(const Eigen::MatrixXd& w,
                          const ObservedBlockMatrix& observed, LossType loss);

}  // namespace dmfsync
