#include "dmfsync/block_matrix.h"

#include <string>

#include "dmfsync/errors.h"

namespace dmfsync {

const char* LossTypeName(LossType loss) {
  return loss == LossType::kL1 ? "l1" : "l2";
}

ObservedBlockMatrix Assemble(const ViewGraph& graph) {
  ObservedBlockMatrix observed;
  observed.n = graph.NumNodes();
  const int dim = observed.Dim();
  observed.zhat.setZero(dim, dim);
  observed.mask.setZero(dim, dim);

  for (int i = 0; i < observed.n; ++i) {
    observed.zhat.block<3, 3>(3 * i, 3 * i).setIdentity();
    observed.mask.block<3, 3>(3 * i, 3 * i).setOnes();
  }
  for (const auto& edge : graph.Edges()) {
    const Eigen::Matrix3d& r = edge.rotation.matrix();
    observed.zhat.block<3, 3>(3 * edge.i, 3 * edge.j) = r;
    observed.zhat.block<3, 3>(3 * edge.j, 3 * edge.i) = r.transpose();
    observed.mask.block<3, 3>(3 * edge.i, 3 * edge.j).setOnes();
    observed.mask.block<3, 3>(3 * edge.j, 3 * edge.i).setOnes();
  }
  observed.num_observed =
      9 * (static_cast<std::int64_t>(observed.n) + 2 * graph.NumEdges());
  return observed;
}

double CompletionResidual(const Eigen::MatrixXd& w,
                          const ObservedBlockMatrix& observed, LossType loss) {
  if (w.rows() != observed.zhat.rows() || w.cols() != observed.zhat.cols()) {
    throw DimensionMismatchError(
        "candidate is " + std::to_string(w.rows()) + "x" +
        std::to_string(w.cols()) + ", observed matrix is " +
        std::to_string(observed.zhat.rows()) + "x" +
        std::to_string(observed.zhat.cols()));
  }
  const auto residual = (w - observed.zhat).cwiseProduct(observed.mask);
  const double total = loss == LossType::kL1 ? residual.cwiseAbs().sum()
                                             : residual.squaredNorm();
  return total / static_cast<double>(observed.num_observed);
}

}  // namespace dmfsync
