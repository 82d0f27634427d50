#pragma once

#include <vector>

#include "dmfsync/so3.h"
#include "dmfsync/spectral_recovery.h"

namespace dmfsync {

struct ErrorReport {
  std::vector<double> per_node_errors_deg;
  double mean_deg = 0.0;
  double median_deg = 0.0;
  // Gauge Q applied on the right of every estimate.
  Rotation alignment;
};

// Q = ProjectToSO3(sum_i est_i^T gt_i), the rotation minimizing
// sum_i ||est_i Q - gt_i||_F^2. Throws DimensionMismatchError on length
// mismatch and DegenerateProjectionError on rank-deficient sums.
Rotation Align(const AbsoluteRotations& estimate,
               const AbsoluteRotations& ground_truth);

// Angular errors in degrees of est_i Q against gt_i, with Q from Align().
ErrorReport AngularErrorReport(const AbsoluteRotations& estimate,
                               const AbsoluteRotations& ground_truth);

// Even-length inputs average the two central order statistics.
double Median(std::vector<double> values);

}  // namespace dmfsync
