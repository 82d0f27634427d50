#include "dmfsync/evaluation.h"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <string>

#include "dmfsync/errors.h"

namespace dmfsync {

Rotation Align(const AbsoluteRotations& estimate,
               const AbsoluteRotations& ground_truth) {
  if (estimate.size() != ground_truth.size() || estimate.empty()) {
    throw DimensionMismatchError(
        "cannot align " + std::to_string(estimate.size()) +
        " estimates with " + std::to_string(ground_truth.size()) +
        " ground-truth rotations");
  }
  Eigen::Matrix3d accumulated = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < estimate.size(); ++i) {
    accumulated += estimate[i].matrix().transpose() * ground_truth[i].matrix();
  }
  return ProjectToSO3(accumulated);
}

double Median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

ErrorReport AngularErrorReport(const AbsoluteRotations& estimate,
                               const AbsoluteRotations& ground_truth) {
  ErrorReport report;
  report.alignment = Align(estimate, ground_truth);
  report.per_node_errors_deg.reserve(estimate.size());
  for (size_t i = 0; i < estimate.size(); ++i) {
    const double radians =
        GeodesicDistance(estimate[i] * report.alignment, ground_truth[i]);
    report.per_node_errors_deg.push_back(radians * 180.0 / std::numbers::pi);
  }
  const auto& errors = report.per_node_errors_deg;
  report.mean_deg = std::accumulate(errors.begin(), errors.end(), 0.0) /
                    static_cast<double>(errors.size());
  report.median_deg = Median(errors);
  return report;
}

}  // namespace dmfsync
