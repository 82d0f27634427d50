#include "dmfsync/dmf_solver.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/SVD>

#include "dmfsync/errors.h"

namespace dmfsync {
namespace {

// dLoss/dW at W = product:  (1/|Omega|) sign(R) for l1 (sign(0) = 0),
// (2/|Omega|) R for l2, with R = (W - zhat) o mask.
Eigen::MatrixXd LossDerivative(const Eigen::MatrixXd& product,
                               const ObservedBlockMatrix& observed,
                               LossType loss, double* loss_value) {
  const double scale = 1.0 / static_cast<double>(observed.num_observed);
  Eigen::MatrixXd residual =
      (product - observed.zhat).cwiseProduct(observed.mask);
  if (loss == LossType::kL1) {
    if (loss_value != nullptr) *loss_value = scale * residual.cwiseAbs().sum();
    return scale * residual.cwiseSign();
  }
  if (loss_value != nullptr) *loss_value = scale * residual.squaredNorm();
  return (2.0 * scale) * residual;
}

void CheckDimensions(const FactorStack& stack,
                     const ObservedBlockMatrix& observed) {
  for (const auto& factor : stack.factors) {
    if (factor.rows() != observed.Dim() || factor.cols() != observed.Dim()) {
      throw DimensionMismatchError(
          "factor is " + std::to_string(factor.rows()) + "x" +
          std::to_string(factor.cols()) + ", observed matrix is " +
          std::to_string(observed.Dim()) + "x" +
          std::to_string(observed.Dim()));
    }
  }
}

// Reuses `prefix` storage across iterations: prefix[k] = W_{k+1} ... W_1
// (0-based factors), so prefix.back() is the full product.
void ComputePrefixes(const FactorStack& stack,
                     std::vector<Eigen::MatrixXd>* prefix) {
  const int depth = stack.Depth();
  prefix->resize(depth);
  (*prefix)[0] = stack.factors[0];
  for (int k = 1; k < depth; ++k) {
    (*prefix)[k].noalias() = stack.factors[k] * (*prefix)[k - 1];
  }
}

void BackPropagate(const FactorStack& stack,
                   const std::vector<Eigen::MatrixXd>& prefix,
                   const Eigen::MatrixXd& derivative,
                   std::vector<Eigen::MatrixXd>* gradients) {
  const int depth = stack.Depth();
  gradients->resize(depth);
  // upstream = (W_d ... W_{k+2})^T S for the 0-based factor k.
  Eigen::MatrixXd upstream = derivative;
  Eigen::MatrixXd next;
  for (int k = depth - 1; k >= 0; --k) {
    if (k > 0) {
      (*gradients)[k].noalias() = upstream * prefix[k - 1].transpose();
      next.noalias() = stack.factors[k].transpose() * upstream;
      upstream.swap(next);
    } else {
      (*gradients)[k] = upstream;
    }
  }
}

// sigma_3 >= ratio * sigma_1, or ratio == 0.
bool HasRankThreeSignal(const Eigen::MatrixXd& w, double ratio) {
  if (ratio <= 0.0) return true;
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(w);
  const Eigen::VectorXd& sigma = svd.singularValues();
  return sigma.size() >= 3 && sigma(2) >= ratio * sigma(0);
}

}  // namespace

void ValidateSolverConfig(const SolverConfig& config) {
  if (config.depth < 2) throw UsageError("depth must be >= 2");
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
    throw UsageError("learning rate must be positive");
  }
  if (!(config.momentum >= 0.0 && config.momentum < 1.0)) {
    throw UsageError("momentum must lie in [0, 1)");
  }
  if (!(config.init_std > 0.0) || !std::isfinite(config.init_std)) {
    throw UsageError("init std must be positive");
  }
  if (config.max_iters < 1) throw UsageError("max iters must be >= 1");
  if (config.plateau_window < 1) throw UsageError("plateau window must be >= 1");
  if (!(config.plateau_rel_tol > 0.0)) {
    throw UsageError("plateau tolerance must be positive");
  }
  if (!(config.plateau_arm_drop >= 0.0 && config.plateau_arm_drop < 1.0)) {
    throw UsageError("plateau arm drop must lie in [0, 1)");
  }
  if (!(config.plateau_min_sv_ratio >= 0.0 && config.plateau_min_sv_ratio <= 1.0)) {
    throw UsageError("plateau singular value ratio must lie in [0, 1]");
  }
}

const char* StopReasonName(StopReason reason) {
  return reason == StopReason::kPlateau ? "plateau" : "max_iters";
}

FactorStack InitFactors(int n, const SolverConfig& config) {
  ValidateSolverConfig(config);
  const int dim = 3 * n;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, config.init_std);
  FactorStack stack;
  stack.factors.reserve(config.depth);
  stack.velocity.reserve(config.depth);
  for (int k = 0; k < config.depth; ++k) {
    Eigen::MatrixXd factor(dim, dim);
    // Column-major fill order is part of the determinism contract.
    for (Eigen::Index idx = 0; idx < factor.size(); ++idx) {
      factor.data()[idx] = normal(rng);
    }
    stack.factors.push_back(std::move(factor));
    stack.velocity.push_back(Eigen::MatrixXd::Zero(dim, dim));
  }
  return stack;
}

Eigen::MatrixXd Product(const FactorStack& stack) {
  Eigen::MatrixXd product = stack.factors.front();
  Eigen::MatrixXd scratch;
  for (int k = 1; k < stack.Depth(); ++k) {
    scratch.noalias() = stack.factors[k] * product;
    product.swap(scratch);
  }
  return product;
}

std::vector<Eigen::MatrixXd> Gradient(const FactorStack& stack,
                                      const ObservedBlockMatrix& observed,
                                      LossType loss, double* loss_value) {
  CheckDimensions(stack, observed);
  std::vector<Eigen::MatrixXd> prefix;
  ComputePrefixes(stack, &prefix);
  const Eigen::MatrixXd derivative =
      LossDerivative(prefix.back(), observed, loss, loss_value);
  std::vector<Eigen::MatrixXd> gradients;
  BackPropagate(stack, prefix, derivative, &gradients);
  return gradients;
}

void Step(const std::vector<Eigen::MatrixXd>& gradients,
          const SolverConfig& config, FactorStack* stack) {
  for (int k = 0; k < stack->Depth(); ++k) {
    stack->velocity[k] = config.momentum * stack->velocity[k] + gradients[k];
    stack->factors[k] -= config.learning_rate * stack->velocity[k];
  }
}

SolveReport Solve(const ObservedBlockMatrix& observed,
                  const SolverConfig& config) {
  ValidateSolverConfig(config);
  FactorStack stack = InitFactors(observed.n, config);
  CheckDimensions(stack, observed);

  SolveReport report;
  report.loss_history.reserve(config.max_iters);

  std::vector<Eigen::MatrixXd> prefix;
  std::vector<Eigen::MatrixXd> gradients;
  const int window = config.plateau_window;
  double initial_loss = 0.0;
  bool armed = false;
  // Running sums of the last and previous windows of the loss history.
  double recent_sum = 0.0;
  double previous_sum = 0.0;

  report.stop_reason = StopReason::kMaxIters;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    ComputePrefixes(stack, &prefix);
    double loss = 0.0;
    const Eigen::MatrixXd derivative =
        LossDerivative(prefix.back(), observed, config.loss, &loss);

    if (iter == 0) initial_loss = loss;
    if (!std::isfinite(loss) || loss > kDivergenceFactor * initial_loss) {
      throw DivergenceError("loss " + std::to_string(loss) +
                            " at iteration " + std::to_string(iter) +
                            " diverged from initial loss " +
                            std::to_string(initial_loss) +
                            "; lower the learning rate");
    }
    report.loss_history.push_back(loss);
    const auto& history = report.loss_history;
    const int count = static_cast<int>(history.size());
    recent_sum += loss;
    if (count > window) {
      recent_sum -= history[count - 1 - window];
      previous_sum += history[count - 1 - window];
    }
    if (count > 2 * window) previous_sum -= history[count - 1 - 2 * window];

    if (count >= 2 * window) {
      const double previous_mean = previous_sum / window;
      const double recent_mean = recent_sum / window;
      const double decrease = previous_mean - recent_mean;
      if (!armed && decrease >= config.plateau_arm_drop * previous_mean) {
        armed = true;
      } else if (armed && (previous_mean <= 0.0 ||
                           decrease < config.plateau_rel_tol * previous_mean)) {
        if (HasRankThreeSignal(prefix.back(), config.plateau_min_sv_ratio)) {
          report.stop_reason = StopReason::kPlateau;
          report.iterations_run = count;
          break;
        }
        // A shoulder between the escapes of individual singular values;
        // wait for the next drop.
        armed = false;
      }
    }

    BackPropagate(stack, prefix, derivative, &gradients);
    Step(gradients, config, &stack);
    report.iterations_run = count;
  }

  report.completed = Product(stack);
  report.final_loss =
      CompletionResidual(report.completed, observed, config.loss);
  if (!std::isfinite(report.final_loss) ||
      report.final_loss > kDivergenceFactor * initial_loss) {
    throw DivergenceError("final loss " + std::to_string(report.final_loss) +
                          " diverged from initial loss " +
                          std::to_string(initial_loss));
  }
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(report.completed);
  const Eigen::Index keep =
      std::min<Eigen::Index>(10, svd.singularValues().size());
  report.singular_values = svd.singularValues().head(keep);
  return report;
}

}  // namespace dmfsync
