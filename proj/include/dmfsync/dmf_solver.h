#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "dmfsync/block_matrix.h"

namespace dmfsync {

struct SolverConfig {
  int depth = 5;
  double learning_rate = 0.3;
  double momentum = 0.9;
  // Standard deviation of every factor entry at initialization.
  double init_std = 3e-2;
  int max_iters = 50000;
  int plateau_window = 100;
  double plateau_rel_tol = 5e-2;
  // The plateau test only starts after one window-over-window comparison
  // has shown a relative decrease of at least this much, so the flat stretch
  // near the zero initialization is not mistaken for convergence.
  double plateau_arm_drop = 0.1;
  // A plateau only ends the run once sigma_3(W) >= this times sigma_1(W);
  // earlier plateaus disarm the test until the next drop. 0 disables.
  double plateau_min_sv_ratio = 0.5;
  LossType loss = LossType::kL1;
  std::uint64_t seed = 1;
};

// Throws UsageError when a field is outside its documented range.
void ValidateSolverConfig(const SolverConfig& config);

// Factors W_1 ... W_d (factors[0] is W_1) and their momentum buffers.
struct FactorStack {
  std::vector<Eigen::MatrixXd> factors;
  std::vector<Eigen::MatrixXd> velocity;

  int Depth() const { return static_cast<int>(factors.size()); }
  int Dim() const { return factors.empty() ? 0 : factors.front().rows(); }
};

// Every entry i.i.d. N(0, init_std^2), drawn from a generator seeded with
// config.seed; velocities start at zero.
FactorStack InitFactors(int n, const SolverConfig& config);

// W = W_d * ... * W_1.
Eigen::MatrixXd Product(const FactorStack& stack);

// Gradients of the masked completion loss with respect to each factor,
// index-aligned with stack.factors. With S the derivative of the loss with
// respect to W, grad_k = (W_d...W_{k+1})^T S (W_{k-1}...W_1)^T. Uses prefix
// products and a running suffix, about 4d matrix products in total. When
// `loss_value` is non-null it receives the loss at the current factors.
// Throws DimensionMismatchError.
std::vector<Eigen::MatrixXd> Gradient(const FactorStack& stack,
                                      const ObservedBlockMatrix& observed,
                                      LossType loss,
                                      double* loss_value = nullptr);

// Heavy-ball update: v <- momentum * v + g; W <- W - learning_rate * v.
void Step(const std::vector<Eigen::MatrixXd>& gradients,
          const SolverConfig& config, FactorStack* stack);

enum class StopReason {
  kPlateau,
  kMaxIters,
};

const char* StopReasonName(StopReason reason);

struct SolveReport {
  Eigen::MatrixXd completed;
  // Loss at the start of every iteration.
  std::vector<double> loss_history;
  // Loss of `completed`.
  double final_loss = 0.0;
  // Leading singular values of `completed` (at most 10), descending.
  Eigen::VectorXd singular_values;
  int iterations_run = 0;
  StopReason stop_reason = StopReason::kMaxIters;
};

inline constexpr double kDivergenceFactor = 1e6;

// Full-batch gradient descent with momentum from InitFactors until
// max_iters or a plateau: the mean loss of the last plateau_window
// iterations decreased by less than plateau_rel_tol relative to the mean of
// the window before it. The plateau test is armed by the first such
// comparison showing a decrease of at least plateau_arm_drop, and a plateau
// reached before W has three comparable leading singular values disarms it
// again (see plateau_min_sv_ratio). Throws
// DivergenceError when the loss exceeds
// kDivergenceFactor times its initial value or stops being finite.
SolveReport Solve(const ObservedBlockMatrix& observed,
                  const SolverConfig& config);

}  // namespace dmfsync
