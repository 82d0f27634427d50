#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dmfsync/dmf_solver.h"
#include "dmfsync/evaluation.h"
#include "dmfsync/view_graph.h"

namespace dmfsync {

const char* Version();

enum class Method {
  kDmf,
  kSpectral,
  kSpanningTree,
};

// A method plus, for kDmf, the completion loss it trains with.
struct MethodSpec {
  Method method = Method::kDmf;
  LossType loss = LossType::kL1;

  bool operator==(const MethodSpec&) const = default;
};

const char* MethodName(Method method);

// Accepts "dmf" (loss taken from `default_loss`), "dmf-l1", "dmf-l2",
// "spectral" and "spanning-tree". Throws UsageError.
MethodSpec ParseMethod(const std::string& name,
                       LossType default_loss = LossType::kL1);
LossType ParseLoss(const std::string& name);
SamplingMode ParseSamplingMode(const std::string& name);
const char* SamplingModeName(SamplingMode mode);

struct MethodResult {
  AbsoluteRotations rotations;
  // Present for kDmf.
  std::optional<SolveReport> solve_report;
};

// Runs one method on a connected graph. Throws the module errors.
MethodResult RunMethod(const ViewGraph& graph, const MethodSpec& method,
                       const SolverConfig& config);

// One CSV row: the instance, the solver configuration and the outcome.
// Optional fields serialize as empty cells.
struct RunRecord {
  int n = 0;
  std::optional<double> edge_prob;
  std::optional<double> missing_requested;
  double missing_realized = 0.0;
  std::optional<double> outlier_fraction;
  std::optional<double> sigma_deg;
  std::optional<int> depth;
  std::optional<double> learning_rate;
  std::optional<double> momentum;
  std::optional<double> init_std;
  std::uint64_t seed = 0;
  Method method = Method::kDmf;
  std::optional<double> mean_err_deg;
  std::optional<double> median_err_deg;
  std::optional<double> final_loss;
  std::optional<double> sv3;
  std::optional<double> sv4;
  std::optional<int> iterations;
  std::optional<std::string> stop_reason;
  std::optional<double> wall_seconds;
  std::string status = "ok";
  std::optional<LossType> loss;
  std::optional<SamplingMode> outlier_mode;
  std::optional<int> max_iters;
  std::optional<int> plateau_window;
  std::optional<double> plateau_rel_tol;
  std::optional<double> plateau_arm_drop;
  std::optional<double> plateau_min_sv_ratio;
  std::string version = Version();
};

// Fixed column order, see CsvHeader().
std::string CsvHeader();
std::string CsvRow(const RunRecord& record);
void WriteCsv(const std::vector<RunRecord>& records, std::ostream& out);
// RFC 4180 quoting: fields with commas, quotes or newlines are quoted.
std::string CsvEscape(const std::string& field);

// Fills the instance and configuration columns of a record.
RunRecord MakeRecord(const ViewGraph& graph, const MethodSpec& method,
                     const SolverConfig& config);

// Runs a method and fills the outcome columns. Module errors are recorded in
// the status column instead of propagating. Error statistics need ground
// truth on the graph.
RunRecord RunAndRecord(const ViewGraph& graph, const MethodSpec& method,
                       const SolverConfig& config, bool record_timing,
                       MethodResult* result = nullptr);

struct SweepSpec {
  std::vector<int> node_counts = {100};
  // Fraction of the complete graph's edges left out; edge_prob = 1 - missing.
  std::vector<double> missing_fractions = {0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<int> depths = {2, 3, 5};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<MethodSpec> methods = {MethodSpec{}};
  double outlier_fraction = 0.4;
  double noise_sigma_deg = 5.0;
  SamplingMode outlier_mode = SamplingMode::kHaarUniform;
  // Depth and seed are overridden per row.
  SolverConfig solver;
  int threads = 1;
  bool record_timing = false;
};

// Throws UsageError.
void ValidateSweepSpec(const SweepSpec& spec);

// One row per (n, missing, seed, method, depth) with depth only varying for
// DMF methods. Jobs run on `threads` workers; rows come back in enumeration
// order regardless of completion order.
std::vector<RunRecord> RunSweep(const SweepSpec& spec);

// Default worker count: DMFSYNC_THREADS when set to a positive integer,
// otherwise the hardware concurrency.
int DefaultThreadCount();

// Command-line entry point: synth, solve, eval and sweep. Returns the
// process exit code (0 on success, an ErrorCode value otherwise).
int RunCommandLine(int argc, const char* const* argv, std::ostream& out,
                   std::ostream& err);

}  // namespace dmfsync
