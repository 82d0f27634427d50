#include "dmfsync/harness.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "dmfsync/errors.h"

#ifndef DMFSYNC_VERSION
#define DMFSYNC_VERSION "unknown"
#endif

namespace dmfsync {
namespace {

constexpr double kRadiansPerDegree = std::numbers::pi / 180.0;

std::string FormatNumber(double value) {
  char buffer[40];
  const int len = std::snprintf(buffer, sizeof(buffer), "%.10g", value);
  return std::string(buffer, len);
}

template <typename T>
std::string Cell(const std::optional<T>& value) {
  if (!value) return "";
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(*value)) return "";
    return FormatNumber(*value);
  } else {
    return std::to_string(*value);
  }
}

double MissingFraction(const ViewGraph& graph) {
  const double n = graph.NumNodes();
  const double complete = n * (n - 1.0) / 2.0;
  if (complete <= 0.0) return 0.0;
  return 1.0 - graph.NumEdges() / complete;
}

}  // namespace

const char* Version() { return DMFSYNC_VERSION; }

const char* MethodName(Method method) {
  switch (method) {
    case Method::kDmf:
      return "dmf";
    case Method::kSpectral:
      return "spectral";
    case Method::kSpanningTree:
      return "spanning-tree";
  }
  return "unknown";
}

MethodSpec ParseMethod(const std::string& name, LossType default_loss) {
  if (name == "dmf") return {Method::kDmf, default_loss};
  if (name == "dmf-l1") return {Method::kDmf, LossType::kL1};
  if (name == "dmf-l2") return {Method::kDmf, LossType::kL2};
  if (name == "spectral") return {Method::kSpectral, default_loss};
  if (name == "spanning-tree") return {Method::kSpanningTree, default_loss};
  throw UsageError("unknown method '" + name +
                   "' (expected dmf, dmf-l1, dmf-l2, spectral, spanning-tree)");
}

LossType ParseLoss(const std::string& name) {
  if (name == "l1") return LossType::kL1;
  if (name == "l2") return LossType::kL2;
  throw UsageError("unknown loss '" + name + "' (expected l1 or l2)");
}

SamplingMode ParseSamplingMode(const std::string& name) {
  if (name == "haar" || name == "haar-uniform") return SamplingMode::kHaarUniform;
  if (name == "euler" || name == "euler-uniform") {
    return SamplingMode::kEulerUniform;
  }
  throw UsageError("unknown outlier mode '" + name +
                   "' (expected haar-uniform or euler-uniform)");
}

const char* SamplingModeName(SamplingMode mode) {
  return mode == SamplingMode::kHaarUniform ? "haar-uniform" : "euler-uniform";
}

MethodResult RunMethod(const ViewGraph& graph, const MethodSpec& method,
                       const SolverConfig& config) {
  graph.CheckConnected();
  MethodResult result;
  switch (method.method) {
    case Method::kDmf: {
      SolverConfig effective = config;
      effective.loss = method.loss;
      const ObservedBlockMatrix observed = Assemble(graph);
      result.solve_report = Solve(observed, effective);
      result.rotations = Recover(result.solve_report->completed, graph.NumNodes());
      break;
    }
    case Method::kSpectral:
      result.rotations = SpectralBaseline(Assemble(graph));
      break;
    case Method::kSpanningTree:
      result.rotations = SpanningTreeSolve(graph);
      break;
  }
  return result;
}

std::string CsvEscape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string quoted = "\"";
  for (const char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string CsvHeader() {
  return "n,p,missing_requested,missing_realized,outlier_fraction,sigma_deg,"
         "depth,lr,momentum,init_std,seed,method,mean_err_deg,median_err_deg,"
         "final_loss,sv3,sv4,iters,stop_reason,wall_s,status,loss,"
         "outlier_mode,max_iters,plateau_window,plateau_rel_tol,"
         "plateau_arm_drop,plateau_min_sv_ratio,version";
}

std::string CsvRow(const RunRecord& r) {
  const std::vector<std::string> cells = {
      std::to_string(r.n),
      Cell(r.edge_prob),
      Cell(r.missing_requested),
      FormatNumber(r.missing_realized),
      Cell(r.outlier_fraction),
      Cell(r.sigma_deg),
      Cell(r.depth),
      Cell(r.learning_rate),
      Cell(r.momentum),
      Cell(r.init_std),
      std::to_string(r.seed),
      MethodName(r.method),
      Cell(r.mean_err_deg),
      Cell(r.median_err_deg),
      Cell(r.final_loss),
      Cell(r.sv3),
      Cell(r.sv4),
      Cell(r.iterations),
      r.stop_reason.value_or(""),
      Cell(r.wall_seconds),
      r.status,
      r.loss ? LossTypeName(*r.loss) : "",
      r.outlier_mode ? SamplingModeName(*r.outlier_mode) : "",
      Cell(r.max_iters),
      Cell(r.plateau_window),
      Cell(r.plateau_rel_tol),
      Cell(r.plateau_arm_drop),
      Cell(r.plateau_min_sv_ratio),
      r.version,
  };
  std::string row;
  for (size_t k = 0; k < cells.size(); ++k) {
    if (k > 0) row += ',';
    row += CsvEscape(cells[k]);
  }
  return row;
}

void WriteCsv(const std::vector<RunRecord>& records, std::ostream& out) {
  out << CsvHeader() << '\n';
  for (const auto& record : records) out << CsvRow(record) << '\n';
}

RunRecord MakeRecord(const ViewGraph& graph, const MethodSpec& method,
                     const SolverConfig& config) {
  RunRecord record;
  record.n = graph.NumNodes();
  record.missing_realized = MissingFraction(graph);
  record.edge_prob = 1.0 - record.missing_realized;
  record.seed = config.seed;
  record.method = method.method;
  if (method.method == Method::kDmf) {
    record.depth = config.depth;
    record.learning_rate = config.learning_rate;
    record.momentum = config.momentum;
    record.init_std = config.init_std;
    record.loss = method.loss;
    record.max_iters = config.max_iters;
    record.plateau_window = config.plateau_window;
    record.plateau_rel_tol = config.plateau_rel_tol;
    record.plateau_arm_drop = config.plateau_arm_drop;
    record.plateau_min_sv_ratio = config.plateau_min_sv_ratio;
  }
  return record;
}

RunRecord RunAndRecord(const ViewGraph& graph, const MethodSpec& method,
                       const SolverConfig& config, bool record_timing,
                       MethodResult* result) {
  RunRecord record = MakeRecord(graph, method, config);
  const auto start = std::chrono::steady_clock::now();
  try {
    MethodResult run = RunMethod(graph, method, config);
    if (run.solve_report) {
      const SolveReport& solve = *run.solve_report;
      record.final_loss = solve.final_loss;
      const auto& sv = solve.singular_values;
      if (sv.size() >= 3) record.sv3 = sv(2);
      if (sv.size() >= 4) record.sv4 = sv(3);
      record.iterations = solve.iterations_run;
      record.stop_reason = StopReasonName(solve.stop_reason);
    }
    if (graph.HasGroundTruth()) {
      const ErrorReport errors =
          AngularErrorReport(run.rotations, graph.GroundTruth());
      record.mean_err_deg = errors.mean_deg;
      record.median_err_deg = errors.median_deg;
    }
    if (result != nullptr) *result = std::move(run);
  } catch (const Error& e) {
    record.status = ErrorCodeName(e.code());
  }
  if (record_timing) {
    record.wall_seconds = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - start)
                              .count();
  }
  return record;
}

void ValidateSweepSpec(const SweepSpec& spec) {
  if (spec.node_counts.empty() || spec.missing_fractions.empty() ||
      spec.seeds.empty() || spec.methods.empty()) {
    throw UsageError("sweep lists must be non-empty");
  }
  const bool has_dmf =
      std::any_of(spec.methods.begin(), spec.methods.end(),
                  [](const MethodSpec& m) { return m.method == Method::kDmf; });
  if (has_dmf && spec.depths.empty()) {
    throw UsageError("sweep over dmf needs at least one depth");
  }
  for (const int n : spec.node_counts) {
    if (n < 2) throw UsageError("sweep node counts must be >= 2");
  }
  for (const double missing : spec.missing_fractions) {
    if (!(missing >= 0.0 && missing < 1.0)) {
      throw UsageError("missing fractions must lie in [0, 1)");
    }
  }
  for (const int depth : spec.depths) {
    if (depth < 2) throw UsageError("sweep depths must be >= 2");
  }
  if (!(spec.outlier_fraction >= 0.0 && spec.outlier_fraction <= 1.0)) {
    throw UsageError("outlier fraction must lie in [0, 1]");
  }
  if (!(spec.noise_sigma_deg >= 0.0)) {
    throw UsageError("noise sigma must be non-negative");
  }
  if (spec.threads < 1) throw UsageError("thread count must be >= 1");
  ValidateSolverConfig(spec.solver);
}

std::vector<RunRecord> RunSweep(const SweepSpec& spec) {
  ValidateSweepSpec(spec);

  struct Job {
    SyntheticSpec instance;
    double missing = 0.0;
    MethodSpec method;
    SolverConfig config;
  };
  std::vector<Job> jobs;
  for (const int n : spec.node_counts) {
    for (const double missing : spec.missing_fractions) {
      for (const std::uint64_t seed : spec.seeds) {
        SyntheticSpec instance;
        instance.n = n;
        instance.edge_prob = 1.0 - missing;
        instance.outlier_fraction = spec.outlier_fraction;
        instance.noise_sigma = spec.noise_sigma_deg * kRadiansPerDegree;
        instance.seed = seed;
        instance.outlier_mode = spec.outlier_mode;
        for (const MethodSpec& method : spec.methods) {
          SolverConfig config = spec.solver;
          config.seed = seed;
          if (method.method == Method::kDmf) {
            for (const int depth : spec.depths) {
              config.depth = depth;
              jobs.push_back({instance, missing, method, config});
            }
          } else {
            jobs.push_back({instance, missing, method, config});
          }
        }
      }
    }
  }

  std::vector<RunRecord> records(jobs.size());
  auto run_job = [&](size_t index) {
    const Job& job = jobs[index];
    RunRecord record;
    try {
      const ViewGraph graph = GenerateSynthetic(job.instance);
      record = RunAndRecord(graph, job.method, job.config, spec.record_timing);
    } catch (const Error& e) {
      record.n = job.instance.n;
      record.seed = job.instance.seed;
      record.method = job.method.method;
      record.status = ErrorCodeName(e.code());
    }
    record.missing_requested = job.missing;
    record.edge_prob = job.instance.edge_prob;
    record.outlier_fraction = job.instance.outlier_fraction;
    record.sigma_deg = spec.noise_sigma_deg;
    record.outlier_mode = job.instance.outlier_mode;
    records[index] = std::move(record);
  };

  const int workers =
      std::max(1, std::min<int>(spec.threads, static_cast<int>(jobs.size())));
  if (workers == 1) {
    for (size_t k = 0; k < jobs.size(); ++k) run_job(k);
    return records;
  }
  std::atomic<size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t k = next.fetch_add(1); k < jobs.size(); k = next.fetch_add(1)) {
        run_job(k);
      }
    });
  }
  pool.clear();
  return records;
}

int DefaultThreadCount() {
  if (const char* env = std::getenv("DMFSYNC_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value > 0 && value < 4096) {
      return static_cast<int>(value);
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

namespace {

struct SolverFlags {
  SolverConfig config;
  std::string loss = "l1";

  void Register(CLI::App* app) {
    app->add_option("--depth", config.depth, "Number of factors")
        ->capture_default_str();
    app->add_option("--learning-rate,--lr", config.learning_rate)
        ->capture_default_str();
    app->add_option("--momentum", config.momentum)->capture_default_str();
    app->add_option("--init-std", config.init_std,
                    "Std of the Gaussian factor initialization")
        ->capture_default_str();
    app->add_option("--max-iters", config.max_iters)->capture_default_str();
    app->add_option("--plateau-window", config.plateau_window)
        ->capture_default_str();
    app->add_option("--plateau-rel-tol", config.plateau_rel_tol)
        ->capture_default_str();
    app->add_option("--plateau-arm-drop", config.plateau_arm_drop)
        ->capture_default_str();
    app->add_option("--plateau-min-sv-ratio", config.plateau_min_sv_ratio)
        ->capture_default_str();
    app->add_option("--loss", loss, "l1 or l2")->capture_default_str();
  }

  SolverConfig Resolve() {
    config.loss = ParseLoss(loss);
    return config;
  }
};

void WriteFileAtomically(const std::filesystem::path& path,
                         const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

int CmdSynth(const SyntheticSpec& spec, double sigma_deg,
             const std::string& prefix, std::ostream& out) {
  SyntheticSpec resolved = spec;
  resolved.noise_sigma = sigma_deg * kRadiansPerDegree;
  SyntheticDiagnostics diagnostics;
  const ViewGraph graph = GenerateSynthetic(resolved, &diagnostics);
  const std::filesystem::path edges_path = prefix + "_edges.txt";
  const std::filesystem::path truth_path = prefix + "_gt.txt";
  WriteViewGraph(graph, edges_path);
  WriteRotations(graph.GroundTruth(), truth_path);
  const auto outliers = std::count(diagnostics.is_outlier.begin(),
                                   diagnostics.is_outlier.end(), true);
  out << "n=" << graph.NumNodes() << " edges=" << graph.NumEdges()
      << " outliers=" << outliers << " attempts=" << diagnostics.attempts
      << " missing_realized=" << FormatNumber(MissingFraction(graph))
      << " edges_file=" << edges_path.string()
      << " gt_file=" << truth_path.string() << '\n';
  return 0;
}

int CmdSolve(const std::string& input, const std::string& ground_truth,
             const std::string& method_name, SolverFlags& flags,
             std::uint64_t seed, const std::string& output,
             const std::string& report_path, bool timing, std::ostream& out) {
  SolverConfig config = flags.Resolve();
  config.seed = seed;
  ValidateSolverConfig(config);
  const MethodSpec method = ParseMethod(method_name, config.loss);

  std::optional<std::filesystem::path> truth_path;
  if (!ground_truth.empty()) truth_path = ground_truth;
  const ViewGraph graph = ReadViewGraph(input, truth_path);

  const auto start = std::chrono::steady_clock::now();
  MethodResult result = RunMethod(graph, method, config);
  const double wall = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();

  RunRecord record = MakeRecord(graph, method, config);
  if (result.solve_report) {
    const SolveReport& solve = *result.solve_report;
    record.final_loss = solve.final_loss;
    if (solve.singular_values.size() >= 3) record.sv3 = solve.singular_values(2);
    if (solve.singular_values.size() >= 4) record.sv4 = solve.singular_values(3);
    record.iterations = solve.iterations_run;
    record.stop_reason = StopReasonName(solve.stop_reason);
  }
  if (timing) record.wall_seconds = wall;
  std::optional<ErrorReport> errors;
  if (graph.HasGroundTruth()) {
    errors = AngularErrorReport(result.rotations, graph.GroundTruth());
    record.mean_err_deg = errors->mean_deg;
    record.median_err_deg = errors->median_deg;
  }

  std::ostringstream rotations;
  WriteRotations(result.rotations, rotations);
  WriteFileAtomically(output, rotations.str());
  if (!report_path.empty()) {
    std::ostringstream csv;
    WriteCsv({record}, csv);
    WriteFileAtomically(report_path, csv.str());
  }

  out << "method=" << MethodName(method.method);
  if (method.method == Method::kDmf) {
    out << " loss=" << LossTypeName(method.loss)
        << " iters=" << *record.iterations << " stop=" << *record.stop_reason
        << " final_loss=" << FormatNumber(*record.final_loss);
  }
  if (errors) {
    out << " mean_err_deg=" << FormatNumber(errors->mean_deg)
        << " median_err_deg=" << FormatNumber(errors->median_deg);
  }
  out << '\n';
  return 0;
}

int CmdEval(const std::string& estimate_path, const std::string& truth_path,
            const std::string& output, std::ostream& out) {
  const AbsoluteRotations estimate = ReadRotations(std::filesystem::path(estimate_path));
  const AbsoluteRotations truth = ReadRotations(std::filesystem::path(truth_path));
  const ErrorReport report = AngularErrorReport(estimate, truth);
  if (!output.empty()) {
    std::ostringstream csv;
    csv << "node,error_deg\n";
    for (size_t i = 0; i < report.per_node_errors_deg.size(); ++i) {
      csv << i + 1 << ',' << FormatNumber(report.per_node_errors_deg[i]) << '\n';
    }
    WriteFileAtomically(output, csv.str());
  }
  out << "n=" << estimate.size()
      << " mean_err_deg=" << FormatNumber(report.mean_deg)
      << " median_err_deg=" << FormatNumber(report.median_deg) << '\n';
  return 0;
}

int CmdSweep(SweepSpec spec, const std::vector<std::string>& method_names,
             SolverFlags& flags, const std::string& output, std::ostream& out) {
  spec.solver = flags.Resolve();
  spec.methods.clear();
  for (const auto& name : method_names) {
    spec.methods.push_back(ParseMethod(name, spec.solver.loss));
  }
  const std::vector<RunRecord> records = RunSweep(spec);
  std::ostringstream csv;
  WriteCsv(records, csv);
  WriteFileAtomically(output, csv.str());
  const auto failed = std::count_if(records.begin(), records.end(),
                                    [](const RunRecord& r) { return r.status != "ok"; });
  out << "rows=" << records.size() << " failed=" << failed
      << " output=" << output << '\n';
  return 0;
}

}  // namespace

int RunCommandLine(int argc, const char* const* argv, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"Rotation synchronization by deep matrix factorization"};
  app.set_version_flag("--version", Version());
  app.require_subcommand(1);

  // synth
  SyntheticSpec synth_spec;
  double synth_sigma_deg = 0.0;
  std::string synth_mode = "haar-uniform";
  std::string synth_output;
  CLI::App* synth = app.add_subcommand(
      "synth", "Generate an Erdos-Renyi benchmark instance");
  synth->add_option("--n", synth_spec.n, "Node count")->capture_default_str();
  synth->add_option("--edge-prob,--p", synth_spec.edge_prob)
      ->capture_default_str();
  synth->add_option("--outlier-fraction,--outliers",
                    synth_spec.outlier_fraction)
      ->capture_default_str();
  synth->add_option("--noise-sigma-deg,--sigma-deg", synth_sigma_deg,
                    "Std of the noise angle in degrees")
      ->capture_default_str();
  synth->add_option("--seed", synth_spec.seed)->capture_default_str();
  synth->add_option("--outlier-mode", synth_mode)->capture_default_str();
  synth->add_option("--output,-o", synth_output,
                    "Prefix; writes <prefix>_edges.txt and <prefix>_gt.txt")
      ->required();

  // solve
  std::string solve_input;
  std::string solve_truth;
  std::string solve_method = "dmf";
  std::string solve_output;
  std::string solve_report;
  std::uint64_t solve_seed = 1;
  bool solve_timing = false;
  SolverFlags solve_flags;
  CLI::App* solve = app.add_subcommand("solve", "Solve one view graph");
  solve->add_option("--input,-i", solve_input, "Edge-list file")->required();
  solve->add_option("--ground-truth", solve_truth, "Ground-truth rotations");
  solve->add_option("--method", solve_method,
                    "dmf, dmf-l1, dmf-l2, spectral or spanning-tree")
      ->capture_default_str();
  solve->add_option("--seed", solve_seed, "Solver seed")->capture_default_str();
  solve->add_option("--output,-o", solve_output, "Recovered rotations file")
      ->required();
  solve->add_option("--report", solve_report,
                    "CSV run record (error columns need --ground-truth)");
  solve->add_flag("--timing", solve_timing, "Fill the wall_s column");
  solve_flags.Register(solve);

  // eval
  std::string eval_estimate;
  std::string eval_truth;
  std::string eval_output;
  CLI::App* eval = app.add_subcommand(
      "eval", "Gauge-aligned angular errors of an estimate");
  eval->add_option("--estimate", eval_estimate)->required();
  eval->add_option("--ground-truth", eval_truth)->required();
  eval->add_option("--output,-o", eval_output, "Per-node error CSV");

  // sweep
  SweepSpec sweep_spec;
  sweep_spec.threads = DefaultThreadCount();
  std::vector<std::string> sweep_methods = {"dmf"};
  std::string sweep_mode = "haar-uniform";
  std::string sweep_output;
  SolverFlags sweep_flags;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Synthetic sweep over node counts, missing fractions, depths "
               "and seeds");
  sweep->add_option("--n", sweep_spec.node_counts)->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--missing", sweep_spec.missing_fractions,
                    "Fractions of missing edges")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--depths", sweep_spec.depths)->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--seeds", sweep_spec.seeds)->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--methods", sweep_methods)->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--outlier-fraction,--outliers",
                    sweep_spec.outlier_fraction)
      ->capture_default_str();
  sweep->add_option("--noise-sigma-deg,--sigma-deg",
                    sweep_spec.noise_sigma_deg)
      ->capture_default_str();
  sweep->add_option("--outlier-mode", sweep_mode)->capture_default_str();
  sweep->add_option("--threads", sweep_spec.threads,
                    "Concurrent jobs (default: DMFSYNC_THREADS or all cores)");
  sweep->add_flag("--timing", sweep_spec.record_timing, "Fill the wall_s column");
  sweep->add_option("--output,-o", sweep_output, "CSV path")->required();
  sweep_flags.Register(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorCode::kUsage);
  }

  try {
    if (synth->parsed()) {
      synth_spec.outlier_mode = ParseSamplingMode(synth_mode);
      return CmdSynth(synth_spec, synth_sigma_deg, synth_output, out);
    }
    if (solve->parsed()) {
      return CmdSolve(solve_input, solve_truth, solve_method, solve_flags,
                      solve_seed, solve_output, solve_report, solve_timing, out);
    }
    if (eval->parsed()) {
      return CmdEval(eval_estimate, eval_truth, eval_output, out);
    }
    if (sweep->parsed()) {
      sweep_spec.outlier_mode = ParseSamplingMode(sweep_mode);
      return CmdSweep(sweep_spec, sweep_methods, sweep_flags, sweep_output, out);
    }
  } catch (const Error& e) {
    err << "error (" << ErrorCodeName(e.code()) << "): " << e.what() << '\n';
    return static_cast<int>(e.code());
  }
  return static_cast<int>(ErrorCode::kUsage);
}

}  // namespace dmfsync
