#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "dmfsync/so3.h"

namespace dmfsync {

// Measured relative rotation between nodes i < j (0-based). `rotation` is the
// measurement of R_i R_j^T; the (j, i) direction is its transpose.
struct RelativeRotation {
  int i = 0;
  int j = 0;
  Rotation rotation;
};

// Simple undirected graph of absolute rotations (nodes) and relative
// rotation measurements (edges). Immutable after construction.
class ViewGraph {
 public:
  // Edges with i > j are reoriented (rotation transposed). Throws
  // InvariantError on self-loops, duplicate pairs, out-of-range indices or a
  // ground-truth list of the wrong length. Edges are stored sorted by (i, j).
  ViewGraph(int num_nodes, std::vector<RelativeRotation> edges,
            std::optional<std::vector<Rotation>> ground_truth = std::nullopt);

  int NumNodes() const { return num_nodes_; }
  int NumEdges() const { return static_cast<int>(edges_.size()); }
  const std::vector<RelativeRotation>& Edges() const { return edges_; }

  bool HasGroundTruth() const { return ground_truth_.has_value(); }
  // Requires HasGroundTruth().
  const std::vector<Rotation>& GroundTruth() const { return *ground_truth_; }

  bool IsConnected() const;

  // Throws DisconnectedGraphError unless IsConnected().
  void CheckConnected() const;

 private:
  int num_nodes_;
  std::vector<RelativeRotation> edges_;
  std::optional<std::vector<Rotation>> ground_truth_;
};

// Erdos-Renyi synthetic benchmark parameters.
struct SyntheticSpec {
  int n = 100;
  double edge_prob = 0.5;
  double outlier_fraction = 0.4;
  double noise_sigma = 0.0;  // radians
  std::uint64_t seed = 1;
  SamplingMode outlier_mode = SamplingMode::kHaarUniform;
};

// Per-edge bookkeeping of a synthetic draw, index-aligned with Edges().
struct SyntheticDiagnostics {
  std::vector<bool> is_outlier;
  // |angle| of the multiplicative noise; 0 for outlier edges.
  std::vector<double> noise_angle;
  int attempts = 0;
};

void ValidateSyntheticSpec(const SyntheticSpec& spec);

// Ground truth from uniform Euler angles; edges kept with probability
// edge_prob, whole graph resampled until connected (at most 1000 draws);
// round(outlier_fraction * |E|) edges replaced by random rotations; the
// rest set to R_i R_j^T N_ij. Throws RejectionLimitError.
ViewGraph GenerateSynthetic(const SyntheticSpec& spec,
                            SyntheticDiagnostics* diagnostics = nullptr);

inline constexpr int kMaxConnectivityAttempts = 1000;

// BFS propagation from node 0 with R_0 = I; neighbours visited in ascending
// index order. Throws DisconnectedGraphError.
std::vector<Rotation> SpanningTreeSolve(const ViewGraph& graph);

// Tolerance for rotation blocks read from text files. Blocks within it but
// outside kRotationTolerance are snapped onto SO(3).
inline constexpr double kFileRotationTolerance = 1e-6;

// Edge-list text format:
//   # comment
//   n <count>
//   i j r11 r12 r13 r21 r22 r23 r31 r32 r33      (1-based, row-major)
ViewGraph ReadViewGraph(std::istream& edges,
                        std::istream* ground_truth = nullptr);
ViewGraph ReadViewGraph(const std::filesystem::path& edges_path,
                        const std::optional<std::filesystem::path>&
                            ground_truth_path = std::nullopt);

// Canonical form: header, edges sorted by (i, j), %.17g floats.
void WriteViewGraph(const ViewGraph& graph, std::ostream& out);
void WriteViewGraph(const ViewGraph& graph,
                    const std::filesystem::path& edges_path);

// Absolute rotation format, one node per line: i r11 ... r33 (1-based).
// Nodes must appear exactly once each, in any order.
std::vector<Rotation> ReadRotations(std::istream& in);
std::vector<Rotation> ReadRotations(const std::filesystem::path& path);
void WriteRotations(const std::vector<Rotation>& rotations, std::ostream& out);
void WriteRotations(const std::vector<Rotation>& rotations,
                    const std::filesystem::path& path);

}  // namespace dmfsync
