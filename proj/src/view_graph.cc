#include "dmfsync/view_graph.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>

#include "dmfsync/errors.h"

namespace dmfsync {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int Find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Returns true if the two sets were distinct.
  bool Union(int a, int b) {
    a = Find(a);
    b = Find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<int> parent_;
};

bool IsConnectedPairs(int n, const std::vector<std::pair<int, int>>& pairs) {
  if (n <= 1) return true;
  DisjointSets sets(n);
  int components = n;
  for (const auto& [i, j] : pairs) {
    if (sets.Union(i, j)) --components;
  }
  return components == 1;
}

std::string FormatDouble(double value) {
  std::array<char, 40> buffer;
  const int len = std::snprintf(buffer.data(), buffer.size(), "%.17g", value);
  return std::string(buffer.data(), len);
}

void WriteMatrixRowMajor(const Eigen::Matrix3d& m, std::ostream& out) {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out << ' ' << FormatDouble(m(r, c));
    }
  }
}

// Whitespace tokenizer over one line, tracking the line number for errors.
class LineTokens {
 public:
  LineTokens(std::string_view line, int line_number)
      : line_number_(line_number) {
    size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) {
        ++pos;
      }
      if (pos >= line.size() || line[pos] == '#') break;
      size_t end = pos;
      while (end < line.size() &&
             !std::isspace(static_cast<unsigned char>(line[end])) &&
             line[end] != '#') {
        ++end;
      }
      tokens_.push_back(line.substr(pos, end - pos));
      pos = end;
    }
  }

  bool empty() const { return tokens_.empty(); }
  size_t size() const { return tokens_.size(); }
  std::string_view operator[](size_t k) const { return tokens_[k]; }

  [[noreturn]] void Fail(const std::string& what) const {
    throw ParseError("line " + std::to_string(line_number_) + ": " + what);
  }

  long long Integer(size_t k) const {
    long long value = 0;
    const auto token = tokens_[k];
    const auto [ptr, ec] =
        std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      Fail("expected integer, got '" + std::string(token) + "'");
    }
    return value;
  }

  double Real(size_t k) const {
    double value = 0.0;
    const auto token = tokens_[k];
    const auto [ptr, ec] =
        std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() ||
        !std::isfinite(value)) {
      Fail("expected finite number, got '" + std::string(token) + "'");
    }
    return value;
  }

  Eigen::Matrix3d Matrix(size_t first) const {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        m(r, c) = Real(first + 3 * r + c);
      }
    }
    return m;
  }

  Rotation RotationAt(size_t first) const {
    const Eigen::Matrix3d m = Matrix(first);
    if (!IsRotation(m, kFileRotationTolerance)) {
      std::ostringstream msg;
      msg << "line " << line_number_
          << ": block is not a rotation (orthogonality residual "
          << OrthogonalityResidual(m) << ", det " << m.determinant() << ")";
      throw InvariantError(msg.str());
    }
    if (IsRotation(m, kRotationTolerance)) {
      return Rotation::FromMatrixUnchecked(m);
    }
    return ProjectToSO3(m);
  }

  int line_number() const { return line_number_; }

 private:
  int line_number_;
  std::vector<std::string_view> tokens_;
};

std::ifstream OpenInput(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream OpenOutput(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void FinishOutput(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

ViewGraph::ViewGraph(int num_nodes, std::vector<RelativeRotation> edges,
                     std::optional<std::vector<Rotation>> ground_truth)
    : num_nodes_(num_nodes),
      edges_(std::move(edges)),
      ground_truth_(std::move(ground_truth)) {
  if (num_nodes_ < 1) {
    throw InvariantError("view graph needs at least one node");
  }
  for (auto& edge : edges_) {
    if (edge.i < 0 || edge.i >= num_nodes_ || edge.j < 0 ||
        edge.j >= num_nodes_) {
      throw InvariantError("edge (" + std::to_string(edge.i + 1) + ", " +
                           std::to_string(edge.j + 1) +
                           ") has an index outside [1, " +
                           std::to_string(num_nodes_) + "]");
    }
    if (edge.i == edge.j) {
      throw InvariantError("self-loop at node " + std::to_string(edge.i + 1));
    }
    if (edge.i > edge.j) {
      std::swap(edge.i, edge.j);
      edge.rotation = edge.rotation.Transpose();
    }
  }
  std::sort(edges_.begin(), edges_.end(),
            [](const RelativeRotation& a, const RelativeRotation& b) {
              return std::tie(a.i, a.j) < std::tie(b.i, b.j);
            });
  for (size_t k = 1; k < edges_.size(); ++k) {
    if (edges_[k].i == edges_[k - 1].i && edges_[k].j == edges_[k - 1].j) {
      throw InvariantError("duplicate edge (" + std::to_string(edges_[k].i + 1) +
                           ", " + std::to_string(edges_[k].j + 1) + ")");
    }
  }
  if (ground_truth_ &&
      static_cast<int>(ground_truth_->size()) != num_nodes_) {
    throw InvariantError("ground truth has " +
                         std::to_string(ground_truth_->size()) +
                         " rotations for " + std::to_string(num_nodes_) +
                         " nodes");
  }
}

bool ViewGraph::IsConnected() const {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(edges_.size());
  for (const auto& edge : edges_) pairs.emplace_back(edge.i, edge.j);
  return IsConnectedPairs(num_nodes_, pairs);
}

void ViewGraph::CheckConnected() const {
  if (!IsConnected()) {
    throw DisconnectedGraphError("view graph with " +
                                 std::to_string(num_nodes_) + " nodes and " +
                                 std::to_string(edges_.size()) +
                                 " edges is not connected");
  }
}

void ValidateSyntheticSpec(const SyntheticSpec& spec) {
  if (spec.n < 2) throw UsageError("synthetic graphs need n >= 2");
  if (!(spec.edge_prob >= 0.0 && spec.edge_prob <= 1.0)) {
    throw UsageError("edge probability must lie in [0, 1]");
  }
  if (!(spec.outlier_fraction >= 0.0 && spec.outlier_fraction <= 1.0)) {
    throw UsageError("outlier fraction must lie in [0, 1]");
  }
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    throw UsageError("noise sigma must be finite and non-negative");
  }
}

ViewGraph GenerateSynthetic(const SyntheticSpec& spec,
                            SyntheticDiagnostics* diagnostics) {
  ValidateSyntheticSpec(spec);
  std::mt19937_64 rng(spec.seed);

  std::vector<Rotation> truth;
  truth.reserve(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    truth.push_back(RandomRotation(rng, SamplingMode::kEulerUniform));
  }

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<std::pair<int, int>> pairs;
  int attempts = 0;
  for (;;) {
    if (attempts == kMaxConnectivityAttempts) {
      throw RejectionLimitError(
          "no connected Erdos-Renyi graph after " +
          std::to_string(kMaxConnectivityAttempts) + " draws (n = " +
          std::to_string(spec.n) + ", p = " + FormatDouble(spec.edge_prob) +
          ")");
    }
    ++attempts;
    pairs.clear();
    for (int i = 0; i < spec.n; ++i) {
      for (int j = i + 1; j < spec.n; ++j) {
        if (uniform(rng) < spec.edge_prob) pairs.emplace_back(i, j);
      }
    }
    if (IsConnectedPairs(spec.n, pairs)) break;
  }

  const int num_edges = static_cast<int>(pairs.size());
  const int num_outliers = std::min(
      num_edges,
      static_cast<int>(std::llround(spec.outlier_fraction * num_edges)));

  // Partial Fisher-Yates: the first num_outliers slots are the chosen edges.
  std::vector<int> order(num_edges);
  std::iota(order.begin(), order.end(), 0);
  for (int k = 0; k < num_outliers; ++k) {
    std::uniform_int_distribution<int> pick(k, num_edges - 1);
    std::swap(order[k], order[pick(rng)]);
  }
  std::vector<bool> is_outlier(num_edges, false);
  for (int k = 0; k < num_outliers; ++k) is_outlier[order[k]] = true;

  std::vector<double> noise_angle(num_edges, 0.0);
  std::vector<RelativeRotation> edges;
  edges.reserve(num_edges);
  for (int e = 0; e < num_edges; ++e) {
    const auto [i, j] = pairs[e];
    Rotation measured;
    if (is_outlier[e]) {
      measured = RandomRotation(rng, spec.outlier_mode);
    } else {
      const Rotation noise =
          RandomPerturbation(spec.noise_sigma, rng, &noise_angle[e]);
      measured = truth[i] * truth[j].Transpose() * noise;
    }
    edges.push_back({i, j, measured});
  }

  if (diagnostics != nullptr) {
    diagnostics->is_outlier = std::move(is_outlier);
    diagnostics->noise_angle = std::move(noise_angle);
    diagnostics->attempts = attempts;
  }
  // Pairs are generated in (i, j) order, so edge indices line up with the
  // sorted storage of ViewGraph.
  return ViewGraph(spec.n, std::move(edges), std::move(truth));
}

std::vector<Rotation> SpanningTreeSolve(const ViewGraph& graph) {
  graph.CheckConnected();
  const int n = graph.NumNodes();
  // adjacency[a] holds (b, R_ab) with R_ab the measurement of R_a R_b^T.
  std::vector<std::vector<std::pair<int, Rotation>>> adjacency(n);
  for (const auto& edge : graph.Edges()) {
    adjacency[edge.i].emplace_back(edge.j, edge.rotation);
    adjacency[edge.j].emplace_back(edge.i, edge.rotation.Transpose());
  }
  // Edges are sorted, but the two insertion streams interleave.
  for (auto& neighbours : adjacency) {
    std::sort(neighbours.begin(), neighbours.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  std::vector<Rotation> rotations(n);
  std::vector<bool> visited(n, false);
  std::queue<int> frontier;
  visited[0] = true;
  frontier.push(0);
  while (!frontier.empty()) {
    const int parent = frontier.front();
    frontier.pop();
    for (const auto& [child, parent_child] : adjacency[parent]) {
      if (visited[child]) continue;
      visited[child] = true;
      // R_child = R_{child,parent} R_parent.
      rotations[child] = parent_child.Transpose() * rotations[parent];
      frontier.push(child);
    }
  }
  return rotations;
}

ViewGraph ReadViewGraph(std::istream& edges_in, std::istream* ground_truth) {
  std::optional<int> num_nodes;
  std::vector<RelativeRotation> edges;
  std::string line;
  int line_number = 0;
  while (std::getline(edges_in, line)) {
    ++line_number;
    const LineTokens tokens(line, line_number);
    if (tokens.empty()) continue;
    if (tokens[0] == "n") {
      if (num_nodes) tokens.Fail("duplicate 'n' header");
      if (tokens.size() != 2) tokens.Fail("header must be 'n <count>'");
      const long long count = tokens.Integer(1);
      if (count < 1 || count > (1 << 24)) tokens.Fail("node count out of range");
      num_nodes = static_cast<int>(count);
      continue;
    }
    if (!num_nodes) tokens.Fail("edge record before 'n <count>' header");
    if (tokens.size() != 11) {
      tokens.Fail("edge record needs 11 fields, got " +
                  std::to_string(tokens.size()));
    }
    const long long i = tokens.Integer(0);
    const long long j = tokens.Integer(1);
    if (i < 1 || i > *num_nodes || j < 1 || j > *num_nodes) {
      throw InvariantError("line " + std::to_string(line_number) +
                           ": node index outside [1, " +
                           std::to_string(*num_nodes) + "]");
    }
    edges.push_back({static_cast<int>(i - 1), static_cast<int>(j - 1),
                     tokens.RotationAt(2)});
  }
  if (edges_in.bad()) throw IoError("read error in edge list");
  if (!num_nodes) throw ParseError("missing 'n <count>' header");

  std::optional<std::vector<Rotation>> truth;
  if (ground_truth != nullptr) {
    truth = ReadRotations(*ground_truth);
  }
  return ViewGraph(*num_nodes, std::move(edges), std::move(truth));
}

ViewGraph ReadViewGraph(
    const std::filesystem::path& edges_path,
    const std::optional<std::filesystem::path>& ground_truth_path) {
  std::ifstream edges_in = OpenInput(edges_path);
  if (!ground_truth_path) return ReadViewGraph(edges_in);
  std::ifstream truth_in = OpenInput(*ground_truth_path);
  return ReadViewGraph(edges_in, &truth_in);
}

void WriteViewGraph(const ViewGraph& graph, std::ostream& out) {
  out << "n " << graph.NumNodes() << '\n';
  for (const auto& edge : graph.Edges()) {
    out << edge.i + 1 << ' ' << edge.j + 1;
    WriteMatrixRowMajor(edge.rotation.matrix(), out);
    out << '\n';
  }
}

void WriteViewGraph(const ViewGraph& graph,
                    const std::filesystem::path& edges_path) {
  std::ofstream out = OpenOutput(edges_path);
  WriteViewGraph(graph, out);
  FinishOutput(out, edges_path);
}

std::vector<Rotation> ReadRotations(std::istream& in) {
  std::vector<std::optional<Rotation>> slots;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const LineTokens tokens(line, line_number);
    if (tokens.empty()) continue;
    if (tokens.size() != 10) {
      tokens.Fail("rotation record needs 10 fields, got " +
                  std::to_string(tokens.size()));
    }
    const long long index = tokens.Integer(0);
    if (index < 1 || index > (1 << 24)) tokens.Fail("node index out of range");
    if (static_cast<long long>(slots.size()) < index) slots.resize(index);
    if (slots[index - 1]) {
      throw InvariantError("line " + std::to_string(line_number) +
                           ": duplicate rotation for node " +
                           std::to_string(index));
    }
    slots[index - 1] = tokens.RotationAt(1);
  }
  if (in.bad()) throw IoError("read error in rotation file");
  std::vector<Rotation> rotations;
  rotations.reserve(slots.size());
  for (size_t k = 0; k < slots.size(); ++k) {
    if (!slots[k]) {
      throw InvariantError("rotation file has no entry for node " +
                           std::to_string(k + 1));
    }
    rotations.push_back(*slots[k]);
  }
  if (rotations.empty()) throw ParseError("rotation file is empty");
  return rotations;
}

std::vector<Rotation> ReadRotations(const std::filesystem::path& path) {
  std::ifstream in = OpenInput(path);
  return ReadRotations(in);
}

void WriteRotations(const std::vector<Rotation>& rotations, std::ostream& out) {
  for (size_t k = 0; k < rotations.size(); ++k) {
    out << k + 1;
    WriteMatrixRowMajor(rotations[k].matrix(), out);
    out << '\n';
  }
}

void WriteRotations(const std::vector<Rotation>& rotations,
                    const std::filesystem::path& path) {
  std::ofstream out = OpenOutput(path);
  WriteRotations(rotations, out);
  FinishOutput(out, path);
}

}  // namespace dmfsync
