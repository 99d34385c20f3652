#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "chunkstitch/chunk.hpp"
#include "chunkstitch/sim3.hpp"
#include "chunkstitch/trajectory.hpp"

namespace chunkstitch {

enum class EdgeKind { Sequential, Loop };

/// Relative constraint between chunk nodes. A consistent edge satisfies
/// node_j = node_i * measurement, i.e. the measurement carries chunk-j
/// coordinates into chunk-i coordinates.
struct PoseGraphEdge {
  EdgeKind kind = EdgeKind::Sequential;
  std::size_t i = 0;
  std::size_t j = 0;
  Sim3 measurement;
};

/// Nodes are chunk-to-world similarities; node 0 is the gauge anchor.
struct PoseGraph {
  std::vector<Sim3> nodes;
  std::vector<PoseGraphEdge> edges;

  /// Throws InvalidSpec for bad edge indices and NotConnected unless every
  /// consecutive node pair is joined by a sequential edge.
  void validate() const;
};

struct SolveSettings {
  int max_iters = 100;
  double initial_damping = 1e-4;
  double damping_up = 10.0;
  double damping_down = 0.1;
  double cost_tolerance = 1e-10;
  double step_tolerance = 1e-10;
  /// Central-difference step per tangent coordinate.
  double jacobian_step = 1e-6;
  /// Above this many free nodes the normal equations use a sparse solver.
  std::size_t dense_limit = 500;
};

/// log(measurement^-1 * s_i^-1 * s_j).
Sim3Tangent edge_residual(const Sim3& measurement, const Sim3& s_i, const Sim3& s_j);

/// Sum of squared residual norms over all edges, equal weights.
double total_cost(const PoseGraph& g);

struct OptimizeReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  /// Realized over predicted cost decrease of every accepted step.
  std::vector<double> gain_ratios;
  /// Damping used for each accepted step.
  std::vector<double> accepted_damping;
};

struct OptimizeResult {
  std::vector<Sim3> nodes;
  OptimizeReport report;
};

/// Levenberg-Marquardt on the stacked 7-D edge residuals. Free nodes are
/// updated by right perturbation node_k <- node_k * exp(delta_k); node 0 is
/// never touched. Jacobians are central finite differences.
/// Throws NotConnected, or AngleAtPi naming the offending edge.
OptimizeResult optimize(const PoseGraph& g, const SolveSettings& settings = {});

/// Chains sequential measurements from node 0: node_{t+1} = node_t * m_t.
std::vector<Sim3> chain_initialization(const Sim3& anchor, const std::vector<Sim3>& sequential_measurements);

struct PropagateOptions {
  /// Depth normalization target for the exported cloud; none = raw depth.
  std::optional<Intrinsics> reference;
  /// Keep every stride-th pixel in both directions.
  int pixel_stride = 1;
  /// Drop points with normalized depth above this value (0 = keep all).
  double depth_ceiling = 0.0;
  bool include_points = true;
};

struct PropagatedScene {
  TrajectoryEstimate trajectory;
  std::vector<Vec3> points;
};

/// Maps every frame's chunk-local pose (and back-projected depth) through its
/// chunk's node. A frame in several chunks takes the earliest chunk.
PropagatedScene propagate_to_frames(const std::vector<Sim3>& nodes, const std::vector<ChunkArtifact>& chunks,
                                    const PropagateOptions& options = {});

}  // namespace chunkstitch
