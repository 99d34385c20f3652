#include "chunkstitch/pose_graph.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "chunkstitch/chunk_geometry.hpp"
#include "chunkstitch/error.hpp"
#include "chunkstitch/log.hpp"

namespace chunkstitch {

namespace {

using Mat7 = Eigen::Matrix<double, 7, 7>;

constexpr double kMaxDamping = 1e16;

std::string describe(const PoseGraphEdge& e, std::size_t index) {
  std::ostringstream msg;
  msg << (e.kind == EdgeKind::Loop ? "loop" : "sequential") << " edge #" << index << " (" << e.i << " -> "
      << e.j << ")";
  return msg.str();
}

Vec7 residual_or_throw(const PoseGraphEdge& e, const std::vector<Sim3>& nodes, std::size_t index) {
  try {
    return edge_residual(e.measurement, nodes[e.i], nodes[e.j]).vector();
  } catch (const Error& err) {
    throw Error(err.code(), describe(e, index) + ": " + err.what());
  }
}

double cost_of(const PoseGraph& g, const std::vector<Sim3>& nodes, Eigen::VectorXd* residuals) {
  double cost = 0.0;
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const Vec7 r = residual_or_throw(g.edges[k], nodes, k);
    if (residuals) residuals->segment<7>(static_cast<Eigen::Index>(7 * k)) = r;
    cost += r.squaredNorm();
  }
  return cost;
}

Sim3 perturb(const Sim3& node, int axis, double step) {
  Vec7 delta = Vec7::Zero();
  delta(axis) = step;
  return node * Sim3::exp(Sim3Tangent::from_vector(delta));
}

// d residual / d (right perturbation of node `which`) by central differences.
Mat7 edge_jacobian(const PoseGraphEdge& e, const std::vector<Sim3>& nodes, bool wrt_i, double h) {
  Mat7 jac;
  for (int a = 0; a < 7; ++a) {
    const Sim3& base = wrt_i ? nodes[e.i] : nodes[e.j];
    const Sim3 plus = perturb(base, a, h), minus = perturb(base, a, -h);
    const Sim3& si_p = wrt_i ? plus : nodes[e.i];
    const Sim3& sj_p = wrt_i ? nodes[e.j] : plus;
    const Sim3& si_m = wrt_i ? minus : nodes[e.i];
    const Sim3& sj_m = wrt_i ? nodes[e.j] : minus;
    jac.col(a) = (edge_residual(e.measurement, si_p, sj_p).vector() -
                  edge_residual(e.measurement, si_m, sj_m).vector()) /
                 (2.0 * h);
  }
  return jac;
}

// Normal equations of the linearized problem in the free-node tangent space.
struct Linearization {
  std::vector<Mat7> blocks_i;  // per edge, zero-size when node i is the anchor
  std::vector<Mat7> blocks_j;
  Eigen::MatrixXd dense_h;
  Eigen::SparseMatrix<double> sparse_h;
  Eigen::VectorXd gradient;  // J^T r
};

Linearization linearize(const PoseGraph& g, const std::vector<Sim3>& nodes, const Eigen::VectorXd& r,
                        double h, bool dense) {
  const std::size_t free = nodes.size() - 1;
  const auto dim = static_cast<Eigen::Index>(7 * free);
  Linearization lin;
  lin.blocks_i.resize(g.edges.size());
  lin.blocks_j.resize(g.edges.size());
  lin.gradient = Eigen::VectorXd::Zero(dim);
  std::map<std::pair<std::size_t, std::size_t>, Mat7> h_blocks;
  auto add_block = [&](std::size_t a, std::size_t b, const Mat7& m) {
    auto [it, inserted] = h_blocks.try_emplace({a, b}, m);
    if (!inserted) it->second += m;
  };

  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto& e = g.edges[k];
    const Vec7 rk = r.segment<7>(static_cast<Eigen::Index>(7 * k));
    const bool free_i = e.i != 0, free_j = e.j != 0;
    if (free_i) lin.blocks_i[k] = edge_jacobian(e, nodes, true, h);
    if (free_j) lin.blocks_j[k] = edge_jacobian(e, nodes, false, h);
    if (free_i) {
      lin.gradient.segment<7>(static_cast<Eigen::Index>(7 * (e.i - 1))) += lin.blocks_i[k].transpose() * rk;
      add_block(e.i, e.i, lin.blocks_i[k].transpose() * lin.blocks_i[k]);
    }
    if (free_j) {
      lin.gradient.segment<7>(static_cast<Eigen::Index>(7 * (e.j - 1))) += lin.blocks_j[k].transpose() * rk;
      add_block(e.j, e.j, lin.blocks_j[k].transpose() * lin.blocks_j[k]);
    }
    if (free_i && free_j) {
      add_block(e.i, e.j, lin.blocks_i[k].transpose() * lin.blocks_j[k]);
      add_block(e.j, e.i, lin.blocks_j[k].transpose() * lin.blocks_i[k]);
    }
  }

  if (dense) {
    lin.dense_h = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& [key, m] : h_blocks) {
      lin.dense_h.block<7, 7>(static_cast<Eigen::Index>(7 * (key.first - 1)),
                              static_cast<Eigen::Index>(7 * (key.second - 1))) += m;
    }
  } else {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(h_blocks.size() * 49);
    for (const auto& [key, m] : h_blocks) {
      for (int a = 0; a < 7; ++a) {
        for (int b = 0; b < 7; ++b) {
          triplets.emplace_back(static_cast<int>(7 * (key.first - 1) + a),
                                static_cast<int>(7 * (key.second - 1) + b), m(a, b));
        }
      }
    }
    lin.sparse_h.resize(dim, dim);
    lin.sparse_h.setFromTriplets(triplets.begin(), triplets.end());
  }
  return lin;
}

std::optional<Eigen::VectorXd> solve_damped(const Linearization& lin, double damping, bool dense) {
  if (dense) {
    Eigen::MatrixXd a = lin.dense_h;
    a.diagonal().array() += damping;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) return std::nullopt;
    Eigen::VectorXd x = ldlt.solve(-lin.gradient);
    if (!x.allFinite()) return std::nullopt;
    return x;
  }
  Eigen::SparseMatrix<double> a = lin.sparse_h;
  Eigen::SparseMatrix<double> eye(a.rows(), a.cols());
  eye.setIdentity();
  a += damping * eye;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  Eigen::VectorXd x = ldlt.solve(-lin.gradient);
  if (ldlt.info() != Eigen::Success || !x.allFinite()) return std::nullopt;
  return x;
}

// ||r||^2 - ||r + J delta||^2 under the current linearization.
double predicted_decrease(const PoseGraph& g, const Linearization& lin, const Eigen::VectorXd& r,
                          const Eigen::VectorXd& delta) {
  double before = 0.0, after = 0.0;
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto& e = g.edges[k];
    const Vec7 rk = r.segment<7>(static_cast<Eigen::Index>(7 * k));
    Vec7 lin_r = rk;
    if (e.i != 0) lin_r += lin.blocks_i[k] * delta.segment<7>(static_cast<Eigen::Index>(7 * (e.i - 1)));
    if (e.j != 0) lin_r += lin.blocks_j[k] * delta.segment<7>(static_cast<Eigen::Index>(7 * (e.j - 1)));
    before += rk.squaredNorm();
    after += lin_r.squaredNorm();
  }
  return before - after;
}

}  // namespace

void PoseGraph::validate() const {
  const std::size_t n = nodes.size();
  if (n == 0) throw Error(ErrorCode::InvalidSpec, "pose graph has no nodes");
  std::vector<bool> linked(n > 0 ? n - 1 : 0, false);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    if (e.i >= n || e.j >= n || e.i == e.j) {
      throw Error(ErrorCode::InvalidSpec, describe(e, k) + " has invalid node indices");
    }
    if (e.kind == EdgeKind::Sequential) {
      if (e.j != e.i + 1) throw Error(ErrorCode::NotConnected, describe(e, k) + " does not join consecutive nodes");
      linked[e.i] = true;
    }
  }
  for (std::size_t t = 0; t + 1 < n; ++t) {
    if (!linked[t]) {
      throw Error(ErrorCode::NotConnected,
                  "no sequential edge between nodes " + std::to_string(t) + " and " + std::to_string(t + 1));
    }
  }
}

Sim3Tangent edge_residual(const Sim3& measurement, const Sim3& s_i, const Sim3& s_j) {
  return (measurement.inverse() * (s_i.inverse() * s_j)).log();
}

double total_cost(const PoseGraph& g) { return cost_of(g, g.nodes, nullptr); }

std::vector<Sim3> chain_initialization(const Sim3& anchor, const std::vector<Sim3>& sequential_measurements) {
  std::vector<Sim3> nodes{anchor};
  nodes.reserve(sequential_measurements.size() + 1);
  for (const auto& m : sequential_measurements) nodes.push_back(nodes.back() * m);
  return nodes;
}

OptimizeResult optimize(const PoseGraph& g, const SolveSettings& settings) {
  g.validate();
  OptimizeResult result{g.nodes, {}};
  auto& report = result.report;
  const auto m = static_cast<Eigen::Index>(7 * g.edges.size());
  Eigen::VectorXd r(m);
  double cost = cost_of(g, result.nodes, &r);
  report.initial_cost = report.final_cost = cost;
  if (g.nodes.size() < 2 || g.edges.empty() || cost == 0.0) {
    report.converged = true;
    return result;
  }

  const bool dense = g.nodes.size() - 1 <= settings.dense_limit;
  double damping = settings.initial_damping;
  Linearization lin = linearize(g, result.nodes, r, settings.jacobian_step, dense);

  while (report.iterations < settings.max_iters) {
    ++report.iterations;
    const auto delta = solve_damped(lin, damping, dense);
    if (!delta) {
      damping *= settings.damping_up;
      if (damping > kMaxDamping) break;
      continue;
    }
    if (delta->norm() < settings.step_tolerance) {
      report.converged = true;
      break;
    }

    std::vector<Sim3> trial = result.nodes;
    for (std::size_t k = 1; k < trial.size(); ++k) {
      const Vec7 dk = delta->segment<7>(static_cast<Eigen::Index>(7 * (k - 1)));
      trial[k] = trial[k] * Sim3::exp(Sim3Tangent::from_vector(dk));
    }
    Eigen::VectorXd trial_r(m);
    double trial_cost = std::numeric_limits<double>::infinity();
    try {
      trial_cost = cost_of(g, trial, &trial_r);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::AngleAtPi) throw;
      log_debug(std::string("rejected LM step: ") + err.what());
    }

    if (trial_cost < cost) {
      const double predicted = predicted_decrease(g, lin, r, *delta);
      const double actual = cost - trial_cost;
      report.gain_ratios.push_back(predicted > 0.0 ? actual / predicted : 0.0);
      report.accepted_damping.push_back(damping);
      result.nodes = std::move(trial);
      r = std::move(trial_r);
      const double previous = cost;
      cost = trial_cost;
      damping = std::max(damping * settings.damping_down, 1e-15);
      if (actual <= settings.cost_tolerance * previous || cost == 0.0) {
        report.converged = true;
        break;
      }
      lin = linearize(g, result.nodes, r, settings.jacobian_step, dense);
    } else {
      damping *= settings.damping_up;
      if (damping > kMaxDamping) {
        // No descent direction left at machine precision.
        report.converged = lin.gradient.lpNorm<Eigen::Infinity>() < 1e-10;
        break;
      }
    }
  }
  report.final_cost = cost;
  return result;
}

PropagatedScene propagate_to_frames(const std::vector<Sim3>& nodes, const std::vector<ChunkArtifact>& chunks,
                                    const PropagateOptions& options) {
  if (nodes.size() != chunks.size()) {
    throw Error(ErrorCode::ShapeMismatch, "need one node per chunk, got " + std::to_string(nodes.size()) +
                                              " nodes for " + std::to_string(chunks.size()) + " chunks");
  }
  struct Assignment {
    std::size_t chunk;
    std::size_t frame;
  };
  std::map<std::int64_t, Assignment> owner;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    for (std::size_t f = 0; f < chunks[c].frames.size(); ++f) owner.try_emplace(chunks[c].frames[f].frame_id, Assignment{c, f});
  }

  PropagatedScene scene;
  const int stride = std::max(options.pixel_stride, 1);
  for (const auto& [id, a] : owner) {
    const Frame& frame = chunks[a.chunk].frames[a.frame];
    const Sim3 world = nodes[a.chunk] * frame.pose;
    scene.trajectory.push_back(id, world.rotation(), world.translation());
    if (!options.include_points) continue;
    const DepthMap depth =
        options.reference ? normalize_depth(frame.depth, frame.intrinsics, *options.reference) : frame.depth;
    for (int v = 0; v < depth.height(); v += stride) {
      for (int u = 0; u < depth.width(); u += stride) {
        const double z = depth.values(v, u);
        if (!(z > 0.0) || (options.depth_ceiling > 0.0 && z > options.depth_ceiling)) continue;
        scene.points.push_back(backproject_pixel(u, v, z, frame.intrinsics, world));
      }
    }
  }
  return scene;
}

}  // namespace chunkstitch
