#include <gtest/gtest.h>

#include <random>

#include "chunkstitch/chunk_geometry.hpp"
#include "chunkstitch/error.hpp"
#include "chunkstitch/pose_graph.hpp"
#include "graph_oracle.hpp"
#include "test_support.hpp"

using namespace chunkstitch;
namespace oracle = chunkstitch::testing;
using oracle::brute_force_minimum;
using oracle::chain;
using oracle::small_sim3;
using oracle::oracle_residual_sq;
using oracle::toy_graph;

namespace {

Frame frame_with_depth(std::int64_t id, const Sim3& pose, double z) {
  Frame f;
  f.frame_id = id;
  f.intrinsics = {2.0, 2.0, 1.0, 1.0, 2, 2};
  f.pose = pose;
  f.depth = {Grid::Constant(2, 2, z), Grid::Ones(2, 2)};
  return f;
}

}  // namespace

TEST(EdgeResidual, Examples) {
  std::mt19937_64 rng(1);
  const Sim3 si = oracle::random_sim3(rng), m = oracle::random_sim3(rng);
  EXPECT_LT(edge_residual(m, si, si * m).vector().norm(), 1e-9);

  const Sim3Tangent tau = oracle::random_tangent(rng, 2.0);
  EXPECT_LT((edge_residual(Sim3::exp(tau), Sim3(), Sim3()).vector() + tau.vector()).norm(), 1e-9);

  for (int trial = 0; trial < 50; ++trial) {
    const Sim3 a = small_sim3(rng, 0.5), b = small_sim3(rng, 0.5), c = small_sim3(rng, 0.5);
    const Mat4 rel = c.matrix().inverse() * a.matrix().inverse() * b.matrix();
    EXPECT_LT((edge_residual(c, a, b).vector() - oracle::oracle_log(rel)).norm(), 1e-9);
  }
}

TEST(TotalCost, Examples) {
  std::mt19937_64 rng(2);
  PoseGraph g = chain(rng, 5, 0.3);
  EXPECT_LT(total_cost(g), 1e-20);

  PoseGraph one;
  one.nodes = {Sim3(), Sim3()};
  Sim3Tangent t;
  t.rho = Vec3(0.3, 0.0, 0.4);
  one.edges.push_back({EdgeKind::Sequential, 0, 1, Sim3::exp(t)});
  EXPECT_NEAR(total_cost(one), 0.25, 1e-15);

  for (auto& n : g.nodes) n = n * small_sim3(rng, 0.2);
  g.edges.push_back({EdgeKind::Loop, 0, 4, small_sim3(rng, 0.3)});
  double sum = 0.0;
  for (const auto& e : g.edges) sum += oracle_residual_sq(e.measurement, g.nodes[e.i], g.nodes[e.j]);
  EXPECT_NEAR(total_cost(g), sum, 1e-10 * sum);
}

TEST(PoseGraph, Validation) {
  std::mt19937_64 rng(3);
  PoseGraph g = chain(rng, 4, 0.1);
  EXPECT_NO_THROW(g.validate());
  PoseGraph broken = g;
  broken.edges.erase(broken.edges.begin() + 1);
  try {
    optimize(broken);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotConnected);
  }
  PoseGraph bad = g;
  bad.edges.push_back({EdgeKind::Loop, 1, 1, Sim3()});
  EXPECT_THROW(bad.validate(), Error);
  bad.edges.back() = {EdgeKind::Loop, 0, 9, Sim3()};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Optimize, ZeroResidualUnchanged) {
  std::mt19937_64 rng(4);
  PoseGraph g = chain(rng, 6, 0.3);
  g.edges.push_back({EdgeKind::Loop, 1, 5, g.nodes[1].inverse() * g.nodes[5]});
  const auto r = optimize(g);
  EXPECT_TRUE(r.report.converged);
  EXPECT_LE(r.report.iterations, 1);
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    EXPECT_LT(oracle::max_abs_diff(r.nodes[k].matrix(), g.nodes[k].matrix()), 1e-12);
  }
}

TEST(Optimize, ConsistentChainIsOptimal) {
  std::mt19937_64 rng(5);
  const PoseGraph g = chain(rng, 10, 0.4);
  const auto r = optimize(g);
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    EXPECT_LT(oracle::max_abs_diff(r.nodes[k].matrix(), g.nodes[k].matrix()), 1e-10);
  }
}

TEST(Optimize, ToyGraphMatchesBruteForce) {
  for (std::uint64_t seed : {10u, 11u, 12u}) {
    const PoseGraph g = toy_graph(seed);
    const auto r = optimize(g);
    const double reference = brute_force_minimum(g);
    EXPECT_TRUE(r.report.converged);
    EXPECT_LT(r.report.final_cost, r.report.initial_cost);
    EXPECT_NEAR(r.report.final_cost, reference, 1e-6) << seed;
    EXPECT_EQ(r.nodes[0].matrix(), g.nodes[0].matrix());

    // The loop inconsistency is shared by both sequential edges instead of
    // being left on the loop edge.
    PoseGraph solved = g;
    solved.nodes = r.nodes;
    const double seq0 = edge_residual(g.edges[0].measurement, r.nodes[0], r.nodes[1]).norm();
    const double seq1 = edge_residual(g.edges[1].measurement, r.nodes[1], r.nodes[2]).norm();
    const double loop = edge_residual(g.edges[2].measurement, r.nodes[0], r.nodes[2]).norm();
    EXPECT_GT(seq0, 0.1 * loop);
    EXPECT_GT(seq1, 0.1 * loop);
    EXPECT_NEAR(total_cost(solved), r.report.final_cost, 1e-12);
  }
}

TEST(Optimize, GainRatioBand) {
  for (std::uint64_t seed : {20u, 21u, 22u, 23u}) {
    const PoseGraph g = toy_graph(seed);
    const auto r = optimize(g);
    ASSERT_FALSE(r.report.gain_ratios.empty());
    for (std::size_t k = 0; k < r.report.gain_ratios.size(); ++k) {
      if (r.report.accepted_damping[k] > 1e-2) continue;
      EXPECT_GE(r.report.gain_ratios[k], 0.5) << seed << " step " << k;
      EXPECT_LE(r.report.gain_ratios[k], 2.0) << seed << " step " << k;
    }
  }
}

TEST(Optimize, GaugeInvariance) {
  std::mt19937_64 rng(30);
  PoseGraph g = chain(rng, 8, 0.2);
  g.edges.push_back({EdgeKind::Loop, 0, 7, (g.nodes[0].inverse() * g.nodes[7]) * small_sim3(rng, 0.05)});
  g.edges.push_back({EdgeKind::Loop, 2, 6, (g.nodes[2].inverse() * g.nodes[6]) * small_sim3(rng, 0.05)});
  const Sim3 t = oracle::random_sim3(rng);
  PoseGraph moved = g;
  for (auto& n : moved.nodes) n = t * n;
  const auto a = optimize(g), b = optimize(moved);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < g.nodes.size(); ++j) {
      const Mat4 ra = (a.nodes[i].inverse() * a.nodes[j]).matrix();
      const Mat4 rb = (b.nodes[i].inverse() * b.nodes[j]).matrix();
      EXPECT_LT(oracle::max_abs_diff(ra, rb), 1e-8);
    }
  }
}

TEST(Optimize, MonotoneCostAndSparseAgreesWithDense) {
  std::mt19937_64 rng(40);
  PoseGraph g = chain(rng, 12, 0.2);
  for (auto& n : g.nodes) n = n * small_sim3(rng, 0.02);
  g.nodes[0] = chain(rng, 1, 0.0).nodes[0];
  g.edges.push_back({EdgeKind::Loop, 0, 11, g.edges[0].measurement * small_sim3(rng, 0.1)});
  const auto dense = optimize(g);
  SolveSettings sparse_settings;
  sparse_settings.dense_limit = 0;
  const auto sparse = optimize(g, sparse_settings);
  EXPECT_LE(dense.report.final_cost, dense.report.initial_cost);
  EXPECT_NEAR(dense.report.final_cost, sparse.report.final_cost, 1e-10);
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    EXPECT_LT(oracle::max_abs_diff(dense.nodes[k].matrix(), sparse.nodes[k].matrix()), 1e-7);
  }
}

TEST(Optimize, AngleAtPiNamesEdge) {
  PoseGraph g;
  g.nodes = {Sim3(), Sim3(), Sim3()};
  g.edges.push_back({EdgeKind::Sequential, 0, 1, Sim3()});
  g.edges.push_back({EdgeKind::Sequential, 1, 2, Sim3::from_rotation(so3_exp(Vec3(0, 0, M_PI)))});
  try {
    optimize(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AngleAtPi);
    EXPECT_NE(std::string(e.what()).find("edge #1"), std::string::npos) << e.what();
  }
}

TEST(ChainInitialization, Composes) {
  std::mt19937_64 rng(50);
  const Sim3 anchor = oracle::random_sim3(rng);
  const std::vector<Sim3> ms = {small_sim3(rng, 0.3), small_sim3(rng, 0.3), small_sim3(rng, 0.3)};
  const auto nodes = chain_initialization(anchor, ms);
  ASSERT_EQ(nodes.size(), 4u);
  const Mat4 oracle_last = anchor.matrix() * ms[0].matrix() * ms[1].matrix() * ms[2].matrix();
  EXPECT_LT(oracle::max_abs_diff(nodes[3].matrix(), oracle_last), 1e-12);
}

TEST(Propagate, SingleChunkIdentity) {
  ChunkArtifact c;
  const Sim3 p1 = Sim3::from_translation(Vec3(0, 0, 1));
  c.frames = {frame_with_depth(0, Sim3(), 2.0), frame_with_depth(1, p1, 3.0)};
  const auto scene = propagate_to_frames({Sim3()}, {c});
  ASSERT_EQ(scene.trajectory.size(), 2u);
  EXPECT_EQ(scene.trajectory.positions[1], Vec3(0, 0, 1));
  EXPECT_EQ(scene.points.size(), 8u);
  EXPECT_LT((scene.points[0] - backproject_pixel(0, 0, 2.0, c.frames[0].intrinsics, Sim3())).norm(), 1e-15);
}

TEST(Propagate, TranslationNodeShifts) {
  ChunkArtifact c;
  c.frames = {frame_with_depth(4, Sim3::from_translation(Vec3(1, 2, 3)), 2.0)};
  const auto scene = propagate_to_frames({Sim3::from_translation(Vec3(10, 0, 0))}, {c});
  EXPECT_EQ(scene.trajectory.positions[0], Vec3(11, 2, 3));
  EXPECT_EQ(scene.trajectory.frame_ids[0], 4);
}

TEST(Propagate, EarliestChunkWins) {
  ChunkArtifact a, b;
  a.chunk_id = 0;
  b.chunk_id = 1;
  a.frames = {frame_with_depth(0, Sim3(), 1.0), frame_with_depth(1, Sim3(), 1.0)};
  b.frames = {frame_with_depth(1, Sim3::from_translation(Vec3(5, 0, 0)), 1.0), frame_with_depth(2, Sim3(), 1.0)};
  const auto scene = propagate_to_frames({Sim3(), Sim3::from_translation(Vec3(0, 1, 0))}, {a, b});
  ASSERT_EQ(scene.trajectory.size(), 3u);
  EXPECT_EQ(scene.trajectory.positions[1], Vec3(0, 0, 0));
  EXPECT_EQ(scene.trajectory.positions[2], Vec3(0, 1, 0));
  EXPECT_EQ(scene.points.size(), 12u);
  EXPECT_THROW(propagate_to_frames({Sim3()}, {a, b}), Error);

  PropagateOptions opts;
  opts.include_points = false;
  EXPECT_TRUE(propagate_to_frames({Sim3(), Sim3()}, {a, b}, opts).points.empty());
}
