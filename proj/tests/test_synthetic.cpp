#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <random>

#include "chunkstitch/alignment.hpp"
#include "chunkstitch/error.hpp"
#include "chunkstitch/synthetic.hpp"

using namespace chunkstitch;

namespace {

SceneSpec small_spec(TrajectoryShape shape = TrajectoryShape::Circle) {
  SceneSpec s;
  s.seed = 11;
  s.n_frames = 120;
  s.chunk_size = 40;
  s.overlap = 15;
  s.point_density = 256;
  s.shape = shape;
  return s;
}

// Homogeneous-matrix relative transform carrying chunk-a coordinates into
// chunk-b coordinates, where each chunk's origin is its first true pose.
Mat4 gt_relative(const Scene& scene, std::size_t a, std::size_t b) {
  const Mat4 pa = scene.gt_poses[static_cast<std::size_t>(scene.chunk_ranges[a].begin)].matrix();
  const Mat4 pb = scene.gt_poses[static_cast<std::size_t>(scene.chunk_ranges[b].begin)].matrix();
  return pb.inverse() * pa;
}

}  // namespace

TEST(Scene, Deterministic) {
  SceneSpec s = small_spec();
  s.drift_sigma = 0.01;
  s.depth_noise_sigma = 0.01;
  s.outlier_fraction = 0.1;
  const Scene a = generate_scene(s), b = generate_scene(s);
  ASSERT_EQ(a.chunks.size(), b.chunks.size());
  for (std::size_t t = 0; t < a.chunks.size(); ++t) {
    ASSERT_EQ(a.chunks[t].frames.size(), b.chunks[t].frames.size());
    for (std::size_t k = 0; k < a.chunks[t].frames.size(); ++k) {
      const Frame &fa = a.chunks[t].frames[k], &fb = b.chunks[t].frames[k];
      EXPECT_TRUE((fa.depth.values == fb.depth.values).all());
      EXPECT_TRUE((fa.depth.confidence == fb.depth.confidence).all());
      EXPECT_TRUE(fa.tokens == fb.tokens);
      EXPECT_TRUE(fa.pose.matrix() == fb.pose.matrix());
    }
  }
  EXPECT_EQ(a.place_cluster, b.place_cluster);

  s.seed = 12;
  const Scene c = generate_scene(s);
  EXPECT_FALSE((c.chunks[0].frames[0].depth.values == a.chunks[0].frames[0].depth.values).all());
}

TEST(Scene, ChunksFollowSchedule) {
  const Scene scene = generate_scene(small_spec());
  ASSERT_EQ(scene.chunk_ranges, chunk_indices(120, 40, 15));
  for (std::size_t t = 0; t < scene.chunks.size(); ++t) {
    const auto& c = scene.chunks[t];
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.chunk_id, static_cast<std::int64_t>(t));
    EXPECT_EQ(c.frames.front().frame_id, scene.chunk_ranges[t].begin);
    EXPECT_EQ(c.frames.back().frame_id + 1, scene.chunk_ranges[t].end);
    // The chunk origin is its first camera.
    EXPECT_LT((c.frames.front().pose.matrix() - Mat4::Identity()).norm(), 1e-12);
  }
}

TEST(Scene, RendersUsableDepth) {
  const Scene scene = generate_scene(small_spec());
  const auto& k = scene.spec.camera;
  for (const auto& d : scene.true_depth) {
    const auto valid = (d > 0.0).count();
    EXPECT_GT(valid, k.width * k.height / 2);
    EXPECT_LE(d.maxCoeff(), 2.0 * scene.spec.far_depth);
  }
}

TEST(Scene, ZeroDriftAlignmentRecoversGroundTruth) {
  const Scene scene = generate_scene(small_spec());
  AlignParams params;
  for (std::size_t t = 0; t + 1 < scene.chunks.size(); ++t) {
    const Sim3 a = align_adjacent(scene.chunks[t], scene.chunks[t + 1], params).transform;
    const Mat4 correction = a.matrix() * gt_relative(scene, t, t + 1).inverse();
    EXPECT_LT((correction - Mat4::Identity()).norm(), 1e-9) << "chunk " << t;
  }
}

TEST(Scene, GroundTruthClosure) {
  SceneSpec s = small_spec();
  s.n_frames = 240;
  const Scene scene = generate_scene(s);
  const std::size_t last = scene.chunks.size() - 1;
  Mat4 around = gt_relative(scene, last, 0);
  for (std::size_t t = 0; t < last; ++t) around = gt_relative(scene, t, t + 1) * around;
  EXPECT_LT((around - Mat4::Identity()).norm(), 1e-9);

  for (std::size_t t = 0; t <= last; ++t) {
    const Mat4 c_inv = scene.gt_chunk_to_world[t].matrix();
    EXPECT_LT((c_inv - scene.gt_poses[static_cast<std::size_t>(scene.chunk_ranges[t].begin)].matrix()).norm(), 1e-12);
  }
}

TEST(Scene, SharedFrameDepthAgrees) {
  const Scene scene = generate_scene(small_spec());
  for (std::size_t t = 0; t + 1 < scene.chunks.size(); ++t) {
    for (const auto id : shared_frame_ids(scene.chunks[t], scene.chunks[t + 1])) {
      const auto& a = scene.chunks[t].frames[*scene.chunks[t].find_frame(id)];
      const auto& b = scene.chunks[t + 1].frames[*scene.chunks[t + 1].find_frame(id)];
      EXPECT_TRUE((a.depth.values == b.depth.values).all()) << "frame " << id;
    }
  }
}

TEST(Scene, DriftScalesDepthByChunkScale) {
  SceneSpec s = small_spec();
  s.drift_sigma = 0.05;
  const Scene scene = generate_scene(s);
  const auto& chunk = scene.chunks[1];
  const auto b = static_cast<double>(chunk.frames.size() - 1);
  for (std::size_t i = 0; i < chunk.frames.size(); i += 13) {
    // Scale of exp(u xi) is exp(u sigma).
    const double scale = std::exp(static_cast<double>(i) / b * scene.drift[1].sigma);
    const auto f = static_cast<std::size_t>(chunk.frames[i].frame_id);
    const Grid expected = scene.true_depth[f] * scale;
    EXPECT_LT((chunk.frames[i].depth.values - expected).abs().maxCoeff(), 1e-12);
  }
}

TEST(Scene, OutlierPixelsFlaggedByConfidence) {
  SceneSpec s = small_spec();
  s.outlier_fraction = 0.3;
  const Scene scene = generate_scene(s);
  std::size_t outliers = 0, valid = 0;
  for (const auto& frame : scene.chunks[0].frames) {
    const Grid& truth = scene.true_depth[static_cast<std::size_t>(frame.frame_id)];
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
      if (truth.data()[i] == 0.0) {
        EXPECT_EQ(frame.depth.values.data()[i], 0.0);
        EXPECT_EQ(frame.depth.confidence.data()[i], 0.0);
        continue;
      }
      ++valid;
      const double err = frame.depth.values.data()[i] - truth.data()[i];
      if (err >= 1.0) {
        ++outliers;
        EXPECT_LT(frame.depth.confidence.data()[i], 0.05);
      } else {
        EXPECT_EQ(err, 0.0);
        EXPECT_GE(frame.depth.confidence.data()[i], 0.8);
      }
    }
  }
  const double rate = static_cast<double>(outliers) / static_cast<double>(valid);
  EXPECT_NEAR(rate, 0.3, 0.02);
}

TEST(Scene, CircleLoopSharesClusters) {
  SceneSpec s = small_spec();
  s.n_frames = 300;
  const Scene looped = generate_scene(s);
  const auto first = looped.place_cluster.front();
  bool revisited = false;
  for (std::size_t k = 150; k < looped.place_cluster.size(); ++k) revisited |= looped.place_cluster[k] == first;
  EXPECT_TRUE(revisited);
  // Tokens of frames in the same cell differ only by noise.
  for (std::size_t k = 150; k < looped.place_cluster.size(); ++k) {
    if (looped.place_cluster[k] != first) continue;
    const Eigen::MatrixXd diff = looped.tokens[k] - looped.tokens[0];
    const Eigen::VectorXd shift = diff.colwise().mean();
    EXPECT_LT((diff.rowwise() - shift.transpose()).cwiseAbs().maxCoeff(), 0.5);
  }

  s.loop_closure = false;
  const Scene open = generate_scene(s);
  for (std::size_t k = 150; k < open.place_cluster.size(); ++k) EXPECT_NE(open.place_cluster[k], open.place_cluster[0]);
}

TEST(Scene, FigureEightCrossesItself) {
  SceneSpec s = small_spec(TrajectoryShape::FigureEight);
  s.n_frames = 400;
  const Scene scene = generate_scene(s);
  double closest = 1e9;
  for (std::size_t i = 0; i < scene.gt_poses.size(); ++i) {
    for (std::size_t j = i + 100; j < scene.gt_poses.size(); ++j) {
      closest = std::min(closest, (scene.gt_poses[i].translation() - scene.gt_poses[j].translation()).norm());
    }
  }
  EXPECT_LT(closest, s.frame_spacing);
}

TEST(Scene, FrameSpacing) {
  for (const auto shape : {TrajectoryShape::Line, TrajectoryShape::Circle, TrajectoryShape::FigureEight}) {
    const Scene scene = generate_scene(small_spec(shape));
    double length = 0.0;
    for (std::size_t k = 1; k < scene.gt_poses.size(); ++k) {
      length += (scene.gt_poses[k].translation() - scene.gt_poses[k - 1].translation()).norm();
    }
    // Chords of a curved path are slightly shorter than its arc.
    EXPECT_LE(length, 0.1 * 119 + 1e-9) << to_string(shape);
    EXPECT_GT(length, 0.99 * 0.1 * 119) << to_string(shape);
  }
}

TEST(Scene, LoopChunk) {
  const Scene scene = generate_scene(small_spec());
  const std::vector<std::int64_t> ids = {5, 6, 7, 8, 100, 101, 102};
  const ChunkArtifact loop = render_loop_chunk(scene, ids, 42);
  EXPECT_EQ(loop.kind, ChunkKind::Loop);
  EXPECT_EQ(loop.chunk_id, 42);
  EXPECT_EQ(loop.frame_ids(), ids);
  EXPECT_NO_THROW(loop.validate());
  // With zero drift the loop chunk and the temporal chunk differ by the
  // ground-truth change of origin.
  const Sim3 s = align_adjacent(loop, scene.chunks[0], AlignParams{}).transform;
  const Mat4 expected = scene.gt_poses[0].matrix().inverse() * scene.gt_poses[5].matrix();
  EXPECT_LT((s.matrix() - expected).norm(), 1e-9);

  EXPECT_THROW(render_loop_chunk(scene, {3}, 1), Error);
  EXPECT_THROW(render_loop_chunk(scene, {3, 3}, 1), Error);
  EXPECT_THROW(render_loop_chunk(scene, {3, 500}, 1), Error);
}

TEST(Scene, InvalidSpecs) {
  auto expect_invalid = [](SceneSpec s) {
    try {
      generate_scene(s);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidSpec);
    }
  };
  SceneSpec s = small_spec();
  s.n_frames = 30;
  expect_invalid(s);
  s = small_spec();
  s.drift_sigma = -1.0;
  expect_invalid(s);
  s = small_spec();
  s.outlier_fraction = 1.0;
  expect_invalid(s);
  s = small_spec();
  s.overlap = 40;
  expect_invalid(s);
  EXPECT_EQ(parse_trajectory_shape("figure-eight"), TrajectoryShape::FigureEight);
  EXPECT_THROW(parse_trajectory_shape("spiral"), Error);
}

TEST(InjectOutliers, ZeroFractionUnchanged) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  CorrespondenceSet c;
  for (int i = 0; i < 50; ++i) {
    c.src.emplace_back(n(rng), n(rng), n(rng));
    c.dst.emplace_back(n(rng), n(rng), n(rng));
  }
  const auto out = inject_outliers(c, 0.0, 100.0, 1);
  EXPECT_EQ(out.src, c.src);
  EXPECT_EQ(out.dst, c.dst);
}

TEST(InjectOutliers, ExactCountMagnitudeAndDeterminism) {
  CorrespondenceSet c;
  for (int i = 0; i < 1001; ++i) {
    c.src.emplace_back(i, 0, 0);
    c.dst.emplace_back(0, i, 0);
  }
  std::vector<std::size_t> moved, again;
  const auto out = inject_outliers(c, 0.3, 100.0, 9, &moved);
  inject_outliers(c, 0.3, 100.0, 9, &again);
  EXPECT_EQ(moved.size(), 300u);
  EXPECT_EQ(moved, again);
  EXPECT_TRUE(std::is_sorted(moved.begin(), moved.end()));
  std::size_t changed = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double d = (out.dst[i] - c.dst[i]).norm();
    if (d > 0.0) {
      ++changed;
      EXPECT_NEAR(d, 100.0, 1e-9);
      EXPECT_TRUE(std::binary_search(moved.begin(), moved.end(), i));
    }
    EXPECT_EQ(out.src[i], c.src[i]);
  }
  EXPECT_EQ(changed, 300u);

  std::vector<std::size_t> other;
  inject_outliers(c, 0.3, 100.0, 10, &other);
  EXPECT_NE(other, moved);
  EXPECT_THROW(inject_outliers(c, 1.0, 1.0, 1), Error);
}

TEST(PlaceTokens, VisitOrderAndSharedGrowth) {
  PlaceTokenSpec s;
  const PlaceTokens p = generate_place_tokens(s);
  ASSERT_EQ(p.tokens.size(), 500u);
  for (std::size_t f = 0; f < 500; ++f) EXPECT_EQ(p.place[f], static_cast<int>(f / 50) % 5) << f;
  // Frames 0, 250 and 299 are all place 0: their differences are the shared
  // direction, which lives on shared_channels channels and grows with time.
  const Eigen::RowVectorXd d0 = p.tokens[0].colwise().mean(), d1 = p.tokens[250].colwise().mean();
  const Eigen::RowVectorXd d2 = p.tokens[299].colwise().mean();
  const Eigen::RowVectorXd a = d1 - d0, b = d2 - d0;
  EXPECT_GT(a.dot(b) / (a.norm() * b.norm()), 0.999);
  EXPECT_GT(b.norm(), a.norm());
  EXPECT_NEAR(a.norm(), 0.75 * 8.0 * 250.0 / 499.0, 0.05);
  int large = 0;
  for (Eigen::Index c = 0; c < a.size(); ++c) large += std::abs(a(c)) > 0.05;
  EXPECT_EQ(large, s.shared_channels);
}

TEST(PlaceTokens, PlacesAreOffsetsOfOneBase) {
  PlaceTokenSpec s;
  s.shared_strength = 0.0;
  s.noise_sigma = 0.0;
  const PlaceTokens p = generate_place_tokens(s);
  const Eigen::MatrixXd diff = p.tokens[50] - p.tokens[0];
  EXPECT_NEAR(std::sqrt(diff.squaredNorm() / static_cast<double>(diff.size())), std::sqrt(2.0) * 0.2, 0.03);
  EXPECT_EQ(p.tokens[0], p.tokens[250]);
  EXPECT_EQ(p.tokens[0], p.tokens[49]);

  s.shared_channels = 0;
  EXPECT_THROW(generate_place_tokens(s), Error);
}
