#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "chunkstitch/alignment.hpp"
#include "chunkstitch/chunk.hpp"
#include "chunkstitch/chunk_geometry.hpp"
#include "chunkstitch/sim3.hpp"
#include "chunkstitch/trajectory.hpp"

namespace chunkstitch {

enum class TrajectoryShape { Line, Circle, FigureEight };

std::string_view to_string(TrajectoryShape s);
TrajectoryShape parse_trajectory_shape(std::string_view name);

/// Everything needed to regenerate a synthetic scene bit for bit.
struct SceneSpec {
  std::uint64_t seed = 0;
  std::int64_t n_frames = 300;
  TrajectoryShape shape = TrajectoryShape::Circle;
  /// Landmarks spawned inside each frame's view frustum.
  int point_density = 2048;
  double depth_noise_sigma = 0.0;
  /// Standard deviation of each component of the per-chunk Sim(3) tangent
  /// distortion.
  double drift_sigma = 0.0;
  /// Per-pixel probability of a gross depth error flagged by low confidence.
  double outlier_fraction = 0.0;
  /// Whether the path returns to an earlier place.
  bool loop_closure = true;
  std::int64_t chunk_size = 75;
  std::int64_t overlap = 30;
  int token_dim = 64;
  int tokens_per_frame = 16;
  double token_noise_sigma = 0.02;
  /// Strength of the direction shared by every frame's tokens, and its
  /// linear growth over the sequence (appearance change).
  double shared_strength = 2.0;
  double shared_growth = 1.0;
  /// Path length between consecutive frames.
  double frame_spacing = 0.1;
  /// Edge of the square cells, centred on multiples of cell_size, that
  /// define place clusters.
  double cell_size = 1.0;
  Intrinsics camera{40.0, 40.0, 32.0, 24.0, 64, 48};
  double near_depth = 1.0;
  double far_depth = 8.0;

  /// Throws InvalidSpec.
  void validate() const;
};

/// `key = value` text form; every SceneSpec field is a key, the camera as
/// fx, fy, cx, cy, width, height. Parsing starts from the defaults and
/// throws InvalidSpec for unknown keys or bad values.
std::string scene_spec_to_text(const SceneSpec& spec);
SceneSpec parse_scene_spec(const std::string& text);

struct Scene {
  SceneSpec spec;
  /// Camera-to-world poses, unit scale.
  std::vector<Sim3> gt_poses;
  TrajectoryEstimate gt_trajectory;
  std::vector<Vec3> landmarks;
  /// Noise-free rendered depth per frame; 0 where no landmark projects.
  std::vector<Grid> true_depth;
  /// Place-cluster label of every frame.
  std::vector<std::int64_t> place_cluster;
  std::vector<PatchTokens> tokens;

  std::vector<FrameRange> chunk_ranges;
  std::vector<ChunkArtifact> chunks;
  /// Undistorted chunk-to-world transform of every chunk.
  std::vector<Sim3> gt_chunk_to_world;
  /// Tangent distortion applied to every chunk.
  std::vector<Sim3Tangent> drift;
};

/// Deterministic for a fixed spec. Camera poses follow the chosen path and
/// look along its tangent. Depth is rendered from a landmark field by
/// forward projection with a z-buffer. Chunk t expresses frame k (local
/// index i of B) as exp(i/(B-1) * xi_t) * C_t * P_k, where C_t is the inverse
/// of the chunk's first true pose and xi_t ~ N(0, drift_sigma^2); the scale
/// part is carried by the depth values. Tokens are the centroid of the
/// frame's place cell plus a shared direction plus Gaussian noise.
Scene generate_scene(const SceneSpec& spec);

/// Renders frames of an existing scene as one loop-centric chunk with its
/// own seeded distortion.
ChunkArtifact render_loop_chunk(const Scene& scene, const std::vector<std::int64_t>& frame_ids,
                                std::int64_t chunk_id);

/// Copy of c in which exactly floor(fraction * N) seeded dst points are moved
/// by `magnitude` along uniformly random directions. `displaced`, when given,
/// receives the moved indices in ascending order.
CorrespondenceSet inject_outliers(const CorrespondenceSet& c, double fraction, double magnitude,
                                  std::uint64_t seed, std::vector<std::size_t>* displaced = nullptr);

/// Token sets for retrieval experiments: the sequence visits n_places places
/// in order, then revisits them in the same order. Every place is a common
/// base appearance plus a small place offset. A shared direction supported on
/// `shared_channels` random channels is added to every frame with a strength
/// that grows linearly from zero over the sequence (appearance change).
struct PlaceTokenSpec {
  std::uint64_t seed = 0;
  std::int64_t n_frames = 500;
  int n_places = 5;
  int token_dim = 64;
  int tokens_per_frame = 16;
  double base_sigma = 1.0;
  /// Place offsets, relative to base_sigma.
  double place_offset = 0.2;
  double noise_sigma = 0.01;
  int shared_channels = 4;
  /// Final shared strength in units of base_sigma * sqrt(token_dim).
  double shared_strength = 0.75;
};

struct PlaceTokens {
  std::vector<PatchTokens> tokens;
  std::vector<int> place;
};

PlaceTokens generate_place_tokens(const PlaceTokenSpec& spec);

/// splitmix64-style mixing of a seed with stream identifiers.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace chunkstitch
