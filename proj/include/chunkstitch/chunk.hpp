#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chunkstitch/sim3.hpp"

namespace chunkstitch {

/// Row-major H x W grid; element (v, u) is row v, column u.
using Grid = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Pinhole intrinsics in pixels.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws InvalidSpec when focal lengths are not positive or the
  /// principal point lies outside the image.
  void validate() const;
  Mat3 matrix() const;
  static Intrinsics from_matrix(const Mat3& k, int width, int height);
};

struct DepthMap {
  Grid values;      // scene units, 0 = no measurement
  Grid confidence;  // dimensionless, >= 0

  int height() const { return static_cast<int>(values.rows()); }
  int width() const { return static_cast<int>(values.cols()); }
  /// Throws ShapeMismatch / InvalidSpec on inconsistent sizes, NaN or negative depth.
  void validate() const;
};

/// K x d patch tokens of one frame.
using PatchTokens = Eigen::MatrixXd;

struct Frame {
  std::int64_t frame_id = 0;
  Intrinsics intrinsics;
  Sim3 pose;  // camera-to-chunk, unit scale
  DepthMap depth;
  PatchTokens tokens;  // may be empty (loop-centric chunks do not need tokens)
};

enum class ChunkKind { Temporal, Loop };

/// All frames of one backbone forward pass, expressed in the chunk's own
/// coordinate frame.
struct ChunkArtifact {
  std::int64_t chunk_id = 0;
  ChunkKind kind = ChunkKind::Temporal;
  std::vector<Frame> frames;

  std::vector<std::int64_t> frame_ids() const;
  /// Index into frames, or nullopt.
  std::optional<std::size_t> find_frame(std::int64_t frame_id) const;
  bool contains(std::int64_t frame_id) const { return find_frame(frame_id).has_value(); }
  /// Checks frame ordering (strictly increasing; contiguous for temporal
  /// chunks) and per-frame shapes. Throws InvalidSpec.
  void validate() const;
};

/// Frame ids present in both chunks, ascending.
std::vector<std::int64_t> shared_frame_ids(const ChunkArtifact& a, const ChunkArtifact& b);

}  // namespace chunkstitch
