#include "chunkstitch/chunk.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "chunkstitch/error.hpp"

namespace chunkstitch {

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || width <= 0 || height <= 0 || !(cx >= 0.0) ||
      !(cx < width) || !(cy >= 0.0) || !(cy < height)) {
    std::ostringstream msg;
    msg << "invalid intrinsics fx=" << fx << " fy=" << fy << " cx=" << cx << " cy=" << cy
        << " size=" << width << "x" << height;
    throw Error(ErrorCode::InvalidSpec, msg.str());
  }
}

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Intrinsics Intrinsics::from_matrix(const Mat3& k, int width, int height) {
  return {k(0, 0), k(1, 1), k(0, 2), k(1, 2), width, height};
}

void DepthMap::validate() const {
  if (values.rows() != confidence.rows() || values.cols() != confidence.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "depth and confidence grids differ in size");
  }
  if (values.isNaN().any() || confidence.isNaN().any()) {
    throw Error(ErrorCode::InvalidSpec, "depth map contains NaN");
  }
  if ((values < 0.0).any() || (confidence < 0.0).any()) {
    throw Error(ErrorCode::InvalidSpec, "depth map contains negative values");
  }
}

std::vector<std::int64_t> ChunkArtifact::frame_ids() const {
  std::vector<std::int64_t> ids;
  ids.reserve(frames.size());
  for (const auto& f : frames) ids.push_back(f.frame_id);
  return ids;
}

std::optional<std::size_t> ChunkArtifact::find_frame(std::int64_t frame_id) const {
  const auto it = std::lower_bound(frames.begin(), frames.end(), frame_id,
                                   [](const Frame& f, std::int64_t id) { return f.frame_id < id; });
  if (it == frames.end() || it->frame_id != frame_id) return std::nullopt;
  return static_cast<std::size_t>(it - frames.begin());
}

void ChunkArtifact::validate() const {
  std::ostringstream where;
  where << "chunk " << chunk_id << ": ";
  if (frames.empty()) throw Error(ErrorCode::InvalidSpec, where.str() + "no frames");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const auto prev = frames[i - 1].frame_id, cur = frames[i].frame_id;
    if (cur <= prev) throw Error(ErrorCode::InvalidSpec, where.str() + "frame ids not strictly increasing");
    if (kind == ChunkKind::Temporal && cur != prev + 1) {
      throw Error(ErrorCode::InvalidSpec, where.str() + "temporal chunk frame ids not contiguous");
    }
  }
  for (const auto& f : frames) {
    f.intrinsics.validate();
    f.depth.validate();
    if (f.depth.width() != f.intrinsics.width || f.depth.height() != f.intrinsics.height) {
      throw Error(ErrorCode::ShapeMismatch,
                  where.str() + "depth size differs from intrinsics for frame " + std::to_string(f.frame_id));
    }
    if (!f.pose.is_valid(1e-6)) {
      throw Error(ErrorCode::InvalidSpec, where.str() + "invalid pose for frame " + std::to_string(f.frame_id));
    }
    if (f.tokens.size() > 0 && !f.tokens.allFinite()) {
      throw Error(ErrorCode::InvalidSpec, where.str() + "non-finite tokens for frame " + std::to_string(f.frame_id));
    }
  }
}

std::vector<std::int64_t> shared_frame_ids(const ChunkArtifact& a, const ChunkArtifact& b) {
  std::vector<std::int64_t> shared;
  for (const auto& f : a.frames) {
    if (b.contains(f.frame_id)) shared.push_back(f.frame_id);
  }
  return shared;
}

}  // namespace chunkstitch
