#pragma once

#include <cstdint>
#include <vector>

#include "chunkstitch/sim3.hpp"

namespace chunkstitch {

/// Per-frame world poses.
struct TrajectoryEstimate {
  std::vector<std::int64_t> frame_ids;
  std::vector<Vec3> positions;
  std::vector<Mat3> rotations;

  std::size_t size() const { return frame_ids.size(); }
  void push_back(std::int64_t id, const Mat3& rotation, const Vec3& position) {
    frame_ids.push_back(id);
    rotations.push_back(rotation);
    positions.push_back(position);
  }
  /// Throws InvalidSpec on length mismatch or non-increasing frame ids.
  void validate() const;
};

}  // namespace chunkstitch
