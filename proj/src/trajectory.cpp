#include "chunkstitch/trajectory.hpp"

#include "chunkstitch/error.hpp"

namespace chunkstitch {

void TrajectoryEstimate::validate() const {
  if (positions.size() != frame_ids.size() || rotations.size() != frame_ids.size()) {
    throw Error(ErrorCode::InvalidSpec, "trajectory lists differ in length");
  }
  for (std::size_t i = 1; i < frame_ids.size(); ++i) {
    if (frame_ids[i] <= frame_ids[i - 1]) {
      throw Error(ErrorCode::InvalidSpec, "trajectory frame ids not strictly increasing");
    }
  }
}

}  // namespace chunkstitch
