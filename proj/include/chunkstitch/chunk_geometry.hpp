#pragma once

#include <cstdint>
#include <vector>

#include "chunkstitch/chunk.hpp"

namespace chunkstitch {

/// Half-open frame range [begin, end).
struct FrameRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;

  std::int64_t size() const { return end - begin; }
  bool operator==(const FrameRange&) const = default;
};

/// Sliding-window chunk schedule. Chunk t starts at t*(B - O) and spans B
/// frames. The last chunk is shifted back to end exactly at n_frames, so it
/// always holds B frames and overlaps its predecessor by at least O.
/// Throws InvalidWindow unless 0 < overlap < chunk_size <= n_frames.
std::vector<FrameRange> chunk_indices(std::int64_t n_frames, std::int64_t chunk_size,
                                      std::int64_t overlap);

/// Mean of the two focal-length ratios ref/src.
double depth_scale_factor(const Intrinsics& src, const Intrinsics& ref);

/// Rescales depth values to what the reference intrinsic would observe;
/// confidence is left untouched.
DepthMap normalize_depth(const DepthMap& depth, const Intrinsics& src, const Intrinsics& ref);

/// Lifts pixel (u, v) at depth z through the pinhole model and the pose.
Vec3 backproject_pixel(double u, double v, double z, const Intrinsics& k, const Sim3& pose);

/// All pixels with positive depth, row-major order.
std::vector<Vec3> backproject(const DepthMap& depth, const Intrinsics& k, const Sim3& pose);

/// Per-pixel reliability of a frame observed by two neighbouring chunks:
///   |D_t - D_t1| < lambda_d  and  conf_t > lambda_gamma * mean(conf_t)
///                            and  conf_t1 > lambda_gamma * mean(conf_t1).
/// Depths are expected to be normalized to the reference intrinsic already.
/// A frame whose mean confidence is zero contributes no confidence test
/// (a warning is logged). Throws ShapeMismatch.
BoolGrid reliability_mask(const DepthMap& d_t, const DepthMap& d_t1, double lambda_d,
                          double lambda_gamma);

}  // namespace chunkstitch
