#include "chunkstitch/chunk_geometry.hpp"

#include <sstream>

#include "chunkstitch/error.hpp"
#include "chunkstitch/log.hpp"

namespace chunkstitch {

std::vector<FrameRange> chunk_indices(std::int64_t n_frames, std::int64_t chunk_size,
                                      std::int64_t overlap) {
  if (!(overlap > 0 && overlap < chunk_size && chunk_size <= n_frames)) {
    std::ostringstream msg;
    msg << "need 0 < overlap < chunk_size <= n_frames, got n=" << n_frames << " B=" << chunk_size
        << " O=" << overlap;
    throw Error(ErrorCode::InvalidWindow, msg.str());
  }
  const std::int64_t stride = chunk_size - overlap;
  std::vector<FrameRange> ranges;
  for (std::int64_t begin = 0;; begin += stride) {
    if (begin + chunk_size >= n_frames) {
      ranges.push_back({n_frames - chunk_size, n_frames});
      break;
    }
    ranges.push_back({begin, begin + chunk_size});
  }
  return ranges;
}

double depth_scale_factor(const Intrinsics& src, const Intrinsics& ref) {
  return 0.5 * (ref.fx / src.fx + ref.fy / src.fy);
}

DepthMap normalize_depth(const DepthMap& depth, const Intrinsics& src, const Intrinsics& ref) {
  return {depth.values * depth_scale_factor(src, ref), depth.confidence};
}

Vec3 backproject_pixel(double u, double v, double z, const Intrinsics& k, const Sim3& pose) {
  return pose.apply(Vec3((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z));
}

std::vector<Vec3> backproject(const DepthMap& depth, const Intrinsics& k, const Sim3& pose) {
  std::vector<Vec3> points;
  points.reserve(static_cast<std::size_t>(depth.values.size()));
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      const double z = depth.values(v, u);
      if (z > 0.0) points.push_back(backproject_pixel(u, v, z, k, pose));
    }
  }
  return points;
}

BoolGrid reliability_mask(const DepthMap& d_t, const DepthMap& d_t1, double lambda_d,
                          double lambda_gamma) {
  if (d_t.values.rows() != d_t1.values.rows() || d_t.values.cols() != d_t1.values.cols() ||
      d_t.confidence.rows() != d_t.values.rows() || d_t.confidence.cols() != d_t.values.cols() ||
      d_t1.confidence.rows() != d_t1.values.rows() || d_t1.confidence.cols() != d_t1.values.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "reliability mask needs equally sized depth/confidence grids");
  }
  BoolGrid mask = (d_t.values - d_t1.values).abs() < lambda_d;
  for (const DepthMap* d : {&d_t, &d_t1}) {
    const double mean = d->confidence.size() > 0 ? d->confidence.mean() : 0.0;
    if (mean > 0.0) {
      mask = mask && (d->confidence > lambda_gamma * mean);
    } else {
      log_warning("frame with zero mean confidence; reliability mask uses the depth test only");
    }
  }
  return mask;
}

}  // namespace chunkstitch
