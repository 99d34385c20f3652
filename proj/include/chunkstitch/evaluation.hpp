#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "chunkstitch/sim3.hpp"
#include "chunkstitch/trajectory.hpp"

namespace chunkstitch {

enum class AteMode { Se3, Sim3 };

std::string_view to_string(AteMode m);
AteMode parse_ate_mode(std::string_view name);

struct AteResult {
  double rmse = 0.0;
  std::size_t n_frames = 0;
  Sim3 alignment;  // maps est positions onto gt
};

/// Frames are paired by id; est is aligned to gt with a least-squares
/// similarity (scale pinned to 1 for Se3) before the root mean square of the
/// position differences is taken. Throws TooFewCommonFrames below 3 pairs.
AteResult ate(const TrajectoryEstimate& est, const TrajectoryEstimate& gt, AteMode mode = AteMode::Sim3);
double ate_rmse(const TrajectoryEstimate& est, const TrajectoryEstimate& gt, AteMode mode = AteMode::Sim3);

/// Exact nearest-neighbour index over a fixed point set.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points, std::size_t leaf_size = 8);

  std::size_t size() const { return points_.size(); }
  /// Squared Euclidean distance to the closest stored point and its index.
  double nearest_squared(const Vec3& q, std::size_t* index = nullptr) const;

 private:
  struct Node {
    std::size_t begin, end;  // range in order_
    int axis = -1;           // -1 for leaves
    double split = 0.0;
    std::size_t left = 0, right = 0;
  };
  std::size_t build(std::size_t begin, std::size_t end);
  void search(std::size_t node, const Vec3& q, double& best, std::size_t& best_index) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

/// (a - b).x^2 + (a - b).y^2 + (a - b).z^2 evaluated left to right.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

struct CloudMetrics {
  double accuracy = 0.0;      // mean distance from each predicted point to gt
  double completeness = 0.0;  // mean distance from each gt point to pred
  double chamfer = 0.0;       // (accuracy + completeness) / 2
};

/// Unthresholded means of exact nearest-neighbour distances. Throws EmptyCloud.
CloudMetrics cloud_metrics(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt);

}  // namespace chunkstitch
