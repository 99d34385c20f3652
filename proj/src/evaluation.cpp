#include "chunkstitch/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "chunkstitch/alignment.hpp"
#include "chunkstitch/error.hpp"

namespace chunkstitch {

std::string_view to_string(AteMode m) { return m == AteMode::Se3 ? "se3" : "sim3"; }

AteMode parse_ate_mode(std::string_view name) {
  if (name == "se3") return AteMode::Se3;
  if (name == "sim3") return AteMode::Sim3;
  throw Error(ErrorCode::InvalidConfig, "unknown ATE mode '" + std::string(name) + "'");
}

AteResult ate(const TrajectoryEstimate& est, const TrajectoryEstimate& gt, AteMode mode) {
  est.validate();
  gt.validate();
  CorrespondenceSet c;
  std::size_t a = 0, b = 0;
  while (a < est.size() && b < gt.size()) {
    if (est.frame_ids[a] < gt.frame_ids[b]) {
      ++a;
    } else if (gt.frame_ids[b] < est.frame_ids[a]) {
      ++b;
    } else {
      c.src.push_back(est.positions[a++]);
      c.dst.push_back(gt.positions[b++]);
    }
  }
  if (c.size() < 3) {
    throw Error(ErrorCode::TooFewCommonFrames,
                "trajectories share " + std::to_string(c.size()) + " frame ids, need at least 3");
  }
  AteResult r;
  r.alignment = best_fit_transform(c, mode == AteMode::Sim3);
  r.rmse = rms_residual(c, r.alignment);
  r.n_frames = c.size();
  return r;
}

double ate_rmse(const TrajectoryEstimate& est, const TrajectoryEstimate& gt, AteMode mode) {
  return ate(est, gt, mode).rmse;
}

KdTree::KdTree(std::vector<Vec3> points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!points_.empty()) build(0, points_.size());
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back({begin, end});
  if (end - begin <= leaf_size_) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (std::size_t k = begin; k < end; ++k) {
    lo = lo.cwiseMin(points_[order_[k]]);
    hi = hi.cwiseMax(points_[order_[k]]);
  }
  int axis;
  if ((hi - lo).maxCoeff(&axis) <= 0.0) return id;  // all points coincide

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) { return points_[a](axis) < points_[b](axis); });
  const double split = points_[order_[mid]](axis);
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(std::size_t id, const Vec3& q, double& best, std::size_t& best_index) const {
  const Node& n = nodes_[id];
  if (n.axis < 0) {
    for (std::size_t k = n.begin; k < n.end; ++k) {
      const double d = squared_distance(q, points_[order_[k]]);
      if (d < best || (d == best && order_[k] < best_index)) {
        best = d;
        best_index = order_[k];
      }
    }
    return;
  }
  // Points left of mid have coordinate <= split, right of mid >= split.
  const double diff = q(n.axis) - n.split;
  const std::size_t near = diff < 0.0 ? n.left : n.right;
  const std::size_t far = diff < 0.0 ? n.right : n.left;
  search(near, q, best, best_index);
  if (diff * diff <= best) search(far, q, best, best_index);
}

double KdTree::nearest_squared(const Vec3& q, std::size_t* index) const {
  if (points_.empty()) throw Error(ErrorCode::EmptyCloud, "nearest-neighbour query on an empty tree");
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_index = std::numeric_limits<std::size_t>::max();
  search(0, q, best, best_index);
  if (index) *index = best_index;
  return best;
}

namespace {

double mean_nearest(const std::vector<Vec3>& queries, const KdTree& tree) {
  double sum = 0.0;
  for (const auto& q : queries) sum += std::sqrt(tree.nearest_squared(q));
  return sum / static_cast<double>(queries.size());
}

}  // namespace

CloudMetrics cloud_metrics(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt) {
  if (pred.empty() || gt.empty()) {
    throw Error(ErrorCode::EmptyCloud, pred.empty() ? "predicted cloud is empty" : "ground-truth cloud is empty");
  }
  CloudMetrics m;
  m.accuracy = mean_nearest(pred, KdTree(gt));
  m.completeness = mean_nearest(gt, KdTree(pred));
  m.chamfer = 0.5 * (m.accuracy + m.completeness);
  return m;
}

}  // namespace chunkstitch
