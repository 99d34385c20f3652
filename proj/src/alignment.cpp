#include "chunkstitch/alignment.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "chunkstitch/chunk_geometry.hpp"
#include "chunkstitch/error.hpp"
#include "chunkstitch/log.hpp"
#include "chunkstitch/random.hpp"

namespace chunkstitch {

namespace {

constexpr double kRankTolerance = 1e-10;
constexpr double kWeightTolerance = 1e-8;

Sim3 solve_similarity(const CorrespondenceSet& c, bool with_scale, bool require_rank2 = true) {
  c.validate();
  const std::size_t n = c.size();
  const bool uniform = c.weights.empty();
  auto weight = [&](std::size_t i) { return uniform ? 1.0 : c.weights[i]; };

  double total = 0.0;
  Vec3 mu_src = Vec3::Zero(), mu_dst = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weight(i);
    total += w;
    mu_src += w * c.src[i];
    mu_dst += w * c.dst[i];
  }
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateGeometry, "all correspondence weights are zero");
  mu_src /= total;
  mu_dst /= total;

  Mat3 cov = Mat3::Zero();
  double var_src = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weight(i);
    const Vec3 a = c.src[i] - mu_src;
    const Vec3 b = c.dst[i] - mu_dst;
    cov.noalias() += w * b * a.transpose();
    var_src += w * a.squaredNorm();
  }
  cov /= total;
  var_src /= total;

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (require_rank2 && (!(sv(0) > 0.0) || sv(1) <= kRankTolerance * sv(0))) {
    std::ostringstream msg;
    msg << "cross-covariance rank < 2 (singular values " << sv.transpose() << ")";
    throw Error(ErrorCode::DegenerateGeometry, msg.str());
  }
  Vec3 d = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) d(2) = -1.0;
  const Mat3 r = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  double s = 1.0;
  if (with_scale && var_src > 0.0 && sv.dot(d) > 0.0) s = sv.dot(d) / var_src;
  return Sim3(s, r, mu_dst - s * (r * mu_src));
}

double median_in_place(std::vector<double>& v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

}  // namespace

void CorrespondenceSet::validate() const {
  if (src.size() != dst.size()) throw Error(ErrorCode::InvalidSpec, "src and dst differ in length");
  if (src.size() < 3) throw Error(ErrorCode::InvalidSpec, "need at least 3 correspondences");
  if (!weights.empty() && weights.size() != src.size()) {
    throw Error(ErrorCode::InvalidSpec, "weights differ in length from points");
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!src[i].allFinite() || !dst[i].allFinite()) {
      throw Error(ErrorCode::InvalidSpec, "non-finite correspondence " + std::to_string(i));
    }
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::InvalidSpec, "negative or non-finite weight");
  }
}

Sim3 umeyama_sim3(const CorrespondenceSet& c) { return solve_similarity(c, true); }

Sim3 umeyama_se3(const CorrespondenceSet& c) { return solve_similarity(c, false); }

Sim3 best_fit_transform(const CorrespondenceSet& c, bool with_scale) {
  return solve_similarity(c, with_scale, false);
}

double rms_residual(const CorrespondenceSet& c, const Sim3& s) {
  if (c.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) sum += (c.dst[i] - s.apply(c.src[i])).squaredNorm();
  return std::sqrt(sum / static_cast<double>(c.size()));
}

IrlsResult irls_sim3_detailed(const CorrespondenceSet& c, int max_iters, double kernel_scale) {
  c.validate();
  const std::size_t n = c.size();
  const std::vector<double> base = c.weights.empty() ? std::vector<double>(n, 1.0) : c.weights;

  // Residual floor tied to the data extent so exact data keeps unit weights.
  Vec3 mean = Vec3::Zero();
  for (const auto& p : c.dst) mean += p;
  mean /= static_cast<double>(n);
  double spread = 0.0;
  for (const auto& p : c.dst) spread += (p - mean).squaredNorm();
  const double kernel_floor = 1e-9 * (1.0 + std::sqrt(spread / static_cast<double>(n)));

  CorrespondenceSet work{c.src, c.dst, base};
  IrlsResult result{solve_similarity(work, true), 0, base};
  std::vector<double> residuals(n), scratch(n);
  for (int it = 0; it < max_iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) residuals[i] = (c.dst[i] - result.transform.apply(c.src[i])).norm();
    scratch = residuals;
    const double med = median_in_place(scratch);
    for (std::size_t i = 0; i < n; ++i) scratch[i] = std::abs(residuals[i] - med);
    const double mad = median_in_place(scratch);
    const double k = std::max(kernel_scale * mad, kernel_floor);

    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = base[i] * (residuals[i] <= k ? 1.0 : k / residuals[i]);
      change = std::max(change, std::abs(w - work.weights[i]));
      work.weights[i] = w;
    }
    result.transform = solve_similarity(work, true);
    result.iterations = it + 1;
    if (change < kWeightTolerance) break;
  }
  result.weights = std::move(work.weights);
  return result;
}

Sim3 irls_sim3(const CorrespondenceSet& c, int max_iters, double kernel_scale) {
  return irls_sim3_detailed(c, max_iters, kernel_scale).transform;
}

std::string_view to_string(AlignMethod m) { return m == AlignMethod::Irls ? "irls" : "umeyama"; }

AlignMethod parse_align_method(std::string_view name) {
  if (name == "umeyama") return AlignMethod::Umeyama;
  if (name == "irls") return AlignMethod::Irls;
  throw Error(ErrorCode::InvalidConfig, "unknown alignment method '" + std::string(name) + "'");
}

CorrespondenceSet overlap_correspondences(const ChunkArtifact& chunk_t, const ChunkArtifact& chunk_t1,
                                          const AlignParams& params, double lambda_d) {
  const auto shared = shared_frame_ids(chunk_t, chunk_t1);
  if (shared.empty()) {
    std::ostringstream msg;
    msg << "chunks " << chunk_t.chunk_id << " and " << chunk_t1.chunk_id << " share no frames";
    throw Error(ErrorCode::NoOverlap, msg.str());
  }
  const Intrinsics ref = params.reference.value_or(chunk_t.frames.front().intrinsics);

  CorrespondenceSet c;
  for (const auto id : shared) {
    const Frame& a = chunk_t.frames[*chunk_t.find_frame(id)];
    const Frame& b = chunk_t1.frames[*chunk_t1.find_frame(id)];
    const DepthMap da = normalize_depth(a.depth, a.intrinsics, ref);
    const DepthMap db = normalize_depth(b.depth, b.intrinsics, ref);
    BoolGrid mask;
    if (params.use_mask) {
      mask = reliability_mask(da, db, lambda_d, params.lambda_gamma);
    } else {
      if (da.values.rows() != db.values.rows() || da.values.cols() != db.values.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "frame " + std::to_string(id) + " differs in size between chunks");
      }
      mask = BoolGrid::Constant(da.values.rows(), da.values.cols(), true);
    }
    for (int v = 0; v < da.height(); ++v) {
      for (int u = 0; u < da.width(); ++u) {
        const double za = da.values(v, u), zb = db.values(v, u);
        if (!mask(v, u) || !(za > 0.0) || !(zb > 0.0)) continue;
        c.src.push_back(backproject_pixel(u, v, za, a.intrinsics, a.pose));
        c.dst.push_back(backproject_pixel(u, v, zb, b.intrinsics, b.pose));
      }
    }
  }
  return c;
}

AlignmentReport align_adjacent(const ChunkArtifact& chunk_t, const ChunkArtifact& chunk_t1,
                               const AlignParams& params) {
  const auto start = std::chrono::steady_clock::now();
  AlignmentReport report;
  double lambda_d = params.lambda_d;
  CorrespondenceSet c = overlap_correspondences(chunk_t, chunk_t1, params, lambda_d);
  while (c.size() < std::max<std::size_t>(params.min_points, 3)) {
    if (!params.use_mask || report.relaxations >= params.max_relaxations) {
      std::ostringstream msg;
      msg << "chunks " << chunk_t.chunk_id << " -> " << chunk_t1.chunk_id << ": only " << c.size()
          << " reliable pixels (lambda_d=" << lambda_d << ")";
      throw Error(ErrorCode::InsufficientReliablePoints, msg.str());
    }
    lambda_d *= 2.0;
    ++report.relaxations;
    std::ostringstream msg;
    msg << "chunks " << chunk_t.chunk_id << " -> " << chunk_t1.chunk_id << ": " << c.size()
        << " reliable pixels, relaxing lambda_d to " << lambda_d;
    log_warning(msg.str());
    c = overlap_correspondences(chunk_t, chunk_t1, params, lambda_d);
  }

  if (c.size() > params.max_points) {
    // Partial Fisher-Yates, then restore pixel order.
    Rng rng(params.subsample_seed);
    std::vector<std::size_t> idx(c.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < params.max_points; ++i) {
      std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
    }
    idx.resize(params.max_points);
    std::sort(idx.begin(), idx.end());
    CorrespondenceSet sub;
    sub.src.reserve(idx.size());
    sub.dst.reserve(idx.size());
    for (auto i : idx) {
      sub.src.push_back(c.src[i]);
      sub.dst.push_back(c.dst[i]);
    }
    c = std::move(sub);
  }

  report.transform = params.method == AlignMethod::Irls
                         ? irls_sim3(c, params.irls_max_iters, params.irls_kernel_scale)
                         : umeyama_sim3(c);
  report.n_points = c.size();
  report.rms_residual = rms_residual(c, report.transform);
  report.lambda_d_used = lambda_d;
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace chunkstitch
