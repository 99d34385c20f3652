#include "chunkstitch/loop_detection.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "chunkstitch/error.hpp"

namespace chunkstitch {

namespace {

constexpr double kZeroNorm = 1e-12;
constexpr double kEigenFloor = 1e-10;

}  // namespace

Eigen::VectorXd pool_tokens(const PatchTokens& tokens) {
  if (tokens.rows() < 1 || tokens.cols() < 1) throw Error(ErrorCode::InvalidSpec, "empty patch tokens");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(tokens.cols());
  for (Eigen::Index k = 0; k < tokens.rows(); ++k) {
    const double n = tokens.row(k).norm();
    if (!(n >= kZeroNorm)) throw Error(ErrorCode::ZeroToken, "token row " + std::to_string(k) + " has zero norm");
    g += tokens.row(k).transpose() / n;
  }
  return g / static_cast<double>(tokens.rows());
}

Eigen::VectorXd signed_power(const Eigen::VectorXd& g, double beta) {
  Eigen::VectorXd out = g.unaryExpr([beta](double x) {
    return x == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(x), beta), x);
  });
  const double n = out.norm();
  if (!(n >= kZeroNorm)) throw Error(ErrorCode::ZeroVector, "signed power of a zero vector");
  return out / n;
}

WhiteningModel fit_whitening(const Eigen::MatrixXd& descriptors, int r, int d_out) {
  const auto n = descriptors.rows();
  const auto d = descriptors.cols();
  if (r < 0 || d_out < 1 || d_out + r > d) {
    std::ostringstream msg;
    msg << "cannot keep " << d_out << " of " << d << " dimensions after removing " << r;
    throw Error(ErrorCode::InvalidSpec, msg.str());
  }
  if (n < d_out + r + 1) {
    std::ostringstream msg;
    msg << n << " frames are too few to fit " << d_out << " whitened dimensions with r=" << r;
    throw Error(ErrorCode::TooFewFrames, msg.str());
  }

  WhiteningModel model;
  model.removed_components = r;
  model.mean = descriptors.colwise().mean().transpose();
  const Eigen::MatrixXd centred = descriptors.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::RankDeficient, "eigendecomposition failed");
  // Ascending order; walk from the top.
  const Eigen::VectorXd& values = eig.eigenvalues();
  const Eigen::MatrixXd& vectors = eig.eigenvectors();
  model.projection.resize(d, d_out);
  model.eigenvalues.resize(d_out);
  for (int k = 0; k < d_out; ++k) {
    const Eigen::Index col = d - 1 - r - k;
    const double lambda = values(col);
    if (!(lambda > kEigenFloor)) {
      std::ostringstream msg;
      msg << "only " << k << " eigenvalues above " << kEigenFloor << " after removing " << r
          << " components; " << d_out << " requested";
      throw Error(ErrorCode::RankDeficient, msg.str());
    }
    model.projection.col(k) = vectors.col(col) / std::sqrt(lambda);
    model.eigenvalues(k) = lambda;
  }
  return model;
}

Eigen::VectorXd apply_whitening(const Eigen::VectorXd& g, const WhiteningModel& model) {
  if (g.size() != model.mean.size()) throw Error(ErrorCode::ShapeMismatch, "descriptor dimension mismatch");
  const Eigen::VectorXd z = model.projection.transpose() * (g - model.mean);
  const double n = z.norm();
  if (!(n >= kZeroNorm)) throw Error(ErrorCode::ZeroProjection, "descriptor coincides with the scene mean");
  return z / n;
}

Eigen::MatrixXd similarity_matrix(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd sim = z * z.transpose();
  sim = sim.cwiseMax(-1.0).cwiseMin(1.0);
  sim = 0.5 * (sim + sim.transpose()).eval();
  sim.diagonal().setOnes();
  return sim;
}

std::vector<LoopCandidate> detect_loops(const Eigen::MatrixXd& sim, double threshold,
                                        std::int64_t min_frame_gap, std::int64_t nms_radius) {
  const std::int64_t n = sim.rows();
  std::vector<LoopCandidate> candidates;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + std::max<std::int64_t>(min_frame_gap, 1); j < n; ++j) {
      const double s = sim(i, j);
      if (s >= threshold) candidates.push_back({i, j, s});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const LoopCandidate& a, const LoopCandidate& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.frame_i != b.frame_i) return a.frame_i < b.frame_i;
    return a.frame_j < b.frame_j;
  });

  std::vector<LoopCandidate> accepted;
  for (const auto& c : candidates) {
    const bool suppressed = std::any_of(accepted.begin(), accepted.end(), [&](const LoopCandidate& a) {
      return std::abs(a.frame_i - c.frame_i) <= nms_radius && std::abs(a.frame_j - c.frame_j) <= nms_radius;
    });
    if (!suppressed) accepted.push_back(c);
  }
  return accepted;
}

std::vector<std::int64_t> build_loop_batch(std::int64_t i, std::int64_t j, std::int64_t loop_chunk_size,
                                           std::int64_t n_frames) {
  if (i == j || i < 0 || j < 0 || i >= n_frames || j >= n_frames || loop_chunk_size < 2) {
    std::ostringstream msg;
    msg << "invalid loop batch request i=" << i << " j=" << j << " size=" << loop_chunk_size
        << " n=" << n_frames;
    throw Error(ErrorCode::InvalidSpec, msg.str());
  }
  const std::int64_t half = std::min(loop_chunk_size / 2, n_frames);
  auto window_start = [&](std::int64_t centre) {
    return std::clamp(centre - half / 2, std::int64_t{0}, n_frames - half);
  };
  std::vector<std::int64_t> batch;
  const std::int64_t si = window_start(i), sj = window_start(j);
  for (std::int64_t f = si; f < si + half; ++f) batch.push_back(f);
  for (std::int64_t f = sj; f < sj + half; ++f) {
    if (f < si || f >= si + half) batch.push_back(f);
  }
  return batch;
}

Sim3 loop_sim3(const Sim3& s_i_loop, const Sim3& s_j_loop) { return s_j_loop * s_i_loop.inverse(); }

Eigen::MatrixXd frame_descriptors(const std::vector<const PatchTokens*>& tokens, double beta) {
  if (tokens.empty()) return {};
  Eigen::MatrixXd g(static_cast<Eigen::Index>(tokens.size()), tokens.front()->cols());
  for (std::size_t f = 0; f < tokens.size(); ++f) {
    if (tokens[f]->cols() != g.cols()) throw Error(ErrorCode::ShapeMismatch, "token width differs between frames");
    g.row(static_cast<Eigen::Index>(f)) = signed_power(pool_tokens(*tokens[f]), beta).transpose();
  }
  return g;
}

}  // namespace chunkstitch
