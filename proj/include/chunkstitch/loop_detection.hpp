#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "chunkstitch/chunk.hpp"
#include "chunkstitch/sim3.hpp"

namespace chunkstitch {

/// Mean of the per-token unit vectors. Throws ZeroToken for a token row with
/// norm below 1e-12.
Eigen::VectorXd pool_tokens(const PatchTokens& tokens);

/// sign(g) |g|^beta, then scaled to unit length. Throws ZeroVector.
Eigen::VectorXd signed_power(const Eigen::VectorXd& g, double beta);

/// PCA whitening with the dominant components removed:
///   z = W^T (g - mean),  W = Q Lambda^{-1/2}.
struct WhiteningModel {
  Eigen::VectorXd mean;        // d
  Eigen::MatrixXd projection;  // d x d_out
  int removed_components = 0;
  Eigen::VectorXd eigenvalues;  // retained, descending

  int input_dim() const { return static_cast<int>(mean.size()); }
  int output_dim() const { return static_cast<int>(projection.cols()); }
};

/// Fits the whitening model on N x d descriptor rows: covariance of the
/// mean-centred rows, drop the r largest-eigenvalue directions, keep the next
/// d_out. Eigenvalues at or below 1e-10 are never retained.
/// Throws TooFewFrames (N < d_out + r + 1), InvalidSpec (d_out + r > d) or
/// RankDeficient (fewer than d_out usable eigenvalues).
WhiteningModel fit_whitening(const Eigen::MatrixXd& descriptors, int r, int d_out);

/// Unit-norm whitened descriptor. Throws ZeroProjection when the whitened
/// vector has norm below 1e-12.
Eigen::VectorXd apply_whitening(const Eigen::VectorXd& g, const WhiteningModel& model);

/// Z Z^T for unit rows; symmetric, unit diagonal, entries clamped to [-1, 1].
Eigen::MatrixXd similarity_matrix(const Eigen::MatrixXd& z);

struct LoopCandidate {
  std::int64_t frame_i = 0;  // row index of the similarity matrix, i < j
  std::int64_t frame_j = 0;
  double similarity = 0.0;

  bool operator==(const LoopCandidate&) const = default;
};

/// Pairs i < j with j - i >= min_frame_gap and similarity >= threshold,
/// taken greedily by (similarity desc, i asc, j asc); a pair is suppressed
/// when some accepted pair lies within nms_radius of it on both indices.
std::vector<LoopCandidate> detect_loops(const Eigen::MatrixXd& sim, double threshold,
                                        std::int64_t min_frame_gap, std::int64_t nms_radius);

/// Frames for the loop-centric chunk: loop_chunk_size/2 frames centred on i
/// followed by loop_chunk_size/2 centred on j. Windows are shifted to stay
/// inside [0, n_frames); frames already taken by the i-window are skipped.
std::vector<std::int64_t> build_loop_batch(std::int64_t i, std::int64_t j, std::int64_t loop_chunk_size,
                                           std::int64_t n_frames);

/// S_{i->j} = S_{j,loop} * S_{i,loop}^{-1}, where S_{x,loop} maps loop-chunk
/// coordinates into the temporal chunk containing frame x.
Sim3 loop_sim3(const Sim3& s_i_loop, const Sim3& s_j_loop);

/// Pooling followed by signed power normalization, one row per frame.
Eigen::MatrixXd frame_descriptors(const std::vector<const PatchTokens*>& tokens, double beta);

}  // namespace chunkstitch
