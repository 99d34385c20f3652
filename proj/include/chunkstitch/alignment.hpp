#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "chunkstitch/chunk.hpp"
#include "chunkstitch/sim3.hpp"

namespace chunkstitch {

/// Paired points; dst_i is expected to equal S(src_i). Empty weights means
/// uniform.
struct CorrespondenceSet {
  std::vector<Vec3> src;
  std::vector<Vec3> dst;
  std::vector<double> weights;

  std::size_t size() const { return src.size(); }
  /// Throws InvalidSpec on size mismatch, fewer than 3 pairs, non-finite
  /// points or negative weights.
  void validate() const;
};

/// Closed-form weighted least-squares similarity:
///   argmin sum_i w_i |dst_i - s R src_i - t|^2
/// via SVD of the cross-covariance with the reflection correction.
/// Throws DegenerateGeometry when the centred points span fewer than two
/// dimensions.
Sim3 umeyama_sim3(const CorrespondenceSet& c);

/// Same closed form with scale pinned to 1 (rigid alignment).
Sim3 umeyama_se3(const CorrespondenceSet& c);

/// Umeyama without the rank check, for trajectory evaluation where a straight
/// path leaves the rotation about its axis free but the residual well defined.
Sim3 best_fit_transform(const CorrespondenceSet& c, bool with_scale);

struct IrlsResult {
  Sim3 transform;
  int iterations = 0;
  std::vector<double> weights;
};

/// Iteratively reweighted Umeyama with Huber weights. The Huber threshold is
/// kernel_scale times the median absolute deviation of the current residual
/// norms. Stops when the largest weight change drops below 1e-8 or after
/// max_iters reweightings; max_iters = 0 is plain Umeyama.
IrlsResult irls_sim3_detailed(const CorrespondenceSet& c, int max_iters, double kernel_scale = 1.345);
Sim3 irls_sim3(const CorrespondenceSet& c, int max_iters, double kernel_scale = 1.345);

/// Root mean square of |dst_i - S(src_i)|.
double rms_residual(const CorrespondenceSet& c, const Sim3& s);

enum class AlignMethod { Umeyama, Irls };

std::string_view to_string(AlignMethod m);
AlignMethod parse_align_method(std::string_view name);

struct AlignParams {
  double lambda_d = 0.2;
  double lambda_gamma = 0.5;
  AlignMethod method = AlignMethod::Umeyama;
  /// false = use every overlap pixel with valid depth in both chunks.
  bool use_mask = true;
  /// Depth normalization target; defaults to the first frame of the first
  /// chunk passed to align_adjacent.
  std::optional<Intrinsics> reference;
  int irls_max_iters = 10;
  double irls_kernel_scale = 1.345;
  std::size_t min_points = 100;
  /// lambda_d is doubled up to this many times when too few pixels survive.
  int max_relaxations = 3;
  std::size_t max_points = 200000;
  std::uint64_t subsample_seed = 0;
};

struct AlignmentReport {
  Sim3 transform;  // maps chunk_t coordinates into chunk_t1 coordinates
  std::size_t n_points = 0;
  double rms_residual = 0.0;
  double elapsed_seconds = 0.0;
  double lambda_d_used = 0.0;
  int relaxations = 0;
};

/// Overlap correspondences between two chunks that share frames: for each
/// shared frame id, the pixels accepted by the reliability mask (or all
/// pixels with positive depth in both chunks when use_mask is false) are
/// back-projected through each chunk's own pose. Throws NoOverlap.
CorrespondenceSet overlap_correspondences(const ChunkArtifact& chunk_t, const ChunkArtifact& chunk_t1,
                                          const AlignParams& params, double lambda_d);

/// Estimates the similarity taking chunk_t coordinates to chunk_t1
/// coordinates from their shared frames. Throws NoOverlap, or
/// InsufficientReliablePoints after the lambda_d relaxations are exhausted.
AlignmentReport align_adjacent(const ChunkArtifact& chunk_t, const ChunkArtifact& chunk_t1,
                               const AlignParams& params);

}  // namespace chunkstitch
