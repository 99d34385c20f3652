#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chunkstitch/alignment.hpp"
#include "chunkstitch/chunk.hpp"
#include "chunkstitch/evaluation.hpp"
#include "chunkstitch/loop_detection.hpp"
#include "chunkstitch/pose_graph.hpp"

namespace chunkstitch {

/// Every tunable of the end-to-end run. Text form is one `key = value` per
/// line; see config_keys() for the accepted keys.
struct PipelineConfig {
  std::int64_t chunk_size = 75;
  std::int64_t overlap = 30;

  AlignParams align;

  bool loops_enabled = true;
  double beta = 0.5;
  int whiten_removed = 1;
  int whiten_dim = 512;
  std::int64_t loop_chunk_size = 40;
  double loop_threshold = 0.65;
  std::int64_t min_frame_gap = 150;
  std::int64_t nms_radius = 25;

  SolveSettings solve;

  int export_pixel_stride = 1;
  double export_depth_ceiling = 0.0;
  AteMode ate_mode = AteMode::Sim3;

  /// Throws InvalidConfig naming the offending key.
  void validate() const;
};

/// Keys accepted by set_config_value, in the order config_to_text writes them.
const std::vector<std::string>& config_keys();

/// Throws InvalidConfig for an unknown key or unparsable value.
void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value);
/// Applies a `key=value` override.
void apply_override(PipelineConfig& config, const std::string& assignment);
/// Parses the text form on top of the defaults. Blank lines and lines
/// starting with '#' are ignored. Throws InvalidConfig with the line number.
PipelineConfig parse_config(const std::string& text);
std::string config_to_text(const PipelineConfig& config);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

/// One accepted loop closure.
struct LoopClosure {
  LoopCandidate candidate;  // frame ids
  std::int64_t loop_chunk_id = 0;
  std::size_t node_i = 0;
  std::size_t node_j = 0;
  /// Maps chunk node_i coordinates into chunk node_j coordinates.
  Sim3 transform;
};

/// Supplies the loop-centric chunk for an ordered frame-id batch, or nullopt
/// when no such chunk can be produced.
using LoopChunkSource =
    std::function<std::optional<ChunkArtifact>(const std::vector<std::int64_t>& frame_ids, std::int64_t chunk_id)>;

struct PipelineResult {
  std::vector<AlignmentReport> sequential;
  std::vector<LoopCandidate> candidates;
  std::vector<LoopClosure> loops;
  PoseGraph graph;  // initial nodes
  OptimizeResult optimized;
  PropagatedScene scene;
  std::vector<StageTiming> timings;
  std::vector<std::string> warnings;
};

/// Runs align, loop detection, loop alignment, optimization and propagation
/// on temporal chunks that already sit in memory. Failures are rethrown with
/// the stage name and the chunk or edge involved.
PipelineResult run_pipeline(std::vector<ChunkArtifact> chunks, const PipelineConfig& config,
                            const LoopChunkSource& loop_source = {});

/// The stages of run_pipeline, usable one at a time. Each rethrows failures
/// with its stage name; warnings are logged and appended to `warnings`.

/// Sorts by chunk id, validates every chunk and checks the frame ranges
/// against the chunk_size / overlap schedule (InvalidConfig otherwise).
/// Returns the frame ids 0 .. N-1.
std::vector<std::int64_t> prepare_chunks(std::vector<ChunkArtifact>& chunks, const PipelineConfig& config);

/// config.align with the reference intrinsics defaulted to the first frame.
AlignParams resolve_align_params(const std::vector<ChunkArtifact>& chunks, const PipelineConfig& config);

/// align_adjacent over every consecutive pair of sorted temporal chunks.
std::vector<AlignmentReport> align_sequence(const std::vector<ChunkArtifact>& chunks, const AlignParams& params);

/// Whitened token retrieval over all frames. Returns no candidates, with a
/// warning, when tokens are missing or whitening is not possible.
std::vector<LoopCandidate> detect_loop_candidates(const std::vector<ChunkArtifact>& chunks,
                                                  const PipelineConfig& config, std::vector<std::string>& warnings);

/// Resolves each candidate to a pair of temporal chunks and estimates their
/// relative transform through a loop-centric chunk from `loop_source`.
std::vector<LoopClosure> align_loops(const std::vector<ChunkArtifact>& chunks,
                                     const std::vector<LoopCandidate>& candidates, const PipelineConfig& config,
                                     const AlignParams& params, const LoopChunkSource& loop_source,
                                     std::vector<std::string>& warnings);

/// Chained initial nodes, one sequential edge per alignment and one loop
/// edge per closure.
PoseGraph build_pose_graph(const std::vector<AlignmentReport>& sequential, const std::vector<LoopClosure>& loops);

/// propagate_to_frames with the export options of `config`.
PropagatedScene propagate_scene(const std::vector<Sim3>& nodes, const std::vector<ChunkArtifact>& chunks,
                                const PipelineConfig& config, const AlignParams& params);

/// Temporal chunk whose frames cover the most of `window`; ties go to the
/// earlier chunk. Throws InvalidSpec when no chunk contains any of them.
std::size_t chunk_for_window(const std::vector<ChunkArtifact>& chunks, const std::vector<std::int64_t>& window);

}  // namespace chunkstitch
