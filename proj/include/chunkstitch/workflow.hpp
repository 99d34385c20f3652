#pragma once

#include <string>

#include "chunkstitch/pipeline.hpp"
#include "chunkstitch/synthetic.hpp"

namespace chunkstitch {

/// Graph text: one line per node and per edge,
///   node <index> <s> <r00 r01 ... r22> <tx ty tz>
///   edge <sequential|loop> <i> <j> <s> <r00 ... r22> <tx ty tz>
/// with reals at 17 significant digits.
std::string format_graph(const PoseGraph& graph);
/// Throws ParseError naming `source` and the line.
PoseGraph parse_graph(const std::string& text, const std::string& source = "graph");

/// "frame_i frame_j similarity" per candidate, then, for accepted loops,
/// "loop frame_i frame_j chunk_i chunk_j loop_chunk_id".
std::string format_loops(const PipelineResult& result, const std::vector<ChunkArtifact>& chunks);
/// "chunk_t chunk_t1 n_points rms lambda_d relaxations" per pair.
std::string format_alignments(const PipelineResult& result, const std::vector<ChunkArtifact>& chunks);
/// "stage seconds" per stage, then "total seconds".
std::string format_timings(const std::vector<StageTiming>& timings);

/// Names of the files a dataset directory produced by write_synthetic_dataset holds.
inline constexpr const char* kSceneSpecFile = "scene.txt";
inline constexpr const char* kLoopDir = "loops";

/// Manifests for every temporal chunk, the scene spec, the ground-truth
/// trajectory (ground_truth.kitti.txt, ground_truth.tum.txt) and the
/// landmark cloud (ground_truth.ply).
void write_synthetic_dataset(const Scene& scene, const std::string& dir);

/// Loop-centric chunks for a manifest directory: a manifest under loops/
/// with exactly the requested frame ids, else a chunk rendered from the
/// directory's scene spec, else nothing. The scene is generated at most once.
LoopChunkSource directory_loop_source(const std::string& manifest_dir);

/// Files written by run_directory.
struct RunFiles {
  static constexpr const char* kitti = "trajectory.kitti.txt";
  static constexpr const char* tum = "trajectory.tum.txt";
  static constexpr const char* cloud = "cloud.ply";
  static constexpr const char* loops = "loops.txt";
  static constexpr const char* alignments = "alignments.txt";
  static constexpr const char* initial_graph = "graph_initial.txt";
  static constexpr const char* graph = "graph.txt";
  static constexpr const char* timing = "timing.txt";
  static constexpr const char* config = "config.txt";
};

/// Full pipeline on a manifest directory; writes every RunFiles entry into
/// out_dir (created when missing). The export stage is timed as well.
PipelineResult run_directory(const std::string& manifest_dir, const PipelineConfig& config, const std::string& out_dir);

/// Writes trajectory (both formats) and cloud for propagated results.
void export_scene(const PropagatedScene& scene, const std::string& out_dir);

}  // namespace chunkstitch
