#include "chunkstitch/workflow.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <memory>
#include <sstream>

#include "binary.hpp"
#include "chunkstitch/error.hpp"
#include "chunkstitch/manifest.hpp"
#include "chunkstitch/ply.hpp"
#include "chunkstitch/text.hpp"
#include "chunkstitch/trajectory_io.hpp"

namespace chunkstitch {

namespace fs = std::filesystem;

namespace {

constexpr int kDigits = 17;

void append_sim3(std::ostringstream& os, const Sim3& s) {
  os << ' ' << format_real(s.scale(), kDigits);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) os << ' ' << format_real(s.rotation()(r, c), kDigits);
  }
  for (int k = 0; k < 3; ++k) os << ' ' << format_real(s.translation()(k), kDigits);
}

Sim3 parse_sim3(const std::vector<std::string_view>& f, std::size_t first, const std::string& where) {
  if (f.size() != first + 13) {
    throw Error(ErrorCode::ParseError, where + ": expected 13 numbers after the indices, got " +
                                           std::to_string(f.size() < first ? 0 : f.size() - first));
  }
  const double scale = parse_real(f[first], where + " scale");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw Error(ErrorCode::ParseError, where + ": scale must be positive");
  Mat3 r;
  for (int k = 0; k < 9; ++k) r(k / 3, k % 3) = parse_real(f[first + 1 + static_cast<std::size_t>(k)], where + " rotation");
  Vec3 t;
  for (int k = 0; k < 3; ++k) t(k) = parse_real(f[first + 10 + static_cast<std::size_t>(k)], where + " translation");
  if (orthogonality_error(r) > 1e-9 || r.determinant() < 0.0) r = project_to_rotation(r);
  return Sim3(scale, r, t);
}

std::size_t parse_index(std::string_view text, const std::string& where) {
  const auto v = parse_int(text, where);
  if (v < 0) throw Error(ErrorCode::ParseError, where + ": index must be non-negative");
  return static_cast<std::size_t>(v);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string format_graph(const PoseGraph& graph) {
  std::ostringstream os;
  for (std::size_t k = 0; k < graph.nodes.size(); ++k) {
    os << "node " << k;
    append_sim3(os, graph.nodes[k]);
    os << '\n';
  }
  for (const auto& e : graph.edges) {
    os << "edge " << (e.kind == EdgeKind::Sequential ? "sequential" : "loop") << ' ' << e.i << ' ' << e.j;
    append_sim3(os, e.measurement);
    os << '\n';
  }
  return os.str();
}

PoseGraph parse_graph(const std::string& text, const std::string& source) {
  PoseGraph g;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto f = split_fields(body);
    const std::string where = source + ", line " + std::to_string(line_no);
    if (f[0] == "node") {
      if (f.size() < 2) throw Error(ErrorCode::ParseError, where + ": node without index");
      if (parse_index(f[1], where) != g.nodes.size()) {
        throw Error(ErrorCode::ParseError, where + ": nodes must be listed as 0, 1, 2, ...");
      }
      g.nodes.push_back(parse_sim3(f, 2, where));
    } else if (f[0] == "edge") {
      if (f.size() < 4) throw Error(ErrorCode::ParseError, where + ": edge needs a kind and two indices");
      PoseGraphEdge e;
      if (f[1] == "sequential") {
        e.kind = EdgeKind::Sequential;
      } else if (f[1] == "loop") {
        e.kind = EdgeKind::Loop;
      } else {
        throw Error(ErrorCode::ParseError, where + ": unknown edge kind '" + std::string(f[1]) + "'");
      }
      e.i = parse_index(f[2], where);
      e.j = parse_index(f[3], where);
      e.measurement = parse_sim3(f, 4, where);
      g.edges.push_back(e);
    } else {
      throw Error(ErrorCode::ParseError, where + ": expected 'node' or 'edge'");
    }
  }
  return g;
}

std::string format_loops(const PipelineResult& result, const std::vector<ChunkArtifact>& chunks) {
  std::ostringstream os;
  os << "# candidate frame_i frame_j similarity\n";
  for (const auto& c : result.candidates) {
    os << "candidate " << c.frame_i << ' ' << c.frame_j << ' ' << format_real(c.similarity, kDigits) << '\n';
  }
  os << "# loop frame_i frame_j chunk_i chunk_j loop_chunk_id\n";
  for (const auto& l : result.loops) {
    os << "loop " << l.candidate.frame_i << ' ' << l.candidate.frame_j << ' ' << chunks.at(l.node_i).chunk_id << ' '
       << chunks.at(l.node_j).chunk_id << ' ' << l.loop_chunk_id << '\n';
  }
  return os.str();
}

std::string format_alignments(const PipelineResult& result, const std::vector<ChunkArtifact>& chunks) {
  std::ostringstream os;
  os << "# chunk_t chunk_t1 n_points rms lambda_d relaxations\n";
  for (std::size_t t = 0; t < result.sequential.size(); ++t) {
    const auto& a = result.sequential[t];
    os << chunks.at(t).chunk_id << ' ' << chunks.at(t + 1).chunk_id << ' ' << a.n_points << ' '
       << format_real(a.rms_residual, kDigits) << ' ' << format_real(a.lambda_d_used) << ' ' << a.relaxations << '\n';
  }
  return os.str();
}

std::string format_timings(const std::vector<StageTiming>& timings) {
  std::ostringstream os;
  double total = 0.0;
  for (const auto& t : timings) {
    os << t.stage << ' ' << format_real(t.seconds, 6) << '\n';
    total += t.seconds;
  }
  os << "total " << format_real(total, 6) << '\n';
  return os.str();
}

void write_synthetic_dataset(const Scene& scene, const std::string& dir) {
  fs::create_directories(dir);
  for (const auto& c : scene.chunks) write_chunk(dir, c);
  detail::write_file_text((fs::path(dir) / kSceneSpecFile).string(), scene_spec_to_text(scene.spec));
  write_trajectory((fs::path(dir) / "ground_truth.kitti.txt").string(), scene.gt_trajectory, TrajectoryFormat::Kitti);
  write_trajectory((fs::path(dir) / "ground_truth.tum.txt").string(), scene.gt_trajectory, TrajectoryFormat::Tum);
  if (!scene.landmarks.empty()) {
    PointCloud cloud;
    cloud.points = scene.landmarks;
    write_ply((fs::path(dir) / "ground_truth.ply").string(), cloud);
  }
}

LoopChunkSource directory_loop_source(const std::string& manifest_dir) {
  struct State {
    std::vector<ChunkArtifact> stored;
    bool scene_checked = false;
    std::optional<Scene> scene;
  };
  auto state = std::make_shared<State>();
  state->stored = read_optional_manifest_dir((fs::path(manifest_dir) / kLoopDir).string());
  const std::string spec_path = (fs::path(manifest_dir) / kSceneSpecFile).string();
  return [state, spec_path](const std::vector<std::int64_t>& frame_ids,
                            std::int64_t chunk_id) -> std::optional<ChunkArtifact> {
    for (const auto& c : state->stored) {
      if (c.frame_ids() == frame_ids) {
        ChunkArtifact copy = c;
        copy.kind = ChunkKind::Loop;
        return copy;
      }
    }
    if (!state->scene_checked) {
      state->scene_checked = true;
      if (fs::exists(spec_path)) state->scene = generate_scene(parse_scene_spec(detail::read_file_text(spec_path)));
    }
    if (!state->scene) return std::nullopt;
    return render_loop_chunk(*state->scene, frame_ids, chunk_id);
  };
}

void export_scene(const PropagatedScene& scene, const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_trajectory((fs::path(out_dir) / RunFiles::kitti).string(), scene.trajectory, TrajectoryFormat::Kitti);
  write_trajectory((fs::path(out_dir) / RunFiles::tum).string(), scene.trajectory, TrajectoryFormat::Tum);
  PointCloud cloud;
  cloud.points = scene.points;
  write_ply((fs::path(out_dir) / RunFiles::cloud).string(), cloud);
}

PipelineResult run_directory(const std::string& manifest_dir, const PipelineConfig& config,
                             const std::string& out_dir) {
  const auto load_start = std::chrono::steady_clock::now();
  auto chunks = read_manifest_dir(manifest_dir);
  const double read_seconds = seconds_since(load_start);
  const LoopChunkSource source = config.loops_enabled ? directory_loop_source(manifest_dir) : LoopChunkSource{};

  PipelineResult result = run_pipeline(chunks, config, source);
  result.timings.insert(result.timings.begin(), {"read", read_seconds});

  const auto export_start = std::chrono::steady_clock::now();
  std::sort(chunks.begin(), chunks.end(),
            [](const ChunkArtifact& a, const ChunkArtifact& b) { return a.chunk_id < b.chunk_id; });
  export_scene(result.scene, out_dir);
  const fs::path out(out_dir);
  detail::write_file_text((out / RunFiles::loops).string(), format_loops(result, chunks));
  detail::write_file_text((out / RunFiles::alignments).string(), format_alignments(result, chunks));
  detail::write_file_text((out / RunFiles::initial_graph).string(), format_graph(result.graph));
  PoseGraph optimized = result.graph;
  optimized.nodes = result.optimized.nodes;
  detail::write_file_text((out / RunFiles::graph).string(), format_graph(optimized));
  detail::write_file_text((out / RunFiles::config).string(), config_to_text(config));
  result.timings.push_back({"export", seconds_since(export_start)});
  detail::write_file_text((out / RunFiles::timing).string(), format_timings(result.timings));
  return result;
}

}  // namespace chunkstitch
