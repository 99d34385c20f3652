#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "chunkstitch/error.hpp"
#include "chunkstitch/evaluation.hpp"
#include "chunkstitch/log.hpp"
#include "chunkstitch/manifest.hpp"
#include "chunkstitch/pipeline.hpp"
#include "chunkstitch/ply.hpp"
#include "chunkstitch/synthetic.hpp"
#include "chunkstitch/text.hpp"
#include "chunkstitch/trajectory_io.hpp"
#include "chunkstitch/workflow.hpp"

using namespace chunkstitch;
namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
  bool quiet = false;
  bool verbose = false;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + path.string());
  out << text;
}

PipelineConfig load_config(const GlobalOptions& g) {
  PipelineConfig config = g.config_path.empty() ? PipelineConfig{} : parse_config(read_text(g.config_path));
  if (g.seed) config.align.subsample_seed = *g.seed;
  for (const auto& o : g.overrides) apply_override(config, o);
  config.validate();
  return config;
}

fs::path output_dir(const GlobalOptions& g) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir);
}

std::vector<ChunkArtifact> load_chunks(const std::string& dir, const PipelineConfig& config) {
  auto chunks = read_manifest_dir(dir);
  prepare_chunks(chunks, config);
  return chunks;
}

// synth

struct SynthOptions {
  std::string spec_path;
  std::string shape;
  std::optional<std::int64_t> frames, chunk_size, overlap;
  std::optional<int> point_density;
  std::optional<double> drift, depth_noise, outliers;
  bool no_loop = false;
};

int run_synth(const GlobalOptions& g, const SynthOptions& o) {
  SceneSpec spec = o.spec_path.empty() ? SceneSpec{} : parse_scene_spec(read_text(o.spec_path));
  if (g.seed) spec.seed = *g.seed;
  if (!o.shape.empty()) spec.shape = parse_trajectory_shape(o.shape);
  if (o.frames) spec.n_frames = *o.frames;
  if (o.chunk_size) spec.chunk_size = *o.chunk_size;
  if (o.overlap) spec.overlap = *o.overlap;
  if (o.point_density) spec.point_density = *o.point_density;
  if (o.drift) spec.drift_sigma = *o.drift;
  if (o.depth_noise) spec.depth_noise_sigma = *o.depth_noise;
  if (o.outliers) spec.outlier_fraction = *o.outliers;
  if (o.no_loop) spec.loop_closure = false;
  spec.validate();
  const Scene scene = generate_scene(spec);
  write_synthetic_dataset(scene, output_dir(g).string());
  std::cout << "wrote " << scene.chunks.size() << " chunks, " << spec.n_frames << " frames to " << g.out_dir << '\n';
  return 0;
}

// align

int run_align(const GlobalOptions& g, const std::string& dir) {
  const PipelineConfig config = load_config(g);
  const auto chunks = load_chunks(dir, config);
  PipelineResult result;
  result.sequential = align_sequence(chunks, resolve_align_params(chunks, config));
  result.graph = build_pose_graph(result.sequential, {});
  const fs::path out = output_dir(g);
  write_text(out / RunFiles::alignments, format_alignments(result, chunks));
  write_text(out / RunFiles::initial_graph, format_graph(result.graph));
  std::cout << "aligned " << result.sequential.size() << " chunk pairs\n";
  return 0;
}

// loops

int run_loops(const GlobalOptions& g, const std::string& dir) {
  const PipelineConfig config = load_config(g);
  const auto chunks = load_chunks(dir, config);
  const AlignParams params = resolve_align_params(chunks, config);
  PipelineResult result;
  result.sequential = align_sequence(chunks, params);
  result.candidates = detect_loop_candidates(chunks, config, result.warnings);
  result.loops = align_loops(chunks, result.candidates, config, params, directory_loop_source(dir), result.warnings);
  result.graph = build_pose_graph(result.sequential, result.loops);
  const fs::path out = output_dir(g);
  write_text(out / RunFiles::loops, format_loops(result, chunks));
  write_text(out / RunFiles::alignments, format_alignments(result, chunks));
  write_text(out / RunFiles::initial_graph, format_graph(result.graph));
  std::cout << result.candidates.size() << " candidates, " << result.loops.size() << " loop edges\n";
  return 0;
}

// optimize

int run_optimize(const GlobalOptions& g, const std::string& graph_path) {
  const PipelineConfig config = load_config(g);
  PoseGraph graph = parse_graph(read_text(graph_path), graph_path);
  const OptimizeResult r = optimize(graph, config.solve);
  graph.nodes = r.nodes;
  const fs::path out = output_dir(g);
  write_text(out / RunFiles::graph, format_graph(graph));
  std::ostringstream report;
  report << "iterations " << r.report.iterations << '\n'
         << "initial_cost " << format_real(r.report.initial_cost) << '\n'
         << "final_cost " << format_real(r.report.final_cost) << '\n'
         << "converged " << (r.report.converged ? "true" : "false") << '\n';
  write_text(out / "optimize.txt", report.str());
  std::cout << report.str();
  return 0;
}

// export

int run_export(const GlobalOptions& g, const std::string& dir, const std::string& graph_path) {
  const PipelineConfig config = load_config(g);
  const auto chunks = load_chunks(dir, config);
  const PoseGraph graph = parse_graph(read_text(graph_path), graph_path);
  if (graph.nodes.size() != chunks.size()) {
    throw Error(ErrorCode::ShapeMismatch, graph_path + ": " + std::to_string(graph.nodes.size()) + " nodes for " +
                                              std::to_string(chunks.size()) + " chunks");
  }
  const PropagatedScene scene = propagate_scene(graph.nodes, chunks, config, resolve_align_params(chunks, config));
  export_scene(scene, output_dir(g).string());
  std::cout << "exported " << scene.trajectory.size() << " poses, " << scene.points.size() << " points\n";
  return 0;
}

// eval

struct EvalOptions {
  std::string estimate, ground_truth, cloud, gt_cloud;
  std::string format;
  std::string mode;
};

TrajectoryFormat format_for(const std::string& path, const std::string& forced) {
  return forced.empty() ? guess_trajectory_format(path) : parse_trajectory_format(forced);
}

int run_eval(const GlobalOptions& g, const EvalOptions& o) {
  const PipelineConfig config = load_config(g);
  const AteMode mode = o.mode.empty() ? config.ate_mode : parse_ate_mode(o.mode);
  std::ostringstream report;
  std::optional<Sim3> alignment;
  if (!o.estimate.empty() || !o.ground_truth.empty()) {
    if (o.estimate.empty() || o.ground_truth.empty()) {
      throw Error(ErrorCode::InvalidConfig, "--estimate and --gt must be given together");
    }
    const auto est = read_trajectory(o.estimate, format_for(o.estimate, o.format));
    const auto gt = read_trajectory(o.ground_truth, format_for(o.ground_truth, o.format));
    const AteResult r = ate(est, gt, mode);
    alignment = r.alignment;
    report << "ate_rmse " << format_real(r.rmse) << '\n'
           << "ate_mode " << to_string(mode) << '\n'
           << "ate_frames " << r.n_frames << '\n'
           << "ate_scale " << format_real(r.alignment.scale()) << '\n';
  }
  if (!o.cloud.empty() || !o.gt_cloud.empty()) {
    if (o.cloud.empty() || o.gt_cloud.empty()) {
      throw Error(ErrorCode::InvalidConfig, "--cloud and --gt-cloud must be given together");
    }
    std::vector<Vec3> pred = read_ply(o.cloud).points;
    if (alignment) {
      for (auto& p : pred) p = alignment->apply(p);
    }
    const CloudMetrics m = cloud_metrics(pred, read_ply(o.gt_cloud).points);
    report << "accuracy " << format_real(m.accuracy) << '\n'
           << "completeness " << format_real(m.completeness) << '\n'
           << "chamfer " << format_real(m.chamfer) << '\n';
  }
  if (report.str().empty()) throw Error(ErrorCode::InvalidConfig, "nothing to evaluate");
  write_text(output_dir(g) / "eval.txt", report.str());
  std::cout << report.str();
  return 0;
}

// run

int run_run(const GlobalOptions& g, const std::string& dir) {
  const PipelineConfig config = load_config(g);
  const PipelineResult r = run_directory(dir, config, output_dir(g).string());
  std::cout << r.sequential.size() << " sequential edges, " << r.loops.size() << " loop edges, cost "
            << format_real(r.optimized.report.initial_cost, 6) << " -> " << format_real(r.optimized.report.final_cost, 6)
            << ", " << r.scene.trajectory.size() << " poses, " << r.scene.points.size() << " points\n";
  std::cout << format_timings(r.timings);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chunked reconstruction stitching: Sim(3) alignment, loop closure and pose-graph optimization"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Scene seed for synth, subsample seed otherwise");
  app.add_option("--config", g.config_path, "Config file of key = value lines")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "Config override key=value (repeatable)");
  app.add_option("--out-dir,-o", g.out_dir, "Output directory")->capture_default_str();
  app.add_flag("--quiet,-q", g.quiet, "Only print errors");
  app.add_flag("--verbose,-v", g.verbose, "Print debug messages");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic chunk dataset");
  synth_cmd->add_option("--spec", synth.spec_path, "Scene spec file")->check(CLI::ExistingFile);
  synth_cmd->add_option("--shape", synth.shape, "line, circle or figure8");
  synth_cmd->add_option("--frames", synth.frames, "Number of frames");
  synth_cmd->add_option("--chunk-size", synth.chunk_size, "Frames per chunk");
  synth_cmd->add_option("--overlap", synth.overlap, "Frames shared by consecutive chunks");
  synth_cmd->add_option("--point-density", synth.point_density, "Landmarks spawned per frame");
  synth_cmd->add_option("--drift", synth.drift, "Per-chunk Sim(3) drift sigma");
  synth_cmd->add_option("--depth-noise", synth.depth_noise, "Relative depth noise sigma");
  synth_cmd->add_option("--outliers", synth.outliers, "Per-pixel gross error probability");
  synth_cmd->add_flag("--no-loop", synth.no_loop, "Path without a revisit");

  std::string dir, graph_path;
  auto* align_cmd = app.add_subcommand("align", "Align consecutive chunks of a manifest directory");
  align_cmd->add_option("dir", dir, "Manifest directory")->required();

  auto* loops_cmd = app.add_subcommand("loops", "Detect and align loop closures");
  loops_cmd->add_option("dir", dir, "Manifest directory")->required();

  auto* optimize_cmd = app.add_subcommand("optimize", "Optimize a pose graph file");
  optimize_cmd->add_option("--graph", graph_path, "Graph text file")->required()->check(CLI::ExistingFile);

  auto* export_cmd = app.add_subcommand("export", "Write trajectory and point cloud for given chunk nodes");
  export_cmd->add_option("dir", dir, "Manifest directory")->required();
  export_cmd->add_option("--graph", graph_path, "Graph text file")->required()->check(CLI::ExistingFile);

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Trajectory and point-cloud metrics");
  eval_cmd->add_option("--estimate", eval.estimate, "Estimated trajectory")->check(CLI::ExistingFile);
  eval_cmd->add_option("--gt", eval.ground_truth, "Ground-truth trajectory")->check(CLI::ExistingFile);
  eval_cmd->add_option("--format", eval.format, "kitti or tum (default: from the file name)");
  eval_cmd->add_option("--mode", eval.mode, "ATE alignment: sim3 or se3 (default: config ate_mode)");
  eval_cmd->add_option("--cloud", eval.cloud, "Predicted PLY")->check(CLI::ExistingFile);
  eval_cmd->add_option("--gt-cloud", eval.gt_cloud, "Ground-truth PLY")->check(CLI::ExistingFile);

  auto* run_cmd = app.add_subcommand("run", "Full pipeline on a manifest directory");
  run_cmd->add_option("dir", dir, "Manifest directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (g.quiet) {
    set_log_sink([](LogLevel, const std::string&) {});
  } else if (g.verbose) {
    set_log_level(LogLevel::Debug);
  }

  try {
    if (*synth_cmd) return run_synth(g, synth);
    if (*align_cmd) return run_align(g, dir);
    if (*loops_cmd) return run_loops(g, dir);
    if (*optimize_cmd) return run_optimize(g, graph_path);
    if (*export_cmd) return run_export(g, dir, graph_path);
    if (*eval_cmd) return run_eval(g, eval);
    if (*run_cmd) return run_run(g, dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
