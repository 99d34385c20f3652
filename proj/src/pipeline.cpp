#include "chunkstitch/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <sstream>

#include "chunkstitch/chunk_geometry.hpp"
#include "chunkstitch/error.hpp"
#include "chunkstitch/log.hpp"
#include "chunkstitch/text.hpp"

namespace chunkstitch {

namespace {

struct ConfigField {
  std::string key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

ConfigField real_field(std::string key, double PipelineConfig::*member) {
  return {key, [member, key](PipelineConfig& c, const std::string& v) { c.*member = parse_real(v, key); },
          [member](const PipelineConfig& c) { return format_real(c.*member); }};
}

ConfigField int_field(std::string key, std::int64_t PipelineConfig::*member) {
  return {key, [member, key](PipelineConfig& c, const std::string& v) { c.*member = parse_int(v, key); },
          [member](const PipelineConfig& c) { return std::to_string(c.*member); }};
}

template <typename Get>
ConfigField ref_real(std::string key, Get ref) {
  return {key, [ref, key](PipelineConfig& c, const std::string& v) { ref(c) = parse_real(v, key); },
          [ref](const PipelineConfig& c) { return format_real(ref(const_cast<PipelineConfig&>(c))); }};
}

template <typename T, typename Get>
ConfigField ref_int(std::string key, Get ref) {
  return {key, [ref, key](PipelineConfig& c, const std::string& v) { ref(c) = static_cast<T>(parse_int(v, key)); },
          [ref](const PipelineConfig& c) { return std::to_string(ref(const_cast<PipelineConfig&>(c))); }};
}

template <typename Get>
ConfigField ref_bool(std::string key, Get ref) {
  return {key, [ref, key](PipelineConfig& c, const std::string& v) { ref(c) = parse_bool(v, key); },
          [ref](const PipelineConfig& c) { return std::string(ref(const_cast<PipelineConfig&>(c)) ? "true" : "false"); }};
}

const std::vector<ConfigField>& fields() {
  static const std::vector<ConfigField> table = [] {
    std::vector<ConfigField> f;
    f.push_back(int_field("chunk_size", &PipelineConfig::chunk_size));
    f.push_back(int_field("overlap", &PipelineConfig::overlap));
    f.push_back(ref_real("lambda_d", [](PipelineConfig& c) -> double& { return c.align.lambda_d; }));
    f.push_back(ref_real("lambda_gamma", [](PipelineConfig& c) -> double& { return c.align.lambda_gamma; }));
    f.push_back({"align_method",
                 [](PipelineConfig& c, const std::string& v) { c.align.method = parse_align_method(trim(v)); },
                 [](const PipelineConfig& c) { return std::string(to_string(c.align.method)); }});
    f.push_back(ref_bool("use_mask", [](PipelineConfig& c) -> bool& { return c.align.use_mask; }));
    f.push_back(ref_int<int>("irls_max_iters", [](PipelineConfig& c) -> int& { return c.align.irls_max_iters; }));
    f.push_back(ref_real("irls_kernel_scale", [](PipelineConfig& c) -> double& { return c.align.irls_kernel_scale; }));
    f.push_back(ref_int<std::size_t>("min_points", [](PipelineConfig& c) -> std::size_t& { return c.align.min_points; }));
    f.push_back(ref_int<std::size_t>("max_points", [](PipelineConfig& c) -> std::size_t& { return c.align.max_points; }));
    f.push_back(ref_int<int>("max_relaxations", [](PipelineConfig& c) -> int& { return c.align.max_relaxations; }));
    f.push_back(ref_int<std::uint64_t>("subsample_seed",
                                       [](PipelineConfig& c) -> std::uint64_t& { return c.align.subsample_seed; }));
    f.push_back(ref_bool("loops", [](PipelineConfig& c) -> bool& { return c.loops_enabled; }));
    f.push_back(real_field("beta", &PipelineConfig::beta));
    f.push_back(ref_int<int>("whiten_r", [](PipelineConfig& c) -> int& { return c.whiten_removed; }));
    f.push_back(ref_int<int>("whiten_dim", [](PipelineConfig& c) -> int& { return c.whiten_dim; }));
    f.push_back(int_field("loop_chunk_size", &PipelineConfig::loop_chunk_size));
    f.push_back(real_field("loop_threshold", &PipelineConfig::loop_threshold));
    f.push_back(int_field("min_frame_gap", &PipelineConfig::min_frame_gap));
    f.push_back(int_field("nms_radius", &PipelineConfig::nms_radius));
    f.push_back(ref_int<int>("lm_max_iters", [](PipelineConfig& c) -> int& { return c.solve.max_iters; }));
    f.push_back(ref_real("lm_initial_damping", [](PipelineConfig& c) -> double& { return c.solve.initial_damping; }));
    f.push_back(ref_real("lm_damping_up", [](PipelineConfig& c) -> double& { return c.solve.damping_up; }));
    f.push_back(ref_real("lm_damping_down", [](PipelineConfig& c) -> double& { return c.solve.damping_down; }));
    f.push_back(ref_real("lm_cost_tolerance", [](PipelineConfig& c) -> double& { return c.solve.cost_tolerance; }));
    f.push_back(ref_real("lm_step_tolerance", [](PipelineConfig& c) -> double& { return c.solve.step_tolerance; }));
    f.push_back(ref_real("lm_jacobian_step", [](PipelineConfig& c) -> double& { return c.solve.jacobian_step; }));
    f.push_back(ref_int<std::size_t>("lm_dense_limit", [](PipelineConfig& c) -> std::size_t& { return c.solve.dense_limit; }));
    f.push_back(ref_int<int>("export_pixel_stride", [](PipelineConfig& c) -> int& { return c.export_pixel_stride; }));
    f.push_back(real_field("export_depth_ceiling", &PipelineConfig::export_depth_ceiling));
    f.push_back({"ate_mode", [](PipelineConfig& c, const std::string& v) { c.ate_mode = parse_ate_mode(trim(v)); },
                 [](const PipelineConfig& c) { return std::string(to_string(c.ate_mode)); }});
    return f;
  }();
  return table;
}

void require(bool ok, const std::string& key, const std::string& rule) {
  if (!ok) throw Error(ErrorCode::InvalidConfig, key + " " + rule);
}

// Rethrows with the stage and object prefixed to the message.
template <typename F>
auto tagged(const std::string& context, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    const std::string what = e.what();
    const std::string code(to_string(e.code()));
    const std::string detail = what.rfind(code + ": ", 0) == 0 ? what.substr(code.size() + 2) : what;
    throw Error(e.code(), context + ": " + detail);
  }
}

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& out) : out_(out) {}
  template <typename F>
  void run(const std::string& stage, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    f();
    out_.push_back({stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
  }

 private:
  std::vector<StageTiming>& out_;
};

void warn(std::vector<std::string>& warnings, const std::string& message) {
  log_warning(message);
  warnings.push_back(message);
}

}  // namespace

void PipelineConfig::validate() const {
  require(chunk_size >= 2, "chunk_size", "must be at least 2");
  require(overlap > 0 && overlap < chunk_size, "overlap", "must satisfy 0 < overlap < chunk_size");
  require(align.lambda_d > 0.0, "lambda_d", "must be positive");
  require(align.lambda_gamma >= 0.0 && align.lambda_gamma <= 1.0, "lambda_gamma", "must lie in [0, 1]");
  require(align.irls_max_iters >= 0, "irls_max_iters", "must be non-negative");
  require(align.irls_kernel_scale > 0.0, "irls_kernel_scale", "must be positive");
  require(align.min_points >= 3, "min_points", "must be at least 3");
  require(align.max_points >= align.min_points, "max_points", "must be at least min_points");
  require(align.max_relaxations >= 0, "max_relaxations", "must be non-negative");
  require(beta > 0.0 && beta <= 1.0, "beta", "must lie in (0, 1]");
  require(whiten_removed >= 0, "whiten_r", "must be non-negative");
  require(whiten_dim >= 1, "whiten_dim", "must be positive");
  require(loop_chunk_size >= 4, "loop_chunk_size", "must be at least 4");
  require(loop_threshold >= -1.0 && loop_threshold <= 1.0, "loop_threshold", "must lie in [-1, 1]");
  require(min_frame_gap >= 1, "min_frame_gap", "must be positive");
  require(nms_radius >= 0, "nms_radius", "must be non-negative");
  require(solve.max_iters >= 1, "lm_max_iters", "must be positive");
  require(solve.initial_damping > 0.0, "lm_initial_damping", "must be positive");
  require(solve.damping_up > 1.0, "lm_damping_up", "must exceed 1");
  require(solve.damping_down > 0.0 && solve.damping_down < 1.0, "lm_damping_down", "must lie in (0, 1)");
  require(solve.cost_tolerance > 0.0, "lm_cost_tolerance", "must be positive");
  require(solve.step_tolerance > 0.0, "lm_step_tolerance", "must be positive");
  require(solve.jacobian_step > 0.0, "lm_jacobian_step", "must be positive");
  require(export_pixel_stride >= 1, "export_pixel_stride", "must be positive");
  require(export_depth_ceiling >= 0.0, "export_depth_ceiling", "must be non-negative");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key != key) continue;
    try {
      f.set(config, value);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, "bad value for '" + key + "': " + e.what());
    }
    return;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
}

void apply_override(PipelineConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "override '" + assignment + "' is not key=value");
  set_config_value(config, std::string(trim(std::string_view(assignment).substr(0, eq))),
                   std::string(trim(std::string_view(assignment).substr(eq + 1))));
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig config;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    try {
      apply_override(config, std::string(t));
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(number) + ": " + e.what());
    }
  }
  return config;
}

std::string config_to_text(const PipelineConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

std::size_t chunk_for_window(const std::vector<ChunkArtifact>& chunks, const std::vector<std::int64_t>& window) {
  std::size_t best = chunks.size(), best_count = 0;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    std::size_t count = 0;
    for (const auto f : window) count += chunks[c].contains(f) ? 1 : 0;
    if (count > best_count) {
      best = c;
      best_count = count;
    }
  }
  if (best == chunks.size()) throw Error(ErrorCode::InvalidSpec, "no temporal chunk contains the loop window");
  return best;
}

std::vector<std::int64_t> prepare_chunks(std::vector<ChunkArtifact>& chunks, const PipelineConfig& config) {
  if (chunks.size() < 2) throw Error(ErrorCode::InvalidSpec, "stage load: need at least two temporal chunks");
  std::sort(chunks.begin(), chunks.end(),
            [](const ChunkArtifact& a, const ChunkArtifact& b) { return a.chunk_id < b.chunk_id; });
  for (const auto& c : chunks) {
    tagged("stage load, chunk " + std::to_string(c.chunk_id), [&] {
      if (c.kind != ChunkKind::Temporal) throw Error(ErrorCode::InvalidSpec, "expected a temporal chunk");
      c.validate();
    });
  }
  const std::int64_t n_frames = chunks.back().frames.back().frame_id + 1;
  const auto schedule = chunk_indices(n_frames, config.chunk_size, config.overlap);
  bool matches = schedule.size() == chunks.size();
  for (std::size_t t = 0; matches && t < chunks.size(); ++t) {
    matches = chunks[t].frames.front().frame_id == schedule[t].begin &&
              chunks[t].frames.back().frame_id + 1 == schedule[t].end;
  }
  if (!matches) {
    throw Error(ErrorCode::InvalidConfig, "stage load: chunk frame ranges do not follow chunk_size = " +
                                              std::to_string(config.chunk_size) +
                                              ", overlap = " + std::to_string(config.overlap));
  }
  std::vector<std::int64_t> frame_ids;
  for (std::int64_t f = 0; f < n_frames; ++f) frame_ids.push_back(f);
  return frame_ids;
}

AlignParams resolve_align_params(const std::vector<ChunkArtifact>& chunks, const PipelineConfig& config) {
  AlignParams params = config.align;
  if (!params.reference && !chunks.empty() && !chunks.front().frames.empty()) {
    params.reference = chunks.front().frames.front().intrinsics;
  }
  return params;
}

std::vector<AlignmentReport> align_sequence(const std::vector<ChunkArtifact>& chunks, const AlignParams& params) {
  std::vector<AlignmentReport> out;
  for (std::size_t t = 0; t + 1 < chunks.size(); ++t) {
    const std::string ctx = "stage align, chunk " + std::to_string(chunks[t].chunk_id) + " -> " +
                            std::to_string(chunks[t + 1].chunk_id);
    out.push_back(tagged(ctx, [&] { return align_adjacent(chunks[t], chunks[t + 1], params); }));
  }
  return out;
}

std::vector<LoopCandidate> detect_loop_candidates(const std::vector<ChunkArtifact>& chunks,
                                                  const PipelineConfig& config, std::vector<std::string>& warnings) {
  std::vector<std::int64_t> frame_ids;
  std::vector<const PatchTokens*> tokens;
  bool complete = true;
  std::map<std::int64_t, const Frame*> first_seen;
  for (const auto& c : chunks) {
    for (const auto& f : c.frames) first_seen.emplace(f.frame_id, &f);
  }
  for (const auto& [id, frame] : first_seen) {
    frame_ids.push_back(id);
    if (frame->tokens.size() > 0) {
      tokens.push_back(&frame->tokens);
    } else {
      complete = false;
    }
  }
  if (!complete) {
    warn(warnings, "loop detection skipped: some frames carry no tokens");
    return {};
  }
  const Eigen::MatrixXd g = tagged("stage loop_detection", [&] { return frame_descriptors(tokens, config.beta); });
  const auto n = static_cast<int>(g.rows()), d = static_cast<int>(g.cols());
  const int d_out = std::min({config.whiten_dim, d - config.whiten_removed, n - config.whiten_removed - 1});
  if (d_out < 1) {
    warn(warnings, "loop detection skipped: too few frames or dimensions for whitening");
    return {};
  }
  WhiteningModel model;
  try {
    model = fit_whitening(g, config.whiten_removed, d_out);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::RankDeficient && e.code() != ErrorCode::TooFewFrames) {
      throw Error(e.code(), std::string("stage loop_detection: ") + e.what());
    }
    warn(warnings, std::string("loop detection skipped: ") + e.what());
    return {};
  }
  Eigen::MatrixXd z(n, model.output_dim());
  for (int i = 0; i < n; ++i) {
    z.row(i) = tagged("stage loop_detection, frame " + std::to_string(frame_ids[static_cast<std::size_t>(i)]),
                      [&] { return apply_whitening(g.row(i).transpose(), model); })
                   .transpose();
  }
  const Eigen::MatrixXd sim = similarity_matrix(z);
  std::vector<LoopCandidate> out;
  for (auto c : detect_loops(sim, config.loop_threshold, config.min_frame_gap, config.nms_radius)) {
    c.frame_i = frame_ids[static_cast<std::size_t>(c.frame_i)];
    c.frame_j = frame_ids[static_cast<std::size_t>(c.frame_j)];
    out.push_back(c);
  }
  return out;
}

std::vector<LoopClosure> align_loops(const std::vector<ChunkArtifact>& chunks,
                                     const std::vector<LoopCandidate>& candidates, const PipelineConfig& config,
                                     const AlignParams& params, const LoopChunkSource& loop_source,
                                     std::vector<std::string>& warnings) {
  std::vector<LoopClosure> out;
  if (chunks.empty()) return out;
  const std::int64_t n_frames = chunks.back().frames.back().frame_id + 1;
  auto next_id = chunks.back().chunk_id + 1;
  for (const auto& cand : candidates) {
    const std::string ctx =
        "stage loop_alignment, loop " + std::to_string(cand.frame_i) + " <-> " + std::to_string(cand.frame_j);
    const auto batch = build_loop_batch(cand.frame_i, cand.frame_j, config.loop_chunk_size, n_frames);
    std::vector<std::int64_t> window_i, window_j;
    for (const auto f : batch) {
      (std::abs(f - cand.frame_i) <= std::abs(f - cand.frame_j) ? window_i : window_j).push_back(f);
    }
    const std::size_t node_i = tagged(ctx, [&] { return chunk_for_window(chunks, window_i); });
    const std::size_t node_j = tagged(ctx, [&] { return chunk_for_window(chunks, window_j); });
    if (node_i == node_j) {
      warn(warnings, ctx + ": both windows fall in chunk " + std::to_string(chunks[node_i].chunk_id) + ", skipped");
      continue;
    }
    const std::int64_t loop_id = next_id++;
    std::optional<ChunkArtifact> loop_chunk;
    if (loop_source) loop_chunk = tagged(ctx, [&] { return loop_source(batch, loop_id); });
    if (!loop_chunk) {
      warn(warnings, ctx + ": no loop-centric chunk available, skipped");
      continue;
    }
    const Sim3 s_i = tagged(ctx + ", loop chunk -> chunk " + std::to_string(chunks[node_i].chunk_id),
                            [&] { return align_adjacent(*loop_chunk, chunks[node_i], params).transform; });
    const Sim3 s_j = tagged(ctx + ", loop chunk -> chunk " + std::to_string(chunks[node_j].chunk_id),
                            [&] { return align_adjacent(*loop_chunk, chunks[node_j], params).transform; });
    out.push_back({cand, loop_chunk->chunk_id, node_i, node_j, loop_sim3(s_i, s_j)});
  }
  return out;
}

PoseGraph build_pose_graph(const std::vector<AlignmentReport>& sequential, const std::vector<LoopClosure>& loops) {
  PoseGraph graph;
  std::vector<Sim3> steps;
  for (const auto& a : sequential) steps.push_back(a.transform.inverse());
  graph.nodes = chain_initialization(Sim3::identity(), steps);
  for (std::size_t t = 0; t < steps.size(); ++t) graph.edges.push_back({EdgeKind::Sequential, t, t + 1, steps[t]});
  for (const auto& l : loops) graph.edges.push_back({EdgeKind::Loop, l.node_i, l.node_j, l.transform.inverse()});
  return graph;
}

PropagatedScene propagate_scene(const std::vector<Sim3>& nodes, const std::vector<ChunkArtifact>& chunks,
                                const PipelineConfig& config, const AlignParams& params) {
  PropagateOptions options;
  options.reference = params.reference;
  options.pixel_stride = config.export_pixel_stride;
  options.depth_ceiling = config.export_depth_ceiling;
  return tagged("stage propagate", [&] { return propagate_to_frames(nodes, chunks, options); });
}

PipelineResult run_pipeline(std::vector<ChunkArtifact> chunks, const PipelineConfig& config,
                            const LoopChunkSource& loop_source) {
  config.validate();
  PipelineResult result;
  StageClock clock(result.timings);

  clock.run("load", [&] { prepare_chunks(chunks, config); });
  const AlignParams params = resolve_align_params(chunks, config);
  clock.run("align", [&] { result.sequential = align_sequence(chunks, params); });
  clock.run("loop_detection", [&] {
    if (config.loops_enabled) result.candidates = detect_loop_candidates(chunks, config, result.warnings);
  });
  clock.run("loop_alignment", [&] {
    result.loops = align_loops(chunks, result.candidates, config, params, loop_source, result.warnings);
  });
  clock.run("optimize", [&] {
    result.graph = build_pose_graph(result.sequential, result.loops);
    result.optimized = tagged("stage optimize", [&] { return optimize(result.graph, config.solve); });
  });
  clock.run("propagate", [&] { result.scene = propagate_scene(result.optimized.nodes, chunks, config, params); });
  return result;
}

}  // namespace chunkstitch
