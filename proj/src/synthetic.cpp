#include "chunkstitch/synthetic.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <type_traits>
#include <unordered_map>

#include "chunkstitch/error.hpp"
#include "chunkstitch/random.hpp"
#include "chunkstitch/text.hpp"

namespace chunkstitch {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Seed streams.
enum Stream : std::uint64_t {
  kLandmarks = 1,
  kChunkDrift = 2,
  kChunkNoise = 3,
  kLoopDrift = 4,
  kTokenNoise = 5,
  kPlaceCentroid = 6,
  kSharedDirection = 7,
  kOutliers = 8,
};

struct PathRange {
  double s0, s1;
};

PathRange path_range(TrajectoryShape shape, bool loop) {
  switch (shape) {
    case TrajectoryShape::Line:
      return {0.0, 1.0};
    case TrajectoryShape::Circle:
      return loop ? PathRange{0.0, 1.1} : PathRange{0.0, 0.75};
    case TrajectoryShape::FigureEight:
      return loop ? PathRange{0.25, 1.1} : PathRange{0.25, 0.75};
  }
  return {0.0, 1.0};
}

// Unit-amplitude curve and its (unnormalized) tangent.
Vec3 curve(TrajectoryShape shape, double s) {
  switch (shape) {
    case TrajectoryShape::Line:
      return {s, 0.0, 0.0};
    case TrajectoryShape::Circle:
      return {std::cos(kTwoPi * s), std::sin(kTwoPi * s), 0.0};
    case TrajectoryShape::FigureEight:
      return {std::sin(kTwoPi * s), std::sin(kTwoPi * s) * std::cos(kTwoPi * s), 0.0};
  }
  return Vec3::Zero();
}

Vec3 tangent(TrajectoryShape shape, double s) {
  switch (shape) {
    case TrajectoryShape::Line:
      return {1.0, 0.0, 0.0};
    case TrajectoryShape::Circle:
      return {-std::sin(kTwoPi * s), std::cos(kTwoPi * s), 0.0};
    case TrajectoryShape::FigureEight:
      return {std::cos(kTwoPi * s), std::cos(2.0 * kTwoPi * s), 0.0};
  }
  return Vec3::UnitX();
}

double curve_length(TrajectoryShape shape, PathRange r) {
  constexpr int kSteps = 20000;
  double len = 0.0;
  Vec3 prev = curve(shape, r.s0);
  for (int i = 1; i <= kSteps; ++i) {
    const Vec3 cur = curve(shape, r.s0 + (r.s1 - r.s0) * i / kSteps);
    len += (cur - prev).norm();
    prev = cur;
  }
  return len;
}

// Camera looking along the path tangent with image y pointing down.
Mat3 look_along(const Vec3& forward) {
  const Vec3 z = forward.normalized();
  const Vec3 y(0.0, 0.0, -1.0);
  Mat3 r;
  r.col(0) = y.cross(z);
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

Vec3 pixel_ray_point(const Intrinsics& k, double u, double v, double z) {
  return {(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z};
}

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    return static_cast<std::size_t>(mix_seed(static_cast<std::uint64_t>(k.x), static_cast<std::uint64_t>(k.y),
                                             static_cast<std::uint64_t>(k.z)));
  }
};

class LandmarkGrid {
 public:
  LandmarkGrid(const std::vector<Vec3>& points, double cell) : cell_(cell) {
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(points[i])].push_back(static_cast<std::uint32_t>(i));
  }

  CellKey key(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)), static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }

  template <typename F>
  void for_cells_near(const Sim3& pose, double range, F&& visit) const {
    const Vec3 c = pose.translation();
    const CellKey lo = key(c - Vec3::Constant(range)), hi = key(c + Vec3::Constant(range));
    const Mat3 rt = pose.rotation().transpose();
    for (std::int64_t x = lo.x; x <= hi.x; ++x) {
      for (std::int64_t y = lo.y; y <= hi.y; ++y) {
        for (std::int64_t z = lo.z; z <= hi.z; ++z) {
          const auto it = cells_.find({x, y, z});
          if (it == cells_.end()) continue;
          const Vec3 bmin(x * cell_, y * cell_, z * cell_);
          const Vec3 bmax = bmin + Vec3::Constant(cell_);
          const Vec3 closest = c.cwiseMax(bmin).cwiseMin(bmax);
          if ((closest - c).norm() > range) continue;
          bool in_front = false;
          for (int corner = 0; corner < 8 && !in_front; ++corner) {
            const Vec3 p((corner & 1) ? bmax.x() : bmin.x(), (corner & 2) ? bmax.y() : bmin.y(),
                         (corner & 4) ? bmax.z() : bmin.z());
            in_front = (rt * (p - c)).z() > 0.0;
          }
          if (in_front) visit(it->second);
        }
      }
    }
  }

 private:
  double cell_;
  std::unordered_map<CellKey, std::vector<std::uint32_t>, CellHash> cells_;
};

Grid render_depth(const Sim3& pose, const Intrinsics& k, const std::vector<Vec3>& landmarks, const LandmarkGrid& grid,
                  double range) {
  Grid depth = Grid::Zero(k.height, k.width);
  const Mat3 rt = pose.rotation().transpose();
  const Vec3 t = pose.translation();
  grid.for_cells_near(pose, range, [&](const std::vector<std::uint32_t>& ids) {
    for (const auto id : ids) {
      const Vec3 cam = rt * (landmarks[id] - t);
      const double z = cam.z();
      if (!(z > 1e-9) || z > range) continue;
      const double u = k.fx * cam.x() / z + k.cx, v = k.fy * cam.y() / z + k.cy;
      const double iu = std::floor(u + 0.5), iv = std::floor(v + 0.5);
      if (iu < 0.0 || iv < 0.0 || iu >= k.width || iv >= k.height) continue;
      double& d = depth(static_cast<Eigen::Index>(iv), static_cast<Eigen::Index>(iu));
      if (d == 0.0 || z < d) d = z;
    }
  });
  return depth;
}

Sim3Tangent gaussian_tangent(Rng& rng, double sigma) {
  Vec7 v;
  for (int i = 0; i < 7; ++i) v(i) = rng.normal(0.0, sigma);
  return Sim3Tangent::from_vector(v);
}

Sim3Tangent scaled(const Sim3Tangent& t, double a) { return Sim3Tangent::from_vector(a * t.vector()); }

// Builds one chunk frame from the true pose and depth.
Frame make_frame(const Scene& scene, std::int64_t frame_id, const Sim3& chunk_from_world, const Sim3Tangent& xi,
                 double u, std::int64_t chunk_id, bool with_tokens) {
  const SceneSpec& spec = scene.spec;
  const auto f = static_cast<std::size_t>(frame_id);
  const Sim3 q = Sim3::exp(scaled(xi, u)) * chunk_from_world * scene.gt_poses[f];

  Frame frame;
  frame.frame_id = frame_id;
  frame.intrinsics = spec.camera;
  frame.pose = Sim3(1.0, q.rotation(), q.translation());
  frame.depth.values = scene.true_depth[f] * q.scale();
  frame.depth.confidence = Grid::Zero(spec.camera.height, spec.camera.width);

  Rng rng(mix_seed(spec.seed, kChunkNoise, static_cast<std::uint64_t>(chunk_id), static_cast<std::uint64_t>(frame_id)));
  for (Eigen::Index v = 0; v < frame.depth.values.rows(); ++v) {
    for (Eigen::Index c = 0; c < frame.depth.values.cols(); ++c) {
      // Fixed number of draws per pixel keeps streams aligned across settings.
      const double noise = rng.normal();
      const double outlier_draw = rng.uniform();
      const double offset = rng.uniform(1.0, 3.0);
      const double conf = rng.uniform();
      double& d = frame.depth.values(v, c);
      if (d == 0.0) continue;
      d = std::max(d + spec.depth_noise_sigma * noise, 1e-6);
      if (outlier_draw < spec.outlier_fraction) {
        d += offset;
        frame.depth.confidence(v, c) = 0.05 * conf;
      } else {
        frame.depth.confidence(v, c) = 0.8 + 0.4 * conf;
      }
    }
  }
  if (with_tokens) frame.tokens = scene.tokens[f];
  return frame;
}

void check(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidSpec, what);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  h = mix(h ^ a);
  h = mix(h ^ b);
  return mix(h ^ c);
}

std::string_view to_string(TrajectoryShape s) {
  switch (s) {
    case TrajectoryShape::Line:
      return "line";
    case TrajectoryShape::Circle:
      return "circle";
    case TrajectoryShape::FigureEight:
      return "figure-eight";
  }
  return "line";
}

TrajectoryShape parse_trajectory_shape(std::string_view name) {
  if (name == "line") return TrajectoryShape::Line;
  if (name == "circle") return TrajectoryShape::Circle;
  if (name == "figure-eight") return TrajectoryShape::FigureEight;
  throw Error(ErrorCode::InvalidSpec, "unknown trajectory shape '" + std::string(name) + "'");
}

void SceneSpec::validate() const {
  check(chunk_size >= 2 && overlap > 0 && overlap < chunk_size, "need 0 < overlap < chunk_size and chunk_size >= 2");
  check(n_frames >= chunk_size, "n_frames must be at least chunk_size");
  check(point_density > 0, "point_density must be positive");
  check(depth_noise_sigma >= 0.0 && drift_sigma >= 0.0 && token_noise_sigma >= 0.0, "sigmas must be non-negative");
  check(outlier_fraction >= 0.0 && outlier_fraction < 1.0, "outlier_fraction must lie in [0, 1)");
  check(token_dim >= 1 && tokens_per_frame >= 1, "token dimensions must be positive");
  check(frame_spacing > 0.0 && cell_size > 0.0, "frame_spacing and cell_size must be positive");
  check(near_depth > 0.0 && far_depth > near_depth, "need 0 < near_depth < far_depth");
  check(shared_strength >= 0.0 && shared_growth >= 0.0, "shared token strength must be non-negative");
  camera.validate();
}

namespace {

struct SpecField {
  const char* key;
  std::function<void(SceneSpec&, std::string_view)> set;
  std::function<std::string(const SceneSpec&)> get;
};

template <typename T>
SpecField number(const char* key, T SceneSpec::*m) {
  return {key,
          [m, key](SceneSpec& s, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) {
              s.*m = parse_real(v, key);
            } else {
              s.*m = static_cast<T>(parse_int(v, key));
            }
          },
          [m](const SceneSpec& s) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_real(s.*m);
            } else {
              return std::to_string(s.*m);
            }
          }};
}

template <typename T>
SpecField camera_field(const char* key, T Intrinsics::*m) {
  return {key,
          [m, key](SceneSpec& s, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) {
              s.camera.*m = parse_real(v, key);
            } else {
              s.camera.*m = static_cast<T>(parse_int(v, key));
            }
          },
          [m](const SceneSpec& s) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_real(s.camera.*m);
            } else {
              return std::to_string(s.camera.*m);
            }
          }};
}

const std::vector<SpecField>& spec_fields() {
  static const std::vector<SpecField> fields = {
      {"seed", [](SceneSpec& s, std::string_view v) { s.seed = static_cast<std::uint64_t>(parse_int(v, "seed")); },
       [](const SceneSpec& s) { return std::to_string(s.seed); }},
      number("n_frames", &SceneSpec::n_frames),
      {"shape", [](SceneSpec& s, std::string_view v) { s.shape = parse_trajectory_shape(trim(v)); },
       [](const SceneSpec& s) { return std::string(to_string(s.shape)); }},
      number("point_density", &SceneSpec::point_density),
      number("depth_noise_sigma", &SceneSpec::depth_noise_sigma),
      number("drift_sigma", &SceneSpec::drift_sigma),
      number("outlier_fraction", &SceneSpec::outlier_fraction),
      {"loop_closure", [](SceneSpec& s, std::string_view v) { s.loop_closure = parse_bool(v, "loop_closure"); },
       [](const SceneSpec& s) { return std::string(s.loop_closure ? "true" : "false"); }},
      number("chunk_size", &SceneSpec::chunk_size),
      number("overlap", &SceneSpec::overlap),
      number("token_dim", &SceneSpec::token_dim),
      number("tokens_per_frame", &SceneSpec::tokens_per_frame),
      number("token_noise_sigma", &SceneSpec::token_noise_sigma),
      number("shared_strength", &SceneSpec::shared_strength),
      number("shared_growth", &SceneSpec::shared_growth),
      number("frame_spacing", &SceneSpec::frame_spacing),
      number("cell_size", &SceneSpec::cell_size),
      camera_field("fx", &Intrinsics::fx),
      camera_field("fy", &Intrinsics::fy),
      camera_field("cx", &Intrinsics::cx),
      camera_field("cy", &Intrinsics::cy),
      camera_field("width", &Intrinsics::width),
      camera_field("height", &Intrinsics::height),
      number("near_depth", &SceneSpec::near_depth),
      number("far_depth", &SceneSpec::far_depth),
  };
  return fields;
}

}  // namespace

std::string scene_spec_to_text(const SceneSpec& spec) {
  std::string out;
  for (const auto& f : spec_fields()) out += std::string(f.key) + " = " + f.get(spec) + "\n";
  return out;
}

SceneSpec parse_scene_spec(const std::string& text) {
  SceneSpec spec;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    const std::string where = "scene spec line " + std::to_string(number);
    if (eq == std::string_view::npos) throw Error(ErrorCode::InvalidSpec, where + ": expected key = value");
    const std::string_view key = trim(t.substr(0, eq));
    const auto& fields = spec_fields();
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const SpecField& f) { return key == f.key; });
    if (it == fields.end()) throw Error(ErrorCode::InvalidSpec, where + ": unknown key '" + std::string(key) + "'");
    try {
      it->set(spec, trim(t.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidSpec, where + ": " + e.what());
    }
  }
  return spec;
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Scene scene;
  scene.spec = spec;
  const auto n = static_cast<std::size_t>(spec.n_frames);

  // Path, scaled so consecutive frames are about frame_spacing apart.
  const PathRange range = path_range(spec.shape, spec.loop_closure);
  const double amplitude = spec.frame_spacing * static_cast<double>(n - 1) / curve_length(spec.shape, range);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = range.s0 + (range.s1 - range.s0) * static_cast<double>(k) / static_cast<double>(n - 1);
    const Sim3 pose(1.0, look_along(tangent(spec.shape, s)), amplitude * curve(spec.shape, s));
    scene.gt_poses.push_back(pose);
    scene.gt_trajectory.push_back(static_cast<std::int64_t>(k), pose.rotation(), pose.translation());
  }

  // Landmarks spawned inside every frame's frustum.
  scene.landmarks.reserve(n * static_cast<std::size_t>(spec.point_density));
  const Intrinsics& cam = spec.camera;
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng(mix_seed(spec.seed, kLandmarks, k));
    for (int i = 0; i < spec.point_density; ++i) {
      const double u = rng.uniform(-0.5, cam.width - 0.5);
      const double v = rng.uniform(-0.5, cam.height - 0.5);
      const double z = rng.uniform(spec.near_depth, spec.far_depth);
      scene.landmarks.push_back(scene.gt_poses[k].apply(pixel_ray_point(cam, u, v, z)));
    }
  }

  const double render_range = 2.0 * spec.far_depth;
  const LandmarkGrid grid(scene.landmarks, 0.5 * spec.far_depth);
  scene.true_depth.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    scene.true_depth.push_back(render_depth(scene.gt_poses[k], cam, scene.landmarks, grid, render_range));
  }

  // Place cells and tokens.
  Rng shared_rng(mix_seed(spec.seed, kSharedDirection));
  Eigen::RowVectorXd shared(spec.token_dim);
  for (int i = 0; i < spec.token_dim; ++i) shared(i) = shared_rng.normal();
  shared.normalize();
  const double unit = std::sqrt(static_cast<double>(spec.token_dim));
  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> labels;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3 p = scene.gt_poses[k].translation();
    const auto cell = std::make_pair(static_cast<std::int64_t>(std::floor(p.x() / spec.cell_size + 0.5)),
                                     static_cast<std::int64_t>(std::floor(p.y() / spec.cell_size + 0.5)));
    const auto [it, inserted] = labels.try_emplace(cell, static_cast<std::int64_t>(labels.size()));
    scene.place_cluster.push_back(it->second);

    Rng centroid_rng(mix_seed(spec.seed, kPlaceCentroid, static_cast<std::uint64_t>(cell.first),
                              static_cast<std::uint64_t>(cell.second)));
    Rng noise_rng(mix_seed(spec.seed, kTokenNoise, k));
    const double progress = n > 1 ? static_cast<double>(k) / static_cast<double>(n - 1) : 0.0;
    const double strength = spec.shared_strength * (1.0 + spec.shared_growth * progress);
    PatchTokens t(spec.tokens_per_frame, spec.token_dim);
    for (int r = 0; r < spec.tokens_per_frame; ++r) {
      for (int c = 0; c < spec.token_dim; ++c) {
        t(r, c) = centroid_rng.normal() + unit * strength * shared(c) + spec.token_noise_sigma * noise_rng.normal();
      }
    }
    scene.tokens.push_back(std::move(t));
  }

  // Chunks.
  scene.chunk_ranges = chunk_indices(spec.n_frames, spec.chunk_size, spec.overlap);
  for (std::size_t t = 0; t < scene.chunk_ranges.size(); ++t) {
    const FrameRange r = scene.chunk_ranges[t];
    Rng drift_rng(mix_seed(spec.seed, kChunkDrift, t));
    const Sim3Tangent xi = gaussian_tangent(drift_rng, spec.drift_sigma);
    const Sim3 from_world = scene.gt_poses[static_cast<std::size_t>(r.begin)].inverse();
    ChunkArtifact chunk;
    chunk.chunk_id = static_cast<std::int64_t>(t);
    chunk.kind = ChunkKind::Temporal;
    for (std::int64_t f = r.begin; f < r.end; ++f) {
      const double u = static_cast<double>(f - r.begin) / static_cast<double>(r.size() - 1);
      chunk.frames.push_back(make_frame(scene, f, from_world, xi, u, chunk.chunk_id, true));
    }
    scene.chunks.push_back(std::move(chunk));
    scene.gt_chunk_to_world.push_back(from_world.inverse());
    scene.drift.push_back(xi);
  }
  return scene;
}

ChunkArtifact render_loop_chunk(const Scene& scene, const std::vector<std::int64_t>& frame_ids, std::int64_t chunk_id) {
  if (frame_ids.size() < 2) throw Error(ErrorCode::InvalidSpec, "loop chunk needs at least two frames");
  std::vector<std::int64_t> ids = frame_ids;
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end() || ids.front() < 0 ||
      ids.back() >= scene.spec.n_frames) {
    throw Error(ErrorCode::InvalidSpec, "loop chunk frame ids must be distinct and inside the sequence");
  }
  Rng drift_rng(mix_seed(scene.spec.seed, kLoopDrift, static_cast<std::uint64_t>(ids.front()),
                         static_cast<std::uint64_t>(ids.back()) * 0x10000ULL + ids.size()));
  const Sim3Tangent xi = gaussian_tangent(drift_rng, scene.spec.drift_sigma);
  const Sim3 from_world = scene.gt_poses[static_cast<std::size_t>(ids.front())].inverse();
  ChunkArtifact chunk;
  chunk.chunk_id = chunk_id;
  chunk.kind = ChunkKind::Loop;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(ids.size() - 1);
    chunk.frames.push_back(make_frame(scene, ids[i], from_world, xi, u, chunk_id, false));
  }
  return chunk;
}

CorrespondenceSet inject_outliers(const CorrespondenceSet& c, double fraction, double magnitude, std::uint64_t seed,
                                  std::vector<std::size_t>* displaced) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw Error(ErrorCode::InvalidSpec, "outlier fraction must lie in [0, 1)");
  CorrespondenceSet out = c;
  const std::size_t n = c.size();
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  Rng rng(mix_seed(seed, kOutliers));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  for (const auto i : idx) {
    Vec3 dir;
    do {
      dir = Vec3(rng.normal(), rng.normal(), rng.normal());
    } while (dir.norm() < 1e-12);
    out.dst[i] += magnitude * dir.normalized();
  }
  if (displaced) *displaced = std::move(idx);
  return out;
}

PlaceTokens generate_place_tokens(const PlaceTokenSpec& spec) {
  check(spec.n_places >= 2 && spec.n_frames >= 2 * spec.n_places, "need at least two frames per visit");
  check(spec.token_dim >= 1 && spec.tokens_per_frame >= 1, "token dimensions must be positive");
  check(spec.shared_channels >= 1 && spec.shared_channels <= spec.token_dim, "shared_channels must be in [1, token_dim]");
  check(spec.base_sigma > 0.0 && spec.place_offset >= 0.0 && spec.noise_sigma >= 0.0 && spec.shared_strength >= 0.0,
        "token magnitudes must be non-negative");
  const int visits = 2 * spec.n_places;
  const std::int64_t per_visit = spec.n_frames / visits;

  Rng base_rng(mix_seed(spec.seed, kPlaceCentroid));
  Eigen::MatrixXd base(spec.tokens_per_frame, spec.token_dim);
  for (Eigen::Index i = 0; i < base.size(); ++i) base.data()[i] = base_rng.normal(0.0, spec.base_sigma);
  std::vector<Eigen::MatrixXd> centroids;
  for (int p = 0; p < spec.n_places; ++p) {
    Rng rng(mix_seed(spec.seed, kPlaceCentroid, static_cast<std::uint64_t>(p) + 1));
    Eigen::MatrixXd c = base;
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] += rng.normal(0.0, spec.place_offset * spec.base_sigma);
    centroids.push_back(std::move(c));
  }
  Rng shared_rng(mix_seed(spec.seed, kSharedDirection));
  std::vector<int> channels(static_cast<std::size_t>(spec.token_dim));
  std::iota(channels.begin(), channels.end(), 0);
  for (std::size_t k = channels.size(); k > 1; --k) std::swap(channels[k - 1], channels[shared_rng.index(k)]);
  Eigen::RowVectorXd shared = Eigen::RowVectorXd::Zero(spec.token_dim);
  for (int k = 0; k < spec.shared_channels; ++k) shared(channels[static_cast<std::size_t>(k)]) = shared_rng.normal();
  shared.normalize();
  const double unit = spec.base_sigma * std::sqrt(static_cast<double>(spec.token_dim));

  PlaceTokens out;
  for (std::int64_t f = 0; f < spec.n_frames; ++f) {
    const auto visit = static_cast<int>(std::min<std::int64_t>(f / per_visit, visits - 1));
    const int place = visit % spec.n_places;
    const double progress = static_cast<double>(f) / static_cast<double>(spec.n_frames - 1);
    const double strength = spec.shared_strength * progress;
    Rng rng(mix_seed(spec.seed, kTokenNoise, static_cast<std::uint64_t>(f)));
    PatchTokens t = centroids[static_cast<std::size_t>(place)];
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) += unit * strength * shared(c) + rng.normal(0.0, spec.noise_sigma);
    }
    out.tokens.push_back(std::move(t));
    out.place.push_back(place);
  }
  return out;
}

}  // namespace chunkstitch
