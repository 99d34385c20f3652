#include "chunkstitch/manifest.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "binary.hpp"
#include "chunkstitch/error.hpp"
#include "chunkstitch/text.hpp"

namespace chunkstitch {

namespace fs = std::filesystem;

namespace {

std::string kind_name(ChunkKind k) { return k == ChunkKind::Temporal ? "temporal" : "loop"; }

std::string stem_for(const ChunkArtifact& c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06lld", c.kind == ChunkKind::Temporal ? "chunk" : "loop",
                static_cast<long long>(c.chunk_id));
  return buf;
}

void expect_dims(const Tensor& t, const std::vector<std::uint64_t>& dims, const std::string& path) {
  if (t.dims != dims) {
    std::string want, got;
    for (const auto d : dims) want += (want.empty() ? "" : ",") + std::to_string(d);
    for (const auto d : t.dims) got += (got.empty() ? "" : ",") + std::to_string(d);
    throw Error(ErrorCode::ShapeMismatch, "'" + path + "' has dims [" + got + "], expected [" + want + "]");
  }
}

// Nearest rotation when the stored block is only approximately orthonormal
// (single-precision files); exact rotations pass through untouched.
Mat3 as_rotation(const Mat3& m, const std::string& path) {
  if ((m.transpose() * m - Mat3::Identity()).norm() <= 1e-12 && m.determinant() > 0.0) return m;
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (std::abs(sv(0) - 1.0) > 1e-3 || std::abs(sv(2) - 1.0) > 1e-3 || m.determinant() <= 0.0) {
    throw Error(ErrorCode::InvalidSpec, "'" + path + "' holds an extrinsic block that is not a rotation");
  }
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace

ChunkManifest ChunkManifest::parse(const std::string& text, const std::string& source) {
  ChunkManifest m;
  bool has_id = false, has_kind = false, has_frames = false;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    const std::string where = "'" + source + "' line " + std::to_string(number);
    if (eq == std::string_view::npos) throw Error(ErrorCode::ParseError, where + ": expected key = value");
    const std::string key(trim(t.substr(0, eq)));
    const std::string_view value = trim(t.substr(eq + 1));
    try {
      if (key == "chunk_id") {
        m.chunk_id = parse_int(value, key);
        has_id = true;
      } else if (key == "kind") {
        if (value == "temporal") {
          m.kind = ChunkKind::Temporal;
        } else if (value == "loop") {
          m.kind = ChunkKind::Loop;
        } else {
          throw Error(ErrorCode::ParseError, "kind must be temporal or loop");
        }
        has_kind = true;
      } else if (key == "frame_ids") {
        for (const auto f : split_fields(value)) m.frame_ids.push_back(parse_int(f, key));
        has_frames = true;
      } else if (key == "depth") {
        m.depth = value;
      } else if (key == "confidence") {
        m.confidence = value;
      } else if (key == "intrinsics") {
        m.intrinsics = value;
      } else if (key == "extrinsics") {
        m.extrinsics = value;
      } else if (key == "tokens") {
        m.tokens = value;
      } else {
        throw Error(ErrorCode::ParseError, "unknown key '" + key + "'");
      }
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
  }
  auto missing = [&](bool ok, const char* key) {
    if (!ok) throw Error(ErrorCode::ParseError, "'" + source + "' lacks '" + key + "'");
  };
  missing(has_id, "chunk_id");
  missing(has_kind, "kind");
  missing(has_frames && !m.frame_ids.empty(), "frame_ids");
  missing(!m.depth.empty(), "depth");
  missing(!m.confidence.empty(), "confidence");
  missing(!m.intrinsics.empty(), "intrinsics");
  missing(!m.extrinsics.empty(), "extrinsics");
  return m;
}

std::string ChunkManifest::to_text() const {
  std::string out = "chunk_id = " + std::to_string(chunk_id) + "\nkind = " + kind_name(kind) + "\nframe_ids =";
  for (const auto f : frame_ids) out += " " + std::to_string(f);
  out += "\ndepth = " + depth + "\nconfidence = " + confidence + "\nintrinsics = " + intrinsics +
         "\nextrinsics = " + extrinsics + "\n";
  if (!tokens.empty()) out += "tokens = " + tokens + "\n";
  return out;
}

ChunkArtifact read_chunk(const std::string& manifest_path) {
  const ChunkManifest m = ChunkManifest::parse(detail::read_file_text(manifest_path), manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  auto load = [&](const std::string& rel) {
    const std::string path = (base / rel).string();
    if (!fs::exists(path)) {
      throw Error(ErrorCode::MissingFile, "'" + path + "' referenced by '" + manifest_path + "' does not exist");
    }
    return std::make_pair(read_tensor(path), path);
  };
  const auto f = static_cast<std::uint64_t>(m.frame_ids.size());
  const auto [depth, depth_path] = load(m.depth);
  if (depth.dims.size() != 3 || depth.dims[0] != f) {
    throw Error(ErrorCode::ShapeMismatch, "'" + depth_path + "' must have dims [" + std::to_string(f) + ", H, W]");
  }
  const std::uint64_t h = depth.dims[1], w = depth.dims[2];
  const auto [conf, conf_path] = load(m.confidence);
  expect_dims(conf, {f, h, w}, conf_path);
  const auto [intr, intr_path] = load(m.intrinsics);
  expect_dims(intr, {f, 3, 3}, intr_path);
  const auto [extr, extr_path] = load(m.extrinsics);
  expect_dims(extr, {f, 3, 4}, extr_path);

  const auto dv = depth.to_doubles(), cv = conf.to_doubles(), iv = intr.to_doubles(), ev = extr.to_doubles();
  std::vector<double> tv;
  std::uint64_t k = 0, d = 0;
  if (!m.tokens.empty()) {
    const auto [tok, tok_path] = load(m.tokens);
    if (tok.dims.size() != 3 || tok.dims[0] != f) {
      throw Error(ErrorCode::ShapeMismatch, "'" + tok_path + "' must have dims [" + std::to_string(f) + ", K, d]");
    }
    k = tok.dims[1];
    d = tok.dims[2];
    tv = tok.to_doubles();
  }

  ChunkArtifact chunk;
  chunk.chunk_id = m.chunk_id;
  chunk.kind = m.kind;
  const std::size_t hw = static_cast<std::size_t>(h * w);
  for (std::size_t i = 0; i < m.frame_ids.size(); ++i) {
    Frame frame;
    frame.frame_id = m.frame_ids[i];
    Mat3 kmat, r;
    Vec3 t;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        kmat(a, b) = iv[9 * i + static_cast<std::size_t>(3 * a + b)];
        r(a, b) = ev[12 * i + static_cast<std::size_t>(4 * a + b)];
      }
      t(a) = ev[12 * i + static_cast<std::size_t>(4 * a + 3)];
    }
    frame.intrinsics = Intrinsics::from_matrix(kmat, static_cast<int>(w), static_cast<int>(h));
    frame.pose = Sim3(1.0, as_rotation(r, extr_path), t);
    frame.depth.values = Eigen::Map<const Grid>(dv.data() + i * hw, static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w));
    frame.depth.confidence =
        Eigen::Map<const Grid>(cv.data() + i * hw, static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w));
    if (!tv.empty()) {
      frame.tokens = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          tv.data() + i * static_cast<std::size_t>(k * d), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
    }
    chunk.frames.push_back(std::move(frame));
  }
  try {
    chunk.validate();
  } catch (const Error& e) {
    throw Error(e.code(), "'" + manifest_path + "': " + e.what());
  }
  return chunk;
}

std::string write_chunk(const std::string& dir, const ChunkArtifact& chunk, DType dtype) {
  if (chunk.frames.empty()) throw Error(ErrorCode::InvalidSpec, "cannot write an empty chunk");
  fs::create_directories(dir);
  const std::string stem = stem_for(chunk);
  const auto f = static_cast<std::uint64_t>(chunk.frames.size());
  const auto h = static_cast<std::uint64_t>(chunk.frames[0].depth.height());
  const auto w = static_cast<std::uint64_t>(chunk.frames[0].depth.width());

  std::vector<double> depth, conf, intr, extr, tokens;
  const Eigen::Index k = chunk.frames[0].tokens.rows(), d = chunk.frames[0].tokens.cols();
  const bool with_tokens = chunk.frames[0].tokens.size() > 0;
  ChunkManifest m;
  m.chunk_id = chunk.chunk_id;
  m.kind = chunk.kind;
  for (const auto& frame : chunk.frames) {
    m.frame_ids.push_back(frame.frame_id);
    if (static_cast<std::uint64_t>(frame.depth.height()) != h || static_cast<std::uint64_t>(frame.depth.width()) != w ||
        frame.depth.confidence.rows() != frame.depth.values.rows() ||
        frame.depth.confidence.cols() != frame.depth.values.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "frames of chunk " + std::to_string(chunk.chunk_id) + " differ in size");
    }
    depth.insert(depth.end(), frame.depth.values.data(), frame.depth.values.data() + frame.depth.values.size());
    conf.insert(conf.end(), frame.depth.confidence.data(), frame.depth.confidence.data() + frame.depth.confidence.size());
    const Mat3 km = frame.intrinsics.matrix();
    const Mat4 pm = frame.pose.matrix();
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) intr.push_back(km(a, b));
      for (int b = 0; b < 4; ++b) extr.push_back(pm(a, b));
    }
    if (with_tokens) {
      if (frame.tokens.rows() != k || frame.tokens.cols() != d) {
        throw Error(ErrorCode::ShapeMismatch, "token shapes differ in chunk " + std::to_string(chunk.chunk_id));
      }
      for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) tokens.push_back(frame.tokens(r, c));
      }
    }
  }
  auto put = [&](const std::string& suffix, std::vector<std::uint64_t> dims, const std::vector<double>& values) {
    const std::string name = stem + "." + suffix + ".cst";
    write_tensor((fs::path(dir) / name).string(), Tensor::from_doubles(dtype, std::move(dims), values));
    return name;
  };
  m.depth = put("depth", {f, h, w}, depth);
  m.confidence = put("confidence", {f, h, w}, conf);
  m.intrinsics = put("intrinsics", {f, 3, 3}, intr);
  m.extrinsics = put("extrinsics", {f, 3, 4}, extr);
  if (with_tokens) m.tokens = put("tokens", {f, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(d)}, tokens);
  const std::string path = (fs::path(dir) / (stem + kManifestExtension)).string();
  detail::write_file_text(path, m.to_text());
  return path;
}

std::vector<ChunkArtifact> read_optional_manifest_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) return {};
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == kManifestExtension) paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<ChunkArtifact> chunks;
  for (const auto& p : paths) chunks.push_back(read_chunk(p));
  std::stable_sort(chunks.begin(), chunks.end(),
                   [](const ChunkArtifact& a, const ChunkArtifact& b) { return a.chunk_id < b.chunk_id; });
  return chunks;
}

std::vector<ChunkArtifact> read_manifest_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingFile, "manifest directory '" + dir + "' does not exist");
  auto chunks = read_optional_manifest_dir(dir);
  if (chunks.empty()) throw Error(ErrorCode::MissingFile, "no *.manifest files in '" + dir + "'");
  return chunks;
}

}  // namespace chunkstitch
