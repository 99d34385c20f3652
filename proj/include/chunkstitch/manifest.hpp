#pragma once

#include <string>
#include <vector>

#include "chunkstitch/chunk.hpp"
#include "chunkstitch/tensor_io.hpp"

namespace chunkstitch {

/// Text description of one chunk, `key = value` per line:
///
///   chunk_id   = 3
///   kind       = temporal | loop
///   frame_ids  = 135 136 ...
///   depth      = <file>   [F, H, W]
///   confidence = <file>   [F, H, W]
///   intrinsics = <file>   [F, 3, 3]
///   extrinsics = <file>   [F, 3, 4] camera-to-chunk [R | t]
///   tokens     = <file>   [F, K, d]   (optional)
///
/// File paths are relative to the manifest's directory.
struct ChunkManifest {
  std::int64_t chunk_id = 0;
  ChunkKind kind = ChunkKind::Temporal;
  std::vector<std::int64_t> frame_ids;
  std::string depth, confidence, intrinsics, extrinsics, tokens;

  static ChunkManifest parse(const std::string& text, const std::string& source);
  std::string to_text() const;
};

inline constexpr const char* kManifestExtension = ".manifest";

/// Loads a manifest and its tensors. Throws MissingFile (naming the path),
/// ParseError, ShapeMismatch or InvalidSpec.
ChunkArtifact read_chunk(const std::string& manifest_path);

/// Writes `<stem>.manifest` plus one tensor file per field into `dir` and
/// returns the manifest path.
std::string write_chunk(const std::string& dir, const ChunkArtifact& chunk, DType dtype = DType::Float64);

/// Every *.manifest directly inside `dir`, ordered by chunk id. Throws
/// MissingFile when the directory is absent or holds no manifests.
std::vector<ChunkArtifact> read_manifest_dir(const std::string& dir);

/// Same, but returns an empty list when the directory does not exist.
std::vector<ChunkArtifact> read_optional_manifest_dir(const std::string& dir);

}  // namespace chunkstitch
