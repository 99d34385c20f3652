#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "chunkstitch/sim3.hpp"

namespace chunkstitch {

using Rgb = std::array<std::uint8_t, 3>;

struct PointCloud {
  std::vector<Vec3> points;
  /// Empty, or one colour per point.
  std::vector<Rgb> colors;
};

/// Binary little-endian PLY with float x, y, z and, when colours are
/// present, uchar red, green, blue. Throws EmptyCloud or ShapeMismatch.
std::vector<std::uint8_t> encode_ply(const PointCloud& cloud);
void write_ply(const std::string& path, const PointCloud& cloud);

/// Reads files in the layout encode_ply produces. Throws MissingFile,
/// ParseError or TruncatedPayload.
PointCloud decode_ply(const std::vector<std::uint8_t>& bytes, const std::string& source);
PointCloud read_ply(const std::string& path);

}  // namespace chunkstitch
