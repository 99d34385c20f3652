#include "chunkstitch/ply.hpp"

#include <sstream>

#include "binary.hpp"
#include "chunkstitch/error.hpp"
#include "chunkstitch/text.hpp"

namespace chunkstitch {

std::vector<std::uint8_t> encode_ply(const PointCloud& cloud) {
  if (cloud.points.empty()) throw Error(ErrorCode::EmptyCloud, "cannot write a PLY file without points");
  const bool rgb = !cloud.colors.empty();
  if (rgb && cloud.colors.size() != cloud.points.size()) {
    throw Error(ErrorCode::ShapeMismatch, "colour count differs from point count");
  }
  std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(cloud.points.size()) +
                       "\nproperty float x\nproperty float y\nproperty float z\n";
  if (rgb) header += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  header += "end_header\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + cloud.points.size() * (rgb ? 15 : 12));
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    for (int a = 0; a < 3; ++a) detail::put_le(out, static_cast<float>(cloud.points[i](a)));
    if (rgb) out.insert(out.end(), cloud.colors[i].begin(), cloud.colors[i].end());
  }
  return out;
}

void write_ply(const std::string& path, const PointCloud& cloud) { detail::write_file_bytes(path, encode_ply(cloud)); }

PointCloud decode_ply(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  const std::string marker = "end_header\n";
  const std::string head(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(bytes.size(), 4096)));
  const auto end = head.find(marker);
  if (head.rfind("ply\n", 0) != 0 || end == std::string::npos) {
    throw Error(ErrorCode::ParseError, "'" + source + "' is not a PLY file");
  }
  std::istringstream in(head.substr(0, end));
  std::string line;
  std::size_t count = 0;
  std::vector<std::string> props;
  bool format_ok = false, has_vertex = false;
  while (std::getline(in, line)) {
    const auto f = split_fields(line);
    if (f.empty()) continue;
    if (f[0] == "format") {
      format_ok = f.size() == 3 && f[1] == "binary_little_endian" && f[2] == "1.0";
    } else if (f[0] == "element") {
      if (f.size() != 3 || f[1] != "vertex" || has_vertex) {
        throw Error(ErrorCode::ParseError, "'" + source + "': only a single vertex element is supported");
      }
      count = static_cast<std::size_t>(parse_int(f[2], "vertex count"));
      has_vertex = true;
    } else if (f[0] == "property") {
      if (f.size() != 3) throw Error(ErrorCode::ParseError, "'" + source + "': malformed property line");
      props.push_back(std::string(f[1]) + " " + std::string(f[2]));
    }
  }
  const std::vector<std::string> xyz = {"float x", "float y", "float z"};
  std::vector<std::string> xyzrgb = xyz;
  xyzrgb.insert(xyzrgb.end(), {"uchar red", "uchar green", "uchar blue"});
  const bool rgb = props == xyzrgb;
  if (!format_ok || !has_vertex || !(rgb || props == xyz)) {
    throw Error(ErrorCode::ParseError, "'" + source + "' uses an unsupported PLY layout");
  }
  const std::size_t offset = end + marker.size();
  const std::size_t record = rgb ? 15 : 12;
  if ((bytes.size() - offset) / record < count || bytes.size() - offset != count * record) {
    throw Error(ErrorCode::TruncatedPayload, "'" + source + "' payload does not hold " + std::to_string(count) + " vertices");
  }
  PointCloud cloud;
  const std::uint8_t* p = bytes.data() + offset;
  for (std::size_t i = 0; i < count; ++i, p += record) {
    cloud.points.emplace_back(detail::get_le<float>(p), detail::get_le<float>(p + 4), detail::get_le<float>(p + 8));
    if (rgb) cloud.colors.push_back({p[12], p[13], p[14]});
  }
  return cloud;
}

PointCloud read_ply(const std::string& path) { return decode_ply(detail::read_file_bytes(path), path); }

}  // namespace chunkstitch
