#include "chunkstitch/trajectory_io.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <sstream>

#include "binary.hpp"
#include "chunkstitch/error.hpp"
#include "chunkstitch/text.hpp"

namespace chunkstitch {

namespace {

constexpr int kDigits = 17;

}  // namespace

std::string_view to_string(TrajectoryFormat f) { return f == TrajectoryFormat::Kitti ? "kitti" : "tum"; }

TrajectoryFormat parse_trajectory_format(std::string_view name) {
  if (name == "kitti") return TrajectoryFormat::Kitti;
  if (name == "tum") return TrajectoryFormat::Tum;
  throw Error(ErrorCode::InvalidConfig, "unknown trajectory format '" + std::string(name) + "'");
}

TrajectoryFormat guess_trajectory_format(const std::string& path) {
  auto ends_with = [&](std::string_view s) {
    return path.size() >= s.size() && path.compare(path.size() - s.size(), s.size(), s) == 0;
  };
  return ends_with(".tum") || ends_with(".tum.txt") ? TrajectoryFormat::Tum : TrajectoryFormat::Kitti;
}

std::string format_trajectory(const TrajectoryEstimate& t, TrajectoryFormat f) {
  t.validate();
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Mat3& r = t.rotations[i];
    const Vec3& p = t.positions[i];
    std::vector<double> values;
    if (f == TrajectoryFormat::Kitti) {
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) values.push_back(r(a, b));
        values.push_back(p(a));
      }
    } else {
      Eigen::Quaterniond q(r);
      q.normalize();
      if (q.w() < 0.0) q.coeffs() = -q.coeffs();
      values = {p.x(), p.y(), p.z(), q.x(), q.y(), q.z(), q.w()};
      out += std::to_string(t.frame_ids[i]);
    }
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (k > 0 || f == TrajectoryFormat::Tum) out += ' ';
      out += format_real(values[k], kDigits);
    }
    out += '\n';
  }
  return out;
}

TrajectoryEstimate parse_trajectory(const std::string& text, TrajectoryFormat f, const std::string& source) {
  TrajectoryEstimate t;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  std::int64_t next_id = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const std::string where = "'" + source + "' line " + std::to_string(number);
    const auto fields = split_fields(s);
    const std::size_t expected = f == TrajectoryFormat::Kitti ? 12 : 8;
    if (fields.size() != expected) {
      throw Error(ErrorCode::ParseError,
                  where + ": expected " + std::to_string(expected) + " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> v;
    try {
      for (const auto field : fields) v.push_back(parse_real(field, "trajectory value"));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
    if (f == TrajectoryFormat::Kitti) {
      Mat3 r;
      Vec3 p;
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) r(a, b) = v[static_cast<std::size_t>(4 * a + b)];
        p(a) = v[static_cast<std::size_t>(4 * a + 3)];
      }
      t.push_back(next_id++, r, p);
    } else {
      if (v[0] != std::floor(v[0])) throw Error(ErrorCode::ParseError, where + ": timestamp is not a frame id");
      Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
      if (q.norm() < 1e-12) throw Error(ErrorCode::ParseError, where + ": zero quaternion");
      q.normalize();
      t.push_back(static_cast<std::int64_t>(v[0]), q.toRotationMatrix(), Vec3(v[1], v[2], v[3]));
    }
  }
  try {
    t.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, "'" + source + "': " + e.what());
  }
  return t;
}

void write_trajectory(const std::string& path, const TrajectoryEstimate& t, TrajectoryFormat f) {
  detail::write_file_text(path, format_trajectory(t, f));
}

TrajectoryEstimate read_trajectory(const std::string& path, TrajectoryFormat f) {
  return parse_trajectory(detail::read_file_text(path), f, path);
}

}  // namespace chunkstitch
