#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "chunkstitch/trajectory.hpp"

namespace chunkstitch {

enum class TrajectoryFormat { Kitti, Tum };

std::string_view to_string(TrajectoryFormat f);
/// Throws InvalidConfig.
TrajectoryFormat parse_trajectory_format(std::string_view name);

/// KITTI: one line per frame, the 12 entries of the row-major 3x4 [R | t].
/// TUM: "frame_id tx ty tz qx qy qz qw" with qw >= 0. Reals carry 17
/// significant digits and never print as -0.
std::string format_trajectory(const TrajectoryEstimate& t, TrajectoryFormat f);

/// KITTI lines get frame ids 0, 1, 2, ...; TUM timestamps must be integral.
/// Blank lines and '#' comments are skipped. Throws ParseError naming
/// `source` and the line.
TrajectoryEstimate parse_trajectory(const std::string& text, TrajectoryFormat f, const std::string& source = "input");

void write_trajectory(const std::string& path, const TrajectoryEstimate& t, TrajectoryFormat f);
/// Throws MissingFile or ParseError.
TrajectoryEstimate read_trajectory(const std::string& path, TrajectoryFormat f);

/// Format from the file name: "*.tum" or "*.tum.txt" is TUM, anything else KITTI.
TrajectoryFormat guess_trajectory_format(const std::string& path);

}  // namespace chunkstitch
