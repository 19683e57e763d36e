#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cad/core/geometry.hpp"

namespace cad {

// One multi-frame input in memory. frames[0] is the current frame; every
// frame carries its absolute sensor pose and sensor-frame points.
struct Sample {
  std::string id;
  std::vector<PointFrame> frames;
  std::optional<CadProfile> label;

  int history() const { return static_cast<int>(frames.size()) - 1; }

  // All frames re-expressed in the current frame's coordinates.
  std::vector<PointFrame> aligned() const;
};

}  // namespace cad
