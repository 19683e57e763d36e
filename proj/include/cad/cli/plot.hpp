#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cad/core/geometry.hpp"

namespace cad::cli {

struct PlotInput {
  PolarGridSpec grid;
  CadProfile profile;
  std::optional<CadProfile> ground_truth;
  // In current-frame coordinates; frame_index gives the age.
  std::vector<PointFrame> frames;
};

// Top-down polar figure: the accessible region filled, the ground truth as
// an outline, points coloured by frame age. Output depends only on the input.
std::string render_svg(const PlotInput& in);

}  // namespace cad::cli
