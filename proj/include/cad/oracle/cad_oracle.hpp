#pragma once

#include <span>
#include <vector>

#include "cad/core/geometry.hpp"
#include "cad/sim/scene.hpp"

namespace cad::oracle {

struct TraversabilityRules {
  double h_obs = 0.15;
  double h_neg = 0.15;
  double g_max = 0.6;
  double ground_window = 0.08;
  // Solids entirely above ground + clearance do not block. With
  // vehicle_clearance <= h_obs no solid blocks.
  double vehicle_clearance = 1.5;
  // Points within this radius seed the ground reference of the point labeler.
  double seed_radius = 4.0;
  // Supported pillars in the running-median ground estimate.
  int reference_window = 5;

  // Throws ConfigError.
  void validate() const;
};

// Exact per-direction result: the continuous distance to the first
// violation inside each sector (infinity when none) and the id of the
// surface or solid causing it (-1 when none).
struct SceneLabel {
  CadProfile profile;
  std::vector<double> distance;
  std::vector<int> terminator;
};

// ego is the sensor pose in the world; directions are sensor-frame sectors.
// Throws EgoBlocked when the ego position itself violates the rules.
SceneLabel label_scene(const sim::SceneSpec& scene, const Pose& ego, const PolarGridSpec& spec,
                       const TraversabilityRules& rules, double time = 0.0);
CadProfile label_from_scene(const sim::SceneSpec& scene, const Pose& ego, const PolarGridSpec& spec,
                            const TraversabilityRules& rules, double time = 0.0);

// Frames must already be in current-frame coordinates (frame_index 0 is the
// current frame). Dynamic-tagged points from historical frames are ignored.
// Throws NoGroundReference when no points fall near the ego.
CadProfile label_from_points(std::span<const PointFrame> frames, const PolarGridSpec& spec,
                             const TraversabilityRules& rules);

// Points per pillar, indexed by PolarGridSpec::pillar_id.
std::vector<int> pillar_point_counts(std::span<const PointFrame> frames, const PolarGridSpec& spec);

// True when every bin 0..depth of direction phi holds at least one point.
bool direction_covered(const std::vector<int>& counts, const PolarGridSpec& spec, int phi, int depth);

}  // namespace cad::oracle
