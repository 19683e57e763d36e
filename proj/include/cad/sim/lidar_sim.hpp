#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cad/core/geometry.hpp"
#include "cad/core/sample.hpp"
#include "cad/sim/scene.hpp"

namespace cad::sim {

struct LidarModel {
  std::vector<double> vertical_deg;  // one entry per channel, strictly increasing
  double azimuth_step_deg = 1.0;
  double max_range = 100.0;
  double mount_height = 0.8;
  double noise_sigma = 0.01;

  // 16 channels, -15..15 degrees in 2 degree steps.
  static LidarModel vlp16();
  // Denser beam pattern used to build reference aggregates.
  static LidarModel dense(int channels, double lowest_deg, double highest_deg, double azimuth_step_deg);
  // Downward beams placed so flat-ground rings are `ground_spacing` apart out
  // to `ground_radius`, plus 1 degree steps up to +15 degrees.
  static LidarModel survey(double ground_spacing, double ground_radius, double azimuth_step_deg,
                           double mount_height = 0.8);

  int channels() const { return static_cast<int>(vertical_deg.size()); }
  int azimuth_steps() const;
  // Throws InvalidArgument.
  void validate() const;
};

// Sensor pose of an ego standing at (x, y, yaw) on flat ground height 0.
Pose sensor_pose(const LidarModel& lidar, double x, double y, double yaw);

// Nearest analytic hit along one ray within max_range.
struct RayHit {
  double range = 0;
  int object_id = -1;
  bool dynamic = false;
};
std::optional<RayHit> cast_ray(const SceneSpec& scene, const Vector3& origin, const Vector3& direction, double time,
                double max_range);

// One scan from a sensor at the given world pose. Points are in the sensor
// frame, tagged with the id of the surface they came from.
PointFrame raycast_scan(const SceneSpec& scene, const LidarModel& lidar, const Pose& pose, double time,
                        std::uint64_t seed);

struct SequenceSpec {
  int f = 2;
  double period = 0.5;
  double t0 = 0.0;
  Trajectory ego;

  // Ego driving along +x at constant speed, reaching the origin at t0.
  static SequenceSpec straight(int f, double period, double speed);
  double time_of(int k) const { return t0 - k * period; }
  void validate() const;
};

// f+1 frames at t0 - k * period, current first, with absolute sensor poses.
// Throws TrajectoryOutOfRange when the ego or an actor is undefined at a frame time.
Sample generate_sequence(const SceneSpec& scene, const SequenceSpec& seq, const LidarModel& lidar,
                         std::uint64_t seed);

// True when a sensor can stand at (x, y): ground at the reference height and
// no static solid within `margin`.
bool viewpoint_clear(const SceneSpec& scene, double x, double y, double ground, double margin = 0.2);

// Scans from the ego and from `per_ring` viewpoints on each ring radius around
// it (blocked viewpoints skipped), all expressed in the ego's sensor frame.
// Static scenes only; actors are evaluated at `time`.
std::vector<PointFrame> survey_scans(const SceneSpec& scene, const LidarModel& lidar, const Pose& ego,
                                     const std::vector<double>& radii, int per_ring, double time,
                                     std::uint64_t seed);

struct CountRange {
  int lo = 0, hi = 0;
};

// Object count ranges for the random scene generator. Placement stays within
// `radius` of the ego start.
struct DifficultyProfile {
  std::string name = "desk";
  CountRange boxes{1, 3};
  CountRange cylinders{1, 3};
  CountRange pits{0, 2};
  CountRange curbs{0, 1};
  CountRange actors{0, 1};
  double cliff_probability = 0.0;
  double radius = 11.0;
  // Clearance kept around the ego start and along its past path.
  double ego_clearance = 1.0;
  // Distance behind the origin the ego travelled over the sequence.
  double path_length = 1.5;

  static DifficultyProfile bare();
  static DifficultyProfile desk();
  static DifficultyProfile dynamic();
  static DifficultyProfile dense();
  // Throws ConfigError for unknown names.
  static DifficultyProfile named(const std::string& name);

  void validate() const;
};

// Deterministic per seed. Throws PlacementFailure after bounded rejection sampling.
SceneSpec sample_random_scene(std::uint64_t seed, const DifficultyProfile& profile);

}  // namespace cad::sim
