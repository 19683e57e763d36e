#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cad/core/geometry.hpp"

namespace cad::sim {

// Rectangle in the ground plane: centre, half extents along its own axes,
// and rotation about +z.
struct OrientedRect {
  double cx = 0, cy = 0;
  double half_x = 0.5, half_y = 0.5;
  double yaw = 0;

  bool contains(double x, double y) const;
  std::pair<double, double> to_local(double x, double y) const;
  std::vector<Eigen::Vector2d> corners() const;  // counter-clockwise
  double bounding_radius() const;
};

// Entry and exit parameters of the 2-D ray o + s d against a shape, s >= 0.
struct Span2 {
  double enter = 0, exit = 0;
};
std::optional<Span2> ray_rect(const Eigen::Vector2d& o, const Eigen::Vector2d& d, const OrientedRect& r);
std::optional<Span2> ray_circle(const Eigen::Vector2d& o, const Eigen::Vector2d& d, const Eigen::Vector2d& c,
                                double radius);

// Flat raised ground area (sidewalk, platform).
struct GroundPatch {
  int id = 0;
  OrientedRect area;
  double height = 0;
};

// Rectangular depression below the surrounding ground.
struct Pit {
  int id = 0;
  OrientedRect area;
  double depth = 0.5;
};

struct Box {
  int id = 0;
  OrientedRect footprint;
  double z_bottom = 0;
  double height = 1;
};

// Vertical cylinder; the thin-obstacle primitive.
struct Cylinder {
  int id = 0;
  double cx = 0, cy = 0;
  double radius = 0.1;
  double z_bottom = 0;
  double height = 1.5;
};

struct Waypoint {
  double time = 0;
  double x = 0, y = 0, yaw = 0;
};

// Piecewise-linear planar motion. Yaw is interpolated linearly.
struct Trajectory {
  std::vector<Waypoint> waypoints;

  bool covers(double t) const;
  // Throws TrajectoryOutOfRange outside the waypoint time span.
  Waypoint at(double t) const;
};

enum class ActorShape { Box, Cylinder };

// Moving solid. For the cylinder shape only half_x is used, as the radius.
struct Actor {
  int id = 0;
  ActorShape shape = ActorShape::Cylinder;
  double half_x = 0.3, half_y = 0.3;
  double z_bottom = 0;
  double height = 1.7;
  Trajectory trajectory;

  Box box_at(double t) const;
  Cylinder cylinder_at(double t) const;
};

enum class ObjectClass { Ground, Patch, Pit, Box, Cylinder, Actor, Unknown };

struct SceneSpec {
  // Infinite ground plane; absent means unsupported space outside patches.
  std::optional<double> base_height = 0.0;
  std::vector<GroundPatch> patches;
  std::vector<Pit> pits;
  std::vector<Box> boxes;
  std::vector<Cylinder> cylinders;
  std::vector<Actor> actors;
  std::uint64_t seed = 0;

  static constexpr int kBaseGroundId = 0;
  static constexpr int kVoidId = -2;

  // Throws InvalidArgument on duplicate ids or non-finite geometry.
  void validate() const;

  // Ground surface height at (x, y); nullopt where nothing supports.
  std::optional<double> terrain_height(double x, double y) const;
  // Id of the surface that defines terrain_height at (x, y).
  int terrain_id(double x, double y) const;

  ObjectClass class_of(int id) const;
  int next_free_id() const;

  // Copy rotated about the world z-axis through the origin.
  SceneSpec rotated(double angle) const;

  bool operator==(const SceneSpec&) const;
};

Category category_of(ObjectClass c);

std::string scene_to_json(const SceneSpec& scene);
// Throws MalformedFile on schema violations.
SceneSpec scene_from_json(const std::string& text);

}  // namespace cad::sim
