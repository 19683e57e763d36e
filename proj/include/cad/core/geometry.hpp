#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace cad {

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  Vector3 xyz() const { return {x, y, z}; }
  bool operator==(const Point3&) const = default;
};

// Rigid transform x -> R x + t. Construction validates orthonormality.
class Pose {
 public:
  static constexpr double kTolerance = 1e-9;

  Pose() : rotation_(Matrix3::Identity()), translation_(Vector3::Zero()) {}
  Pose(const Matrix3& rotation, const Vector3& translation);

  static Pose identity() { return Pose(); }
  static Pose from_yaw(double yaw, const Vector3& translation);

  const Matrix3& rotation() const { return rotation_; }
  const Vector3& translation() const { return translation_; }

  Vector3 apply(const Vector3& p) const { return rotation_ * p + translation_; }
  double yaw() const { return std::atan2(rotation_(1, 0), rotation_(0, 0)); }

  bool is_close(const Pose& other, double tol) const;

 private:
  Matrix3 rotation_;
  Vector3 translation_;
};

bool is_orthonormal(const Matrix3& r, double tol);

// compose(a, b) applies b first, then a.
Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& a);

struct PointTag {
  std::int32_t object_id = -1;
  bool dynamic = false;
  bool operator==(const PointTag&) const = default;
};

struct PointFrame {
  std::vector<Point3> points;
  Pose pose;
  int frame_index = 0;  // 0 = current
  std::optional<std::vector<PointTag>> tags;

  // Throws InvalidArgument when tags are present with the wrong length.
  void validate() const;
};

// Re-expresses a frame captured at frame.pose in the coordinate system of
// current_pose. The returned pose is the identity.
PointFrame transform_to_current(const PointFrame& frame, const Pose& current_pose);

struct PolarIndex {
  int r_bin = 0;
  int phi_bin = 0;
  bool operator==(const PolarIndex&) const = default;
};

// Cylinder of radius max_radius and height band [z_min, z_max] around the
// sensor, cut into n_r x n_phi sector pillars. Azimuth 0 is +x, increasing
// counter-clockwise.
struct PolarGridSpec {
  double max_radius = 15.0;
  double z_min = -2.0;
  double z_max = 1.0;
  int n_r = 128;
  int n_phi = 384;

  static PolarGridSpec full() { return {}; }
  static PolarGridSpec desk() { return {12.0, -2.0, 1.0, 32, 48}; }

  void validate() const;

  double r_width() const { return max_radius / n_r; }
  double phi_width() const { return kTwoPi / n_phi; }
  double phi_width_degrees() const { return 360.0 / n_phi; }
  int n_pillars() const { return n_r * n_phi; }
  int pillar_id(const PolarIndex& idx) const { return idx.r_bin * n_phi + idx.phi_bin; }

  double phi_center(int phi_bin) const { return (phi_bin + 0.5) * phi_width(); }

  bool operator==(const PolarGridSpec&) const = default;
};

// Azimuth of (x, y) normalized to [0, 2pi).
double azimuth(double x, double y);

std::optional<PolarIndex> bin_point(const PolarGridSpec& spec, const Point3& p);

// Bin-center radius of depth index d; throws IndexOutOfRange outside [0, n_r).
double depth_of_bin(const PolarGridSpec& spec, int d);
// Throws IndexOutOfRange for depths outside [0, R).
int bin_of_depth(const PolarGridSpec& spec, double depth);

enum class Category : std::uint8_t { Thin = 0, Dynamic = 1, Negative = 2, Others = 3 };
inline constexpr int kCategoryCount = 4;

std::string_view to_string(Category c);
Category category_from_string(std::string_view s);

// Per-direction accessible depth in index form, 0-based.
struct CadProfile {
  std::vector<int> depth_index;
  std::vector<double> confidence;
  bool labeled = false;
  std::optional<std::vector<Category>> categories;

  static CadProfile full_range(const PolarGridSpec& spec);

  int n_phi() const { return static_cast<int>(depth_index.size()); }
  // Throws SpecMismatch when lengths or index ranges disagree with spec.
  void validate(const PolarGridSpec& spec) const;

  bool operator==(const CadProfile&) const = default;
};

}  // namespace cad
