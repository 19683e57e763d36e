#include "cad/core/geometry.hpp"

#include <cmath>
#include <string>

#include "cad/core/error.hpp"

namespace cad {

bool is_orthonormal(const Matrix3& r, double tol) {
  if (!r.allFinite()) return false;
  const Matrix3 gram = r.transpose() * r;
  if (((gram - Matrix3::Identity()).cwiseAbs().maxCoeff()) > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

Pose::Pose(const Matrix3& rotation, const Vector3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!is_orthonormal(rotation_, kTolerance)) {
    fail(ErrorCode::NonOrthonormal, "pose rotation is not a proper rotation");
  }
  if (!translation_.allFinite()) fail(ErrorCode::InvalidArgument, "pose translation is not finite");
}

Pose Pose::from_yaw(double yaw, const Vector3& translation) {
  return Pose(Eigen::AngleAxisd(yaw, Vector3::UnitZ()).toRotationMatrix(), translation);
}

bool Pose::is_close(const Pose& other, double tol) const {
  return (rotation_ - other.rotation_).cwiseAbs().maxCoeff() <= tol &&
         (translation_ - other.translation_).cwiseAbs().maxCoeff() <= tol;
}

Pose compose(const Pose& a, const Pose& b) {
  return Pose(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation());
}

Pose invert(const Pose& a) {
  const Matrix3 rt = a.rotation().transpose();
  return Pose(rt, -(rt * a.translation()));
}

void PointFrame::validate() const {
  if (tags && tags->size() != points.size()) {
    fail(ErrorCode::InvalidArgument, "frame tags must have one entry per point");
  }
}

PointFrame transform_to_current(const PointFrame& frame, const Pose& current_pose) {
  const Pose rel = compose(invert(current_pose), frame.pose);
  PointFrame out;
  out.frame_index = frame.frame_index;
  out.tags = frame.tags;
  out.points.reserve(frame.points.size());
  for (const Point3& p : frame.points) {
    const Vector3 q = rel.apply(p.xyz());
    out.points.push_back({q.x(), q.y(), q.z(), p.intensity});
  }
  return out;
}

void PolarGridSpec::validate() const {
  if (!(max_radius > 0.0) || !std::isfinite(max_radius)) {
    fail(ErrorCode::ConfigError, "grid max_radius must be positive");
  }
  if (!(z_max > z_min)) fail(ErrorCode::ConfigError, "grid requires z_max > z_min");
  if (n_r <= 0 || n_r % 8 != 0 || n_phi <= 0 || n_phi % 8 != 0) {
    fail(ErrorCode::ConfigError, "grid bin counts must be positive multiples of 8, got n_r=" +
                                     std::to_string(n_r) + " n_phi=" + std::to_string(n_phi));
  }
}

double azimuth(double x, double y) {
  double phi = std::atan2(y, x);
  if (phi < 0.0) phi += kTwoPi;
  if (phi >= kTwoPi) phi = 0.0;
  return phi;
}

std::optional<PolarIndex> bin_point(const PolarGridSpec& spec, const Point3& p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) return std::nullopt;
  const double r = std::hypot(p.x, p.y);
  if (!(r < spec.max_radius) || p.z < spec.z_min || p.z > spec.z_max) return std::nullopt;
  int r_bin = static_cast<int>(std::floor(r / spec.r_width()));
  int phi_bin = static_cast<int>(std::floor(azimuth(p.x, p.y) / spec.phi_width()));
  // Guards against r / width rounding up to exactly n at the open upper end.
  if (r_bin >= spec.n_r) r_bin = spec.n_r - 1;
  if (phi_bin >= spec.n_phi) phi_bin = spec.n_phi - 1;
  return PolarIndex{r_bin, phi_bin};
}

double depth_of_bin(const PolarGridSpec& spec, int d) {
  if (d < 0 || d >= spec.n_r) {
    fail(ErrorCode::IndexOutOfRange, "depth index " + std::to_string(d) + " outside [0, n_r)");
  }
  return (d + 0.5) * spec.r_width();
}

int bin_of_depth(const PolarGridSpec& spec, double depth) {
  if (!(depth >= 0.0) || !(depth < spec.max_radius)) {
    fail(ErrorCode::IndexOutOfRange, "depth " + std::to_string(depth) + " outside [0, R)");
  }
  return std::min(static_cast<int>(std::floor(depth / spec.r_width())), spec.n_r - 1);
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::Thin: return "thin";
    case Category::Dynamic: return "dynamic";
    case Category::Negative: return "negative";
    case Category::Others: return "others";
  }
  return "others";
}

Category category_from_string(std::string_view s) {
  if (s == "thin") return Category::Thin;
  if (s == "dynamic") return Category::Dynamic;
  if (s == "negative") return Category::Negative;
  if (s == "others") return Category::Others;
  fail(ErrorCode::MalformedFile, "unknown direction category '" + std::string(s) + "'");
}

CadProfile CadProfile::full_range(const PolarGridSpec& spec) {
  CadProfile p;
  p.depth_index.assign(spec.n_phi, spec.n_r - 1);
  p.confidence.assign(spec.n_phi, 1.0);
  p.labeled = true;
  return p;
}

void CadProfile::validate(const PolarGridSpec& spec) const {
  if (static_cast<int>(depth_index.size()) != spec.n_phi ||
      static_cast<int>(confidence.size()) != spec.n_phi) {
    fail(ErrorCode::SpecMismatch, "profile has " + std::to_string(depth_index.size()) +
                                      " directions, grid expects " + std::to_string(spec.n_phi));
  }
  if (categories && static_cast<int>(categories->size()) != spec.n_phi) {
    fail(ErrorCode::SpecMismatch, "category tags length does not match n_phi");
  }
  for (int d : depth_index) {
    if (d < 0 || d >= spec.n_r) fail(ErrorCode::SpecMismatch, "depth index outside [0, n_r)");
  }
  for (double c : confidence) {
    if (!(c >= 0.0 && c <= 1.0)) fail(ErrorCode::SpecMismatch, "confidence outside [0, 1]");
  }
}

}  // namespace cad
