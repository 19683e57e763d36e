#include "cad/oracle/cad_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "cad/core/error.hpp"

namespace cad::oracle {
namespace {

using Vec2 = Eigen::Vector2d;
using sim::OrientedRect;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_positive(double v, const char* name) {
  if (!(v > 0) || !std::isfinite(v)) fail(ErrorCode::ConfigError, std::string(name) + " must be positive");
}

bool in_wedge(const Vec2& p, double a0, double width) {
  double diff = azimuth(p.x(), p.y()) - a0;
  diff -= kTwoPi * std::floor(diff / kTwoPi);
  return diff <= width + 1e-12 || diff >= kTwoPi - 1e-12;
}

Vec2 closest_on_segment(const Vec2& a, const Vec2& b) {
  const Vec2 e = b - a;
  const double u = std::clamp(-a.dot(e) / e.squaredNorm(), 0.0, 1.0);
  return a + u * e;
}

// Boundary points of the rectangle whose distance to the origin can be
// extremal over rectangle-wedge intersections.
double boundary_candidates(const OrientedRect& r, double a0, double width) {
  double best = kInf;
  const auto c = r.corners();
  for (int i = 0; i < 4; ++i) {
    if (in_wedge(c[i], a0, width)) best = std::min(best, c[i].norm());
    const Vec2 p = closest_on_segment(c[i], c[(i + 1) % 4]);
    if (in_wedge(p, a0, width)) best = std::min(best, p.norm());
  }
  return best;
}

// Smallest |p| over rect intersected with the wedge [a0, a0 + width].
double rect_entry(const OrientedRect& r, double a0, double width) {
  if (r.contains(0, 0)) return 0.0;
  double best = boundary_candidates(r, a0, width);
  for (double a : {a0, a0 + width}) {
    if (auto s = sim::ray_rect(Vec2::Zero(), Vec2(std::cos(a), std::sin(a)), r)) best = std::min(best, s->enter);
  }
  return best;
}

// Smallest |p| over the complement of rect within the wedge.
double rect_exit(const OrientedRect& r, double a0, double width) {
  if (!r.contains(0, 0)) return 0.0;
  double best = boundary_candidates(r, a0, width);
  for (double a : {a0, a0 + width}) {
    if (auto s = sim::ray_rect(Vec2::Zero(), Vec2(std::cos(a), std::sin(a)), r)) best = std::min(best, s->exit);
  }
  return best;
}

double circle_entry(const Vec2& c, double radius, double a0, double width) {
  if (c.norm() <= radius) return 0.0;
  if (in_wedge(c, a0, width)) return c.norm() - radius;
  double best = kInf;
  for (double a : {a0, a0 + width}) {
    if (auto s = sim::ray_circle(Vec2::Zero(), Vec2(std::cos(a), std::sin(a)), c, radius)) {
      best = std::min(best, s->enter);
    }
  }
  return best;
}

struct Hazard {
  enum class Kind { Enter, Exit, Disc } kind;
  OrientedRect rect;
  Vec2 centre = Vec2::Zero();
  double radius = 0;
  int id = -1;
  Category category = Category::Others;

  double distance(double a0, double width) const {
    switch (kind) {
      case Kind::Enter: return rect_entry(rect, a0, width);
      case Kind::Exit: return rect_exit(rect, a0, width);
      case Kind::Disc: return circle_entry(centre, radius, a0, width);
    }
    return kInf;
  }
};

class EgoFrame {
 public:
  explicit EgoFrame(const Pose& ego)
      : x_(ego.translation().x()), y_(ego.translation().y()), yaw_(ego.yaw()),
        c_(std::cos(yaw_)), s_(std::sin(yaw_)) {}

  Vec2 point(double x, double y) const {
    const double dx = x - x_, dy = y - y_;
    return {c_ * dx + s_ * dy, -s_ * dx + c_ * dy};
  }
  OrientedRect rect(const OrientedRect& r) const {
    const Vec2 p = point(r.cx, r.cy);
    return {p.x(), p.y(), r.half_x, r.half_y, r.yaw - yaw_};
  }
  double x() const { return x_; }
  double y() const { return y_; }

 private:
  double x_, y_, yaw_, c_, s_;
};

// Classifies a ground level relative to the reference.
std::optional<Category> step_hazard(std::optional<double> level, double ref, const TraversabilityRules& rules) {
  if (!level) return Category::Negative;
  if (*level - ref > rules.h_obs) return Category::Others;
  if (*level < ref - rules.h_neg) return Category::Negative;
  return std::nullopt;
}

std::vector<Hazard> collect_hazards(const sim::SceneSpec& scene, const EgoFrame& ego, double ref,
                                    const TraversabilityRules& rules, double time) {
  std::vector<Hazard> out;
  const double band_lo = ref + rules.h_obs, band_hi = ref + rules.vehicle_clearance;
  auto intrudes = [&](double z0, double h) { return z0 < band_hi && z0 + h > band_lo; };
  auto box = [&](const sim::Box& b, Category cat) {
    if (intrudes(b.z_bottom, b.height)) out.push_back({Hazard::Kind::Enter, ego.rect(b.footprint), {}, 0, b.id, cat});
  };
  auto cylinder = [&](const sim::Cylinder& c, Category cat) {
    if (intrudes(c.z_bottom, c.height)) {
      out.push_back({Hazard::Kind::Disc, {}, ego.point(c.cx, c.cy), c.radius, c.id, cat});
    }
  };
  for (const auto& b : scene.boxes) box(b, Category::Others);
  for (const auto& c : scene.cylinders) cylinder(c, Category::Thin);
  for (const auto& a : scene.actors) {
    if (a.shape == sim::ActorShape::Box) box(a.box_at(time), Category::Dynamic);
    else cylinder(a.cylinder_at(time), Category::Dynamic);
  }

  const int under = scene.terrain_id(ego.x(), ego.y());
  for (const auto& p : scene.patches) {
    if (p.id == under) {
      // Leaving the patch the ego stands on.
      if (auto cat = step_hazard(scene.base_height, ref, rules)) {
        out.push_back({Hazard::Kind::Exit, ego.rect(p.area), {}, 0, p.id, *cat});
      }
    } else if (auto cat = step_hazard(p.height, ref, rules)) {
      out.push_back({Hazard::Kind::Enter, ego.rect(p.area), {}, 0, p.id, *cat});
    }
  }
  for (const auto& p : scene.pits) {
    if (p.id == under) {
      if (p.depth > rules.h_obs) out.push_back({Hazard::Kind::Exit, ego.rect(p.area), {}, 0, p.id, Category::Others});
      continue;
    }
    if (auto cat = step_hazard(scene.terrain_height(p.area.cx, p.area.cy), ref, rules)) {
      out.push_back({Hazard::Kind::Enter, ego.rect(p.area), {}, 0, p.id, *cat});
    }
  }
  return out;
}

template <typename T>
T median(std::vector<T> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return (*mid + *std::max_element(v.begin(), mid)) / 2;
}

}  // namespace

void TraversabilityRules::validate() const {
  check_positive(h_obs, "h_obs");
  check_positive(h_neg, "h_neg");
  check_positive(g_max, "g_max");
  check_positive(ground_window, "ground window");
  check_positive(vehicle_clearance, "vehicle clearance");
  check_positive(seed_radius, "seed radius");
  if (h_neg < ground_window) fail(ErrorCode::ConfigError, "h_neg must be at least the ground window");
  if (reference_window < 1) fail(ErrorCode::ConfigError, "reference window must be >= 1");
}

SceneLabel label_scene(const sim::SceneSpec& scene, const Pose& ego, const PolarGridSpec& spec,
                       const TraversabilityRules& rules, double time) {
  spec.validate();
  rules.validate();
  const EgoFrame frame(ego);
  const auto ref = scene.terrain_height(frame.x(), frame.y());
  if (!ref) fail(ErrorCode::EgoBlocked, "ego is not supported by any ground surface");
  const std::vector<Hazard> hazards = collect_hazards(scene, frame, *ref, rules, time);

  SceneLabel out;
  out.profile = CadProfile::full_range(spec);
  out.profile.labeled = true;
  out.profile.categories = std::vector<Category>(spec.n_phi, Category::Others);
  out.distance.assign(spec.n_phi, kInf);
  out.terminator.assign(spec.n_phi, -1);
  const double width = spec.phi_width();
  for (int j = 0; j < spec.n_phi; ++j) {
    const double a0 = j * width;
    for (const Hazard& h : hazards) {
      const double d = h.distance(a0, width);
      if (d < out.distance[j]) {
        out.distance[j] = d;
        out.terminator[j] = h.id;
        (*out.profile.categories)[j] = h.category;
      }
    }
    if (out.distance[j] <= 0.0) {
      fail(ErrorCode::EgoBlocked, "ego position violates traversability (object " + std::to_string(out.terminator[j]) + ")");
    }
    if (out.distance[j] < spec.max_radius) {
      out.profile.depth_index[j] = std::min(static_cast<int>(out.distance[j] / spec.r_width()), spec.n_r - 1);
    } else {
      out.terminator[j] = -1;
      (*out.profile.categories)[j] = Category::Others;
    }
  }
  return out;
}

CadProfile label_from_scene(const sim::SceneSpec& scene, const Pose& ego, const PolarGridSpec& spec,
                            const TraversabilityRules& rules, double time) {
  return label_scene(scene, ego, spec, rules, time).profile;
}

std::vector<int> pillar_point_counts(std::span<const PointFrame> frames, const PolarGridSpec& spec) {
  std::vector<int> counts(spec.n_pillars(), 0);
  for (const PointFrame& f : frames) {
    for (const Point3& p : f.points) {
      if (auto idx = bin_point(spec, p)) ++counts[spec.pillar_id(*idx)];
    }
  }
  return counts;
}

bool direction_covered(const std::vector<int>& counts, const PolarGridSpec& spec, int phi, int depth) {
  for (int i = 0; i <= depth; ++i) {
    if (counts[spec.pillar_id({i, phi})] == 0) return false;
  }
  return true;
}

CadProfile label_from_points(std::span<const PointFrame> frames, const PolarGridSpec& spec,
                             const TraversabilityRules& rules) {
  spec.validate();
  rules.validate();
  std::vector<std::vector<double>> pillars(spec.n_pillars());
  for (const PointFrame& f : frames) {
    f.validate();
    for (std::size_t i = 0; i < f.points.size(); ++i) {
      if (f.frame_index > 0 && f.tags && (*f.tags)[i].dynamic) continue;
      if (auto idx = bin_point(spec, f.points[i])) pillars[spec.pillar_id(*idx)].push_back(f.points[i].z);
    }
  }

  std::vector<double> seeds;
  for (int r = 0; r < spec.n_r && (r + 0.5) * spec.r_width() < rules.seed_radius; ++r) {
    for (int j = 0; j < spec.n_phi; ++j) {
      const auto& zs = pillars[spec.pillar_id({r, j})];
      if (!zs.empty()) seeds.push_back(*std::min_element(zs.begin(), zs.end()));
    }
  }
  if (seeds.empty()) fail(ErrorCode::NoGroundReference, "no points near the ego to establish ground height");
  const double seed_ref = median(seeds);

  CadProfile out = CadProfile::full_range(spec);
  out.labeled = true;
  std::vector<double> zs;
  for (int j = 0; j < spec.n_phi; ++j) {
    double ref = seed_ref, gap = 0.0;
    int last_supported = -1;
    std::deque<double> recent;
    int depth = -1;
    for (int i = 0; i < spec.n_r && depth < 0; ++i) {
      zs.clear();
      for (double z : pillars[spec.pillar_id({i, j})]) {
        if (z <= ref + rules.vehicle_clearance) zs.push_back(z);
      }
      if (zs.empty()) {
        // Leading empty pillars are the sensor blind spot, not a gap.
        if (last_supported < 0) continue;
        gap += spec.r_width();
        if (gap > rules.g_max + 1e-12) depth = last_supported;
        continue;
      }
      const auto [lo, hi] = std::minmax_element(zs.begin(), zs.end());
      if (*hi - ref > rules.h_obs) {
        depth = i;
        continue;
      }
      if (*lo < ref - rules.h_neg) {
        // A drop behind unobserved pillars starts where observation ended.
        depth = gap > 0 ? last_supported : i;
        continue;
      }
      if (gap > 0 && *lo < ref - rules.ground_window) {
        // Below-ground returns right after a shadow: the far wall of a hole.
        depth = last_supported;
        continue;
      }
      std::vector<double> ground;
      for (double z : zs) {
        if (z <= *lo + rules.ground_window) ground.push_back(z);
      }
      recent.push_back(median(ground));
      if (static_cast<int>(recent.size()) > rules.reference_window) recent.pop_front();
      ref = median(std::vector<double>(recent.begin(), recent.end()));
      gap = 0.0;
      last_supported = i;
    }
    // Nothing observed at all: no accessible depth can be claimed.
    if (depth < 0) depth = last_supported < 0 ? 0 : spec.n_r - 1;
    out.depth_index[j] = depth;
  }
  return out;
}

}  // namespace cad::oracle
