#include "cad/sim/lidar_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "cad/core/error.hpp"

namespace cad::sim {
namespace {

using Vec2 = Eigen::Vector2d;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDeg = kTwoPi / 360.0;
constexpr double kMinRange = 1e-6;

double side_height(const SceneSpec& scene, double x, double y) {
  const auto h = scene.terrain_height(x, y);
  return h ? *h : -kInf;
}

// Entry parameter of the ray into a vertical prism with horizontal span s and
// height band [z0, z1]; infinity when missed.
double prism_entry(const Span2& s, const Vector3& o, const Vector3& d, double z0, double z1) {
  double t0 = s.enter, t1 = s.exit;
  if (std::abs(d.z()) < 1e-15) {
    if (o.z() < z0 || o.z() > z1) return kInf;
  } else {
    double a = (z0 - o.z()) / d.z(), b = (z1 - o.z()) / d.z();
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (t0 > t1 || t0 <= kMinRange) return kInf;
  return t0;
}

void consider(RayHit& best, double t, int id, bool dynamic) {
  if (t < best.range) best = {t, id, dynamic};
}

void terrain_hits(const SceneSpec& scene, const Vector3& o, const Vector3& d, RayHit& best) {
  // Horizontal surfaces: every height the terrain can take.
  if (d.z() < 0) {
    std::vector<double> tops;
    if (scene.base_height) tops.push_back(*scene.base_height);
    for (const auto& p : scene.patches) tops.push_back(p.height);
    std::vector<double> levels = tops;
    for (const auto& pit : scene.pits)
      for (double h : tops) levels.push_back(h - pit.depth);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    for (double z : levels) {
      const double t = (z - o.z()) / d.z();
      if (t <= kMinRange || t >= best.range) continue;
      const double x = o.x() + t * d.x(), y = o.y() + t * d.y();
      const auto h = scene.terrain_height(x, y);
      if (h && std::abs(*h - z) < 1e-9) consider(best, t, scene.terrain_id(x, y), false);
    }
  }
  // Vertical steps along rectangle edges.
  const Vec2 o2(o.x(), o.y()), d2(d.x(), d.y());
  auto edges = [&](const OrientedRect& r, int id) {
    const auto c = r.corners();
    for (int i = 0; i < 4; ++i) {
      const Vec2 a = c[i], e = c[(i + 1) % 4] - c[i];
      const double den = d2.x() * e.y() - d2.y() * e.x();
      if (std::abs(den) < 1e-15) continue;
      const Vec2 w = a - o2;
      const double t = (w.x() * e.y() - w.y() * e.x()) / den;
      const double u = (w.x() * d2.y() - w.y() * d2.x()) / den;
      if (t <= kMinRange || t >= best.range || u < 0 || u > 1) continue;
      const double z = o.z() + t * d.z();
      const Vec2 n = Vec2(e.y(), -e.x()).normalized() * 1e-7;
      const Vec2 p = o2 + t * d2;
      const double h1 = side_height(scene, p.x() + n.x(), p.y() + n.y());
      const double h2 = side_height(scene, p.x() - n.x(), p.y() - n.y());
      if (z <= std::max(h1, h2) && z >= std::min(h1, h2) && h1 != h2) consider(best, t, id, false);
    }
  };
  for (const auto& p : scene.patches) edges(p.area, p.id);
  for (const auto& p : scene.pits) edges(p.area, p.id);
}

}  // namespace

LidarModel LidarModel::vlp16() {
  LidarModel m;
  for (int i = 0; i < 16; ++i) m.vertical_deg.push_back(-15.0 + 2.0 * i);
  return m;
}

LidarModel LidarModel::dense(int channels, double lowest_deg, double highest_deg, double azimuth_step_deg) {
  if (channels < 2) fail(ErrorCode::InvalidArgument, "dense lidar needs at least two channels");
  LidarModel m;
  for (int i = 0; i < channels; ++i) {
    m.vertical_deg.push_back(lowest_deg + (highest_deg - lowest_deg) * i / (channels - 1));
  }
  m.azimuth_step_deg = azimuth_step_deg;
  return m;
}

LidarModel LidarModel::survey(double ground_spacing, double ground_radius, double azimuth_step_deg,
                              double mount_height) {
  if (!(ground_spacing > 0) || !(ground_radius > ground_spacing) || !(mount_height > 0)) {
    fail(ErrorCode::InvalidArgument, "survey lidar needs positive spacing, radius and mount height");
  }
  LidarModel m;
  m.mount_height = mount_height;
  m.azimuth_step_deg = azimuth_step_deg;
  for (double rho = ground_radius; rho >= ground_spacing - 1e-12; rho -= ground_spacing) {
    m.vertical_deg.push_back(-std::atan2(mount_height, rho) / kDeg);
  }
  for (double a = std::floor(m.vertical_deg.front()) + 1.0; a <= 15.0; a += 1.0) m.vertical_deg.push_back(a);
  std::sort(m.vertical_deg.begin(), m.vertical_deg.end());
  return m;
}

int LidarModel::azimuth_steps() const { return static_cast<int>(std::lround(360.0 / azimuth_step_deg)); }

void LidarModel::validate() const {
  if (vertical_deg.empty()) fail(ErrorCode::InvalidArgument, "lidar needs at least one channel");
  for (std::size_t i = 0; i < vertical_deg.size(); ++i) {
    if (!std::isfinite(vertical_deg[i]) || std::abs(vertical_deg[i]) >= 90.0) {
      fail(ErrorCode::InvalidArgument, "vertical angle out of range");
    }
    if (i > 0 && vertical_deg[i] <= vertical_deg[i - 1]) {
      fail(ErrorCode::InvalidArgument, "vertical angles must be strictly increasing");
    }
  }
  if (!(azimuth_step_deg > 0) || std::abs(360.0 / azimuth_step_deg - azimuth_steps()) > 1e-9) {
    fail(ErrorCode::InvalidArgument, "azimuth step must divide 360");
  }
  if (!(max_range > 0) || !std::isfinite(max_range)) fail(ErrorCode::InvalidArgument, "max range must be positive");
  if (!std::isfinite(mount_height)) fail(ErrorCode::InvalidArgument, "mount height must be finite");
  if (!(noise_sigma >= 0) || !std::isfinite(noise_sigma)) fail(ErrorCode::InvalidArgument, "noise sigma must be >= 0");
}

Pose sensor_pose(const LidarModel& lidar, double x, double y, double yaw) {
  return Pose::from_yaw(yaw, Vector3(x, y, lidar.mount_height));
}

std::optional<RayHit> cast_ray(const SceneSpec& scene, const Vector3& o, const Vector3& d, double time, double max_range) {
  RayHit best{kInf, -1, false};
  terrain_hits(scene, o, d, best);
  const Vec2 o2(o.x(), o.y()), d2(d.x(), d.y());
  auto box = [&](const Box& b, bool dynamic) {
    if (const auto s = ray_rect(o2, d2, b.footprint)) {
      consider(best, prism_entry(*s, o, d, b.z_bottom, b.z_bottom + b.height), b.id, dynamic);
    }
  };
  auto cylinder = [&](const Cylinder& c, bool dynamic) {
    if (const auto s = ray_circle(o2, d2, Vec2(c.cx, c.cy), c.radius)) {
      consider(best, prism_entry(*s, o, d, c.z_bottom, c.z_bottom + c.height), c.id, dynamic);
    }
  };
  for (const auto& b : scene.boxes) box(b, false);
  for (const auto& c : scene.cylinders) cylinder(c, false);
  for (const auto& a : scene.actors) {
    if (a.shape == ActorShape::Box) box(a.box_at(time), true);
    else cylinder(a.cylinder_at(time), true);
  }
  if (best.range > max_range) return std::nullopt;
  return best;
}

PointFrame raycast_scan(const SceneSpec& scene, const LidarModel& lidar, const Pose& pose, double time,
                        std::uint64_t seed) {
  lidar.validate();
  for (const auto& a : scene.actors) a.trajectory.at(time);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5ca9u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> noise(0.0, 1.0);

  PointFrame frame;
  frame.pose = pose;
  std::vector<PointTag> tags;
  const Vector3 origin = pose.translation();
  const int n_az = lidar.azimuth_steps();
  for (int a = 0; a < n_az; ++a) {
    const double az = a * lidar.azimuth_step_deg * kDeg;
    for (double elev : lidar.vertical_deg) {
      const double ce = std::cos(elev * kDeg);
      const Vector3 local(ce * std::cos(az), ce * std::sin(az), std::sin(elev * kDeg));
      const auto hit = cast_ray(scene, origin, pose.rotation() * local, time, lidar.max_range);
      if (!hit) continue;
      // Gaussian truncated at 3 sigma so every return stays near its surface.
      const double range = std::max(0.0, hit->range + lidar.noise_sigma * std::clamp(noise(rng), -3.0, 3.0));
      const Vector3 p = range * local;
      frame.points.push_back({p.x(), p.y(), p.z(), 0.5});
      tags.push_back({hit->object_id, hit->dynamic});
    }
  }
  frame.tags = std::move(tags);
  return frame;
}

SequenceSpec SequenceSpec::straight(int f, double period, double speed) {
  SequenceSpec s;
  s.f = f;
  s.period = period;
  const double t_begin = -std::max(10.0, f * period + 1.0);
  s.ego.waypoints = {{t_begin, speed * t_begin, 0.0, 0.0}, {1.0, speed, 0.0, 0.0}};
  return s;
}

void SequenceSpec::validate() const {
  if (f < 0) fail(ErrorCode::InvalidArgument, "history frame count must be >= 0");
  if (!(period > 0) || !std::isfinite(period)) fail(ErrorCode::InvalidArgument, "frame period must be positive");
  if (ego.waypoints.empty()) fail(ErrorCode::InvalidArgument, "ego trajectory is empty");
}

Sample generate_sequence(const SceneSpec& scene, const SequenceSpec& seq, const LidarModel& lidar,
                         std::uint64_t seed) {
  scene.validate();
  seq.validate();
  Sample sample;
  for (int k = 0; k <= seq.f; ++k) {
    const double t = seq.time_of(k);
    const Waypoint w = seq.ego.at(t);
    PointFrame frame = raycast_scan(scene, lidar, sensor_pose(lidar, w.x, w.y, w.yaw), t,
                                    seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(k));
    frame.frame_index = k;
    sample.frames.push_back(std::move(frame));
  }
  return sample;
}

bool viewpoint_clear(const SceneSpec& scene, double x, double y, double ground, double margin) {
  const auto h = scene.terrain_height(x, y);
  if (!h || std::abs(*h - ground) > 0.05) return false;
  for (const auto& b : scene.boxes) {
    if (b.footprint.contains(x, y)) return false;
    const auto [lx, ly] = b.footprint.to_local(x, y);
    if (std::abs(lx) <= b.footprint.half_x + margin && std::abs(ly) <= b.footprint.half_y + margin) return false;
  }
  for (const auto& c : scene.cylinders) {
    if (std::hypot(x - c.cx, y - c.cy) < c.radius + margin) return false;
  }
  return true;
}

std::vector<PointFrame> survey_scans(const SceneSpec& scene, const LidarModel& lidar, const Pose& ego,
                                     const std::vector<double>& radii, int per_ring, double time,
                                     std::uint64_t seed) {
  const double ex = ego.translation().x(), ey = ego.translation().y(), yaw = ego.yaw();
  const auto ground = scene.terrain_height(ex, ey);
  std::vector<PointFrame> frames;
  frames.push_back(transform_to_current(raycast_scan(scene, lidar, sensor_pose(lidar, ex, ey, yaw), time, seed), ego));
  std::uint64_t k = 0;
  for (std::size_t ring = 0; ring < radii.size(); ++ring) {
    for (int v = 0; v < per_ring; ++v) {
      // Alternate rings are staggered by half a step.
      const double a = yaw + (v + 0.5 * (ring % 2)) * kTwoPi / per_ring;
      const double x = ex + radii[ring] * std::cos(a), y = ey + radii[ring] * std::sin(a);
      if (!ground || !viewpoint_clear(scene, x, y, *ground)) continue;
      PointFrame f = raycast_scan(scene, lidar, sensor_pose(lidar, x, y, a), time, seed + ++k);
      f.frame_index = 0;
      frames.push_back(transform_to_current(f, ego));
    }
  }
  return frames;
}

// ---------------------------------------------------------------- scenes

DifficultyProfile DifficultyProfile::bare() {
  DifficultyProfile p;
  p.name = "bare";
  p.boxes = p.cylinders = p.pits = p.curbs = p.actors = {0, 0};
  return p;
}

DifficultyProfile DifficultyProfile::desk() { return {}; }

DifficultyProfile DifficultyProfile::dynamic() {
  DifficultyProfile p;
  p.name = "dynamic";
  p.boxes = {0, 2};
  p.cylinders = {0, 2};
  p.pits = {0, 1};
  p.actors = {2, 4};
  return p;
}

DifficultyProfile DifficultyProfile::dense() {
  DifficultyProfile p;
  p.name = "dense";
  p.boxes = {3, 6};
  p.cylinders = {3, 6};
  p.pits = {1, 3};
  p.curbs = {1, 2};
  p.actors = {1, 2};
  p.cliff_probability = 0.2;
  return p;
}

DifficultyProfile DifficultyProfile::named(const std::string& name) {
  if (name == "bare") return bare();
  if (name == "desk") return desk();
  if (name == "dynamic") return dynamic();
  if (name == "dense") return dense();
  fail(ErrorCode::ConfigError, "unknown difficulty profile '" + name + "'");
}

void DifficultyProfile::validate() const {
  for (const CountRange& c : {boxes, cylinders, pits, curbs, actors}) {
    if (c.lo < 0 || c.hi < c.lo) fail(ErrorCode::ConfigError, "count range must satisfy 0 <= lo <= hi");
  }
  if (!(radius > ego_clearance + 1.0)) fail(ErrorCode::ConfigError, "placement radius too small");
  if (cliff_probability < 0 || cliff_probability > 1) fail(ErrorCode::ConfigError, "cliff probability must be in [0, 1]");
}

namespace {

constexpr int kMaxAttempts = 200;

struct Disc {
  double x, y, r;
};

class Placer {
 public:
  Placer(const DifficultyProfile& p, std::mt19937_64& rng) : p_(p), rng_(rng) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int count(CountRange c) { return std::uniform_int_distribution<int>(c.lo, c.hi)(rng_); }

  // Keeps a disc clear of the ego, its past path, and earlier placements.
  bool free(const Disc& d) const {
    const double c = p_.ego_clearance + d.r;
    const double px = std::clamp(d.x, -p_.path_length, 0.0);
    if (std::hypot(d.x - px, d.y) < c) return false;
    for (const Disc& o : taken_) {
      if (std::hypot(d.x - o.x, d.y - o.y) < d.r + o.r + 0.3) return false;
    }
    return true;
  }

  Disc place(double r, double min_dist) {
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      const double rho = uniform(min_dist, p_.radius);
      const double phi = uniform(0.0, kTwoPi);
      const Disc d{rho * std::cos(phi), rho * std::sin(phi), r};
      if (free(d)) {
        taken_.push_back(d);
        return d;
      }
    }
    fail(ErrorCode::PlacementFailure, "could not place object after " + std::to_string(kMaxAttempts) + " attempts");
  }

 private:
  const DifficultyProfile& p_;
  std::mt19937_64& rng_;
  std::vector<Disc> taken_;
};

}  // namespace

SceneSpec sample_random_scene(std::uint64_t seed, const DifficultyProfile& profile) {
  profile.validate();
  std::mt19937_64 rng(seed);
  Placer placer(profile, rng);
  SceneSpec scene;
  scene.seed = seed;
  int next_id = SceneSpec::kBaseGroundId + 1;

  if (placer.uniform(0.0, 1.0) < profile.cliff_probability) {
    // Elevated plateau ending in a drop on one side.
    scene.base_height.reset();
    const double edge = placer.uniform(3.0, profile.radius - 1.0);
    const double yaw = placer.uniform(0.0, kTwoPi);
    const double half = profile.radius + 20.0;
    const double cx = (edge - half) * std::cos(yaw), cy = (edge - half) * std::sin(yaw);
    scene.patches.push_back({next_id++, OrientedRect{cx, cy, half, half, yaw}, 0.0});
  }

  for (int i = 0, n = placer.count(profile.curbs); i < n; ++i) {
    const double hx = placer.uniform(0.4, 1.2), hy = placer.uniform(1.5, 3.0);
    const Disc d = placer.place(std::hypot(hx, hy), 2.5);
    const double yaw = std::atan2(d.y, d.x) + placer.uniform(-0.3, 0.3);
    const double h = placer.uniform(0.18, 0.35);
    if (placer.uniform(0.0, 1.0) < 0.5) {
      scene.patches.push_back({next_id++, OrientedRect{d.x, d.y, hx, hy, yaw}, h});
    } else {
      scene.pits.push_back({next_id++, OrientedRect{d.x, d.y, hx, hy, yaw}, h});
    }
  }
  for (int i = 0, n = placer.count(profile.pits); i < n; ++i) {
    const double hx = placer.uniform(0.4, 1.2), hy = placer.uniform(0.4, 1.5);
    const Disc d = placer.place(std::hypot(hx, hy), 2.0);
    scene.pits.push_back({next_id++, OrientedRect{d.x, d.y, hx, hy, placer.uniform(0.0, kTwoPi)},
                          placer.uniform(0.4, 1.2)});
  }
  auto ground_at = [&](double x, double y) {
    const auto h = scene.terrain_height(x, y);
    return h ? *h : 0.0;
  };
  for (int i = 0, n = placer.count(profile.boxes); i < n; ++i) {
    const double hx = placer.uniform(0.3, 1.5), hy = placer.uniform(0.3, 1.5);
    const Disc d = placer.place(std::hypot(hx, hy), 1.5);
    scene.boxes.push_back({next_id++, OrientedRect{d.x, d.y, hx, hy, placer.uniform(0.0, kTwoPi)},
                           ground_at(d.x, d.y), placer.uniform(0.4, 2.0)});
  }
  for (int i = 0, n = placer.count(profile.cylinders); i < n; ++i) {
    const double r = placer.uniform(0.04, 0.15);
    const Disc d = placer.place(r, 1.5);
    scene.cylinders.push_back({next_id++, d.x, d.y, r, ground_at(d.x, d.y), placer.uniform(0.8, 2.5)});
  }
  for (int i = 0, n = placer.count(profile.actors); i < n; ++i) {
    Actor a;
    a.id = next_id++;
    const bool vehicle = placer.uniform(0.0, 1.0) < 0.3;
    a.shape = vehicle ? ActorShape::Box : ActorShape::Cylinder;
    a.half_x = vehicle ? placer.uniform(1.0, 1.8) : placer.uniform(0.2, 0.35);
    a.half_y = vehicle ? placer.uniform(0.7, 0.9) : a.half_x;
    a.height = vehicle ? placer.uniform(1.3, 1.8) : placer.uniform(1.5, 1.9);
    const double reach = std::hypot(a.half_x, a.half_y);
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
      const double rho = placer.uniform(2.5, profile.radius - 1.0);
      const double phi = placer.uniform(0.0, kTwoPi);
      const double heading = placer.uniform(0.0, kTwoPi);
      const double speed = placer.uniform(0.8, vehicle ? 3.0 : 1.6);
      const double x0 = rho * std::cos(phi), y0 = rho * std::sin(phi);
      const double vx = speed * std::cos(heading), vy = speed * std::sin(heading);
      a.trajectory.waypoints = {{-10.0, x0 - 10.0 * vx, y0 - 10.0 * vy, heading},
                                {1.0, x0 + vx, y0 + vy, heading}};
      ok = true;
      // Never closer than the clearance to the ego over the recent past.
      for (double t = -3.0; t <= 1.0 && ok; t += 0.05) {
        const Waypoint w = a.trajectory.at(t);
        const double px = std::clamp(w.x, -profile.path_length, 0.0);
        if (std::hypot(w.x - px, w.y) < profile.ego_clearance + reach) ok = false;
      }
    }
    if (!ok) fail(ErrorCode::PlacementFailure, "could not route actor");
    scene.actors.push_back(std::move(a));
  }
  scene.validate();
  return scene;
}

}  // namespace cad::sim
