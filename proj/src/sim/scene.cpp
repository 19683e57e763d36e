#include "cad/sim/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "cad/core/error.hpp"

namespace cad::sim {

using nlohmann::json;
using Vec2 = Eigen::Vector2d;

std::pair<double, double> OrientedRect::to_local(double x, double y) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double dx = x - cx, dy = y - cy;
  return {c * dx + s * dy, -s * dx + c * dy};
}

bool OrientedRect::contains(double x, double y) const {
  const auto [lx, ly] = to_local(x, y);
  return std::abs(lx) <= half_x && std::abs(ly) <= half_y;
}

std::vector<Vec2> OrientedRect::corners() const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  std::vector<Vec2> out;
  for (auto [sx, sy] : {std::pair{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}) {
    const double lx = sx * half_x, ly = sy * half_y;
    out.emplace_back(cx + c * lx - s * ly, cy + s * lx + c * ly);
  }
  return out;
}

double OrientedRect::bounding_radius() const { return std::hypot(half_x, half_y); }

std::optional<Span2> ray_rect(const Vec2& o, const Vec2& d, const OrientedRect& r) {
  const double c = std::cos(r.yaw), s = std::sin(r.yaw);
  const Vec2 lo(c * (o.x() - r.cx) + s * (o.y() - r.cy), -s * (o.x() - r.cx) + c * (o.y() - r.cy));
  const Vec2 ld(c * d.x() + s * d.y(), -s * d.x() + c * d.y());
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  const double half[2] = {r.half_x, r.half_y};
  for (int a = 0; a < 2; ++a) {
    if (std::abs(ld[a]) < 1e-15) {
      if (std::abs(lo[a]) > half[a]) return std::nullopt;
      continue;
    }
    double ta = (-half[a] - lo[a]) / ld[a], tb = (half[a] - lo[a]) / ld[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return Span2{t0, t1};
}

std::optional<Span2> ray_circle(const Vec2& o, const Vec2& d, const Vec2& c, double radius) {
  const Vec2 m = o - c;
  const double a = d.squaredNorm();
  if (a < 1e-30) {
    if (m.norm() <= radius) return Span2{0.0, std::numeric_limits<double>::infinity()};
    return std::nullopt;
  }
  const double b = m.dot(d), cc = m.squaredNorm() - radius * radius;
  const double disc = b * b - a * cc;
  if (disc < 0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t0 = (-b - sq) / a, t1 = (-b + sq) / a;
  if (t1 < 0) return std::nullopt;
  return Span2{std::max(0.0, t0), t1};
}

bool Trajectory::covers(double t) const {
  return !waypoints.empty() && t >= waypoints.front().time - 1e-12 && t <= waypoints.back().time + 1e-12;
}

Waypoint Trajectory::at(double t) const {
  if (!covers(t)) {
    fail(ErrorCode::TrajectoryOutOfRange, "time " + std::to_string(t) + " outside trajectory span");
  }
  if (waypoints.size() == 1 || t <= waypoints.front().time) return {t, waypoints.front().x, waypoints.front().y, waypoints.front().yaw};
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const Waypoint& a = waypoints[i - 1];
    const Waypoint& b = waypoints[i];
    if (t <= b.time) {
      const double span = b.time - a.time;
      const double u = span > 0 ? (t - a.time) / span : 1.0;
      return {t, a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), a.yaw + u * (b.yaw - a.yaw)};
    }
  }
  const Waypoint& last = waypoints.back();
  return {t, last.x, last.y, last.yaw};
}

Box Actor::box_at(double t) const {
  const Waypoint w = trajectory.at(t);
  return Box{id, OrientedRect{w.x, w.y, half_x, half_y, w.yaw}, z_bottom, height};
}

Cylinder Actor::cylinder_at(double t) const {
  const Waypoint w = trajectory.at(t);
  return Cylinder{id, w.x, w.y, half_x, z_bottom, height};
}

void SceneSpec::validate() const {
  std::set<int> ids{kBaseGroundId};
  auto claim = [&](int id) {
    if (id <= kBaseGroundId || !ids.insert(id).second) {
      fail(ErrorCode::InvalidArgument, "scene object ids must be unique and positive, got " + std::to_string(id));
    }
  };
  auto finite = [](std::initializer_list<double> vs) {
    for (double v : vs)
      if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "scene geometry must be finite");
  };
  auto rect_ok = [&](const OrientedRect& r) {
    finite({r.cx, r.cy, r.half_x, r.half_y, r.yaw});
    if (r.half_x <= 0 || r.half_y <= 0) fail(ErrorCode::InvalidArgument, "rectangle extents must be positive");
  };
  if (base_height) finite({*base_height});
  for (const auto& p : patches) { claim(p.id); rect_ok(p.area); finite({p.height}); }
  for (const auto& p : pits) {
    claim(p.id);
    rect_ok(p.area);
    finite({p.depth});
    if (p.depth <= 0) fail(ErrorCode::InvalidArgument, "pit depth must be positive");
  }
  for (const auto& b : boxes) {
    claim(b.id);
    rect_ok(b.footprint);
    finite({b.z_bottom, b.height});
    if (b.height <= 0) fail(ErrorCode::InvalidArgument, "box height must be positive");
  }
  for (const auto& c : cylinders) {
    claim(c.id);
    finite({c.cx, c.cy, c.radius, c.z_bottom, c.height});
    if (c.radius <= 0 || c.height <= 0) fail(ErrorCode::InvalidArgument, "cylinder size must be positive");
  }
  for (const auto& a : actors) {
    claim(a.id);
    finite({a.half_x, a.half_y, a.z_bottom, a.height});
    if (a.trajectory.waypoints.empty()) fail(ErrorCode::InvalidArgument, "actor without trajectory");
    for (std::size_t i = 0; i < a.trajectory.waypoints.size(); ++i) {
      const auto& w = a.trajectory.waypoints[i];
      finite({w.time, w.x, w.y, w.yaw});
      if (i > 0 && w.time < a.trajectory.waypoints[i - 1].time) {
        fail(ErrorCode::InvalidArgument, "actor waypoints must be time-ordered");
      }
    }
  }
}

std::optional<double> SceneSpec::terrain_height(double x, double y) const {
  std::optional<double> h = base_height;
  for (const auto& p : patches) {
    if (p.area.contains(x, y) && (!h || p.height > *h)) h = p.height;
  }
  if (!h) return std::nullopt;
  double depth = 0.0;
  for (const auto& p : pits) {
    if (p.area.contains(x, y)) depth = std::max(depth, p.depth);
  }
  return *h - depth;
}

int SceneSpec::terrain_id(double x, double y) const {
  int best_pit = -1;
  double depth = 0.0;
  for (const auto& p : pits) {
    if (p.area.contains(x, y) && p.depth > depth) {
      depth = p.depth;
      best_pit = p.id;
    }
  }
  int id = base_height ? kBaseGroundId : kVoidId;
  std::optional<double> h = base_height;
  for (const auto& p : patches) {
    if (p.area.contains(x, y) && (!h || p.height > *h)) {
      h = p.height;
      id = p.id;
    }
  }
  if (id == kVoidId) return kVoidId;
  return best_pit >= 0 ? best_pit : id;
}

ObjectClass SceneSpec::class_of(int id) const {
  if (id == kBaseGroundId) return ObjectClass::Ground;
  for (const auto& p : patches) if (p.id == id) return ObjectClass::Patch;
  for (const auto& p : pits) if (p.id == id) return ObjectClass::Pit;
  for (const auto& b : boxes) if (b.id == id) return ObjectClass::Box;
  for (const auto& c : cylinders) if (c.id == id) return ObjectClass::Cylinder;
  for (const auto& a : actors) if (a.id == id) return ObjectClass::Actor;
  return ObjectClass::Unknown;
}

int SceneSpec::next_free_id() const {
  int m = kBaseGroundId;
  for (const auto& p : patches) m = std::max(m, p.id);
  for (const auto& p : pits) m = std::max(m, p.id);
  for (const auto& b : boxes) m = std::max(m, b.id);
  for (const auto& c : cylinders) m = std::max(m, c.id);
  for (const auto& a : actors) m = std::max(m, a.id);
  return m + 1;
}

namespace {

OrientedRect rotate_rect(const OrientedRect& r, double c, double s, double angle) {
  return {c * r.cx - s * r.cy, s * r.cx + c * r.cy, r.half_x, r.half_y, r.yaw + angle};
}

}  // namespace

SceneSpec SceneSpec::rotated(double angle) const {
  const double c = std::cos(angle), s = std::sin(angle);
  SceneSpec out = *this;
  for (auto& p : out.patches) p.area = rotate_rect(p.area, c, s, angle);
  for (auto& p : out.pits) p.area = rotate_rect(p.area, c, s, angle);
  for (auto& b : out.boxes) b.footprint = rotate_rect(b.footprint, c, s, angle);
  for (auto& cy : out.cylinders) {
    const double x = cy.cx, y = cy.cy;
    cy.cx = c * x - s * y;
    cy.cy = s * x + c * y;
  }
  for (auto& a : out.actors) {
    for (auto& w : a.trajectory.waypoints) {
      const double x = w.x, y = w.y;
      w.x = c * x - s * y;
      w.y = s * x + c * y;
      w.yaw += angle;
    }
  }
  return out;
}

Category category_of(ObjectClass c) {
  switch (c) {
    case ObjectClass::Cylinder: return Category::Thin;
    case ObjectClass::Actor: return Category::Dynamic;
    case ObjectClass::Pit: return Category::Negative;
    default: return Category::Others;
  }
}

// ---------------------------------------------------------------- JSON

namespace {

json rect_json(const OrientedRect& r) {
  return {{"cx", r.cx}, {"cy", r.cy}, {"half_x", r.half_x}, {"half_y", r.half_y}, {"yaw", r.yaw}};
}

OrientedRect rect_from(const json& j) {
  return {j.at("cx").get<double>(), j.at("cy").get<double>(), j.at("half_x").get<double>(),
          j.at("half_y").get<double>(), j.at("yaw").get<double>()};
}

}  // namespace

std::string scene_to_json(const SceneSpec& scene) {
  json j;
  j["format"] = "cad-scene";
  j["version"] = 1;
  j["seed"] = scene.seed;
  j["base_height"] = scene.base_height ? json(*scene.base_height) : json(nullptr);
  j["patches"] = json::array();
  for (const auto& p : scene.patches) j["patches"].push_back({{"id", p.id}, {"area", rect_json(p.area)}, {"height", p.height}});
  j["pits"] = json::array();
  for (const auto& p : scene.pits) j["pits"].push_back({{"id", p.id}, {"area", rect_json(p.area)}, {"depth", p.depth}});
  j["boxes"] = json::array();
  for (const auto& b : scene.boxes) {
    j["boxes"].push_back({{"id", b.id}, {"footprint", rect_json(b.footprint)}, {"z_bottom", b.z_bottom}, {"height", b.height}});
  }
  j["cylinders"] = json::array();
  for (const auto& c : scene.cylinders) {
    j["cylinders"].push_back({{"id", c.id}, {"cx", c.cx}, {"cy", c.cy}, {"radius", c.radius},
                              {"z_bottom", c.z_bottom}, {"height", c.height}});
  }
  j["actors"] = json::array();
  for (const auto& a : scene.actors) {
    json traj = json::array();
    for (const auto& w : a.trajectory.waypoints) traj.push_back({w.time, w.x, w.y, w.yaw});
    j["actors"].push_back({{"id", a.id}, {"shape", a.shape == ActorShape::Box ? "box" : "cylinder"},
                           {"half_x", a.half_x}, {"half_y", a.half_y}, {"z_bottom", a.z_bottom},
                           {"height", a.height}, {"trajectory", traj}});
  }
  return j.dump();
}

SceneSpec scene_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "cad-scene" || j.at("version") != 1) fail(ErrorCode::MalformedFile, "not a cad-scene v1 document");
    SceneSpec s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.base_height = j.at("base_height").is_null() ? std::nullopt : std::optional<double>(j.at("base_height").get<double>());
    for (const auto& p : j.at("patches")) s.patches.push_back({p.at("id").get<int>(), rect_from(p.at("area")), p.at("height").get<double>()});
    for (const auto& p : j.at("pits")) s.pits.push_back({p.at("id").get<int>(), rect_from(p.at("area")), p.at("depth").get<double>()});
    for (const auto& b : j.at("boxes")) {
      s.boxes.push_back({b.at("id").get<int>(), rect_from(b.at("footprint")), b.at("z_bottom").get<double>(), b.at("height").get<double>()});
    }
    for (const auto& c : j.at("cylinders")) {
      s.cylinders.push_back({c.at("id").get<int>(), c.at("cx").get<double>(), c.at("cy").get<double>(),
                             c.at("radius").get<double>(), c.at("z_bottom").get<double>(), c.at("height").get<double>()});
    }
    for (const auto& a : j.at("actors")) {
      Actor actor;
      actor.id = a.at("id").get<int>();
      const auto shape = a.at("shape").get<std::string>();
      if (shape != "box" && shape != "cylinder") fail(ErrorCode::MalformedFile, "unknown actor shape " + shape);
      actor.shape = shape == "box" ? ActorShape::Box : ActorShape::Cylinder;
      actor.half_x = a.at("half_x").get<double>();
      actor.half_y = a.at("half_y").get<double>();
      actor.z_bottom = a.at("z_bottom").get<double>();
      actor.height = a.at("height").get<double>();
      for (const auto& w : a.at("trajectory")) {
        if (!w.is_array() || w.size() != 4) fail(ErrorCode::MalformedFile, "waypoint must be [t, x, y, yaw]");
        actor.trajectory.waypoints.push_back({w[0].get<double>(), w[1].get<double>(), w[2].get<double>(), w[3].get<double>()});
      }
      s.actors.push_back(std::move(actor));
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedFile, std::string("scene JSON: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) fail(ErrorCode::MalformedFile, e.what());
    throw;
  }
}

bool SceneSpec::operator==(const SceneSpec& other) const { return scene_to_json(*this) == scene_to_json(other); }

}  // namespace cad::sim
