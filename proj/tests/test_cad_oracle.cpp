#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cad/core/error.hpp"
#include "cad/oracle/cad_oracle.hpp"
#include "cad/sim/lidar_sim.hpp"

namespace cad::oracle {
namespace {

using sim::SceneSpec;

const Pose kEgo = Pose::from_yaw(0.0, Vector3(0, 0, 0.8));

sim::LidarModel survey() {
  sim::LidarModel m = sim::LidarModel::survey(0.15, 13.0, 0.5);
  m.noise_sigma = 0.005;
  return m;
}

std::vector<PointFrame> aggregate(const SceneSpec& scene, const sim::LidarModel& m) {
  return sim::survey_scans(scene, m, kEgo, {0.6, 5.0, 9.0}, 8, 0.0, 1);
}

SceneSpec wall_scene(double x) {
  SceneSpec s;
  s.boxes.push_back({1, sim::OrientedRect{x + 0.1, 0, 0.1, 30, 0}, 0, 2});
  return s;
}

struct Agreement {
  int covered = 0, agree = 0;
};

Agreement compare(const SceneSpec& scene, const PolarGridSpec& spec) {
  const TraversabilityRules rules;
  const CadProfile truth = label_from_scene(scene, kEgo, spec, rules);
  const auto frames = aggregate(scene, survey());
  const CadProfile est = label_from_points(frames, spec, rules);
  const auto counts = pillar_point_counts(frames, spec);
  Agreement a;
  for (int j = 0; j < spec.n_phi; ++j) {
    if (!direction_covered(counts, spec, j, truth.depth_index[j])) continue;
    ++a.covered;
    if (std::abs(truth.depth_index[j] - est.depth_index[j]) <= 1) ++a.agree;
  }
  return a;
}

TEST(RulesTest, Validation) {
  EXPECT_NO_THROW(TraversabilityRules{}.validate());
  TraversabilityRules r;
  r.h_neg = 0.05;
  EXPECT_THROW(r.validate(), Error);
  r = {};
  r.g_max = 0;
  EXPECT_THROW(r.validate(), Error);
}

TEST(SceneOracleTest, BareGroundIsFullRange) {
  const PolarGridSpec spec = PolarGridSpec::full();
  const SceneLabel l = label_scene(SceneSpec{}, kEgo, spec, {});
  for (int j = 0; j < spec.n_phi; ++j) {
    EXPECT_EQ(l.profile.depth_index[j], spec.n_r - 1);
    EXPECT_EQ(l.terminator[j], -1);
  }
  EXPECT_TRUE(l.profile.labeled);
  EXPECT_NO_THROW(l.profile.validate(spec));
}

TEST(SceneOracleTest, WallAtFiveMetres) {
  const PolarGridSpec spec = PolarGridSpec::full();
  const SceneLabel l = label_scene(wall_scene(5.0), kEgo, spec, {});
  EXPECT_EQ(l.profile.depth_index[0], 42);
  EXPECT_NEAR(depth_of_bin(spec, l.profile.depth_index[0]), 5.0, spec.r_width());
  EXPECT_DOUBLE_EQ(l.distance[0], 5.0);
  // Oblique sectors see the wall further away: distance 5 / cos(phi_lo).
  for (int j = 1; j < 40; ++j) EXPECT_NEAR(l.distance[j], 5.0 / std::cos(j * spec.phi_width()), 1e-9);
  EXPECT_EQ(l.distance[spec.n_phi - 1], 5.0);
  EXPECT_EQ(l.terminator[0], 1);
  EXPECT_EQ((*l.profile.categories)[0], Category::Others);
  // Behind the ego there is nothing.
  EXPECT_EQ(l.profile.depth_index[spec.n_phi / 2], spec.n_r - 1);
}

TEST(SceneOracleTest, PitEdgeAtThreeMetres) {
  const PolarGridSpec spec = PolarGridSpec::full();
  SceneSpec s;
  s.pits.push_back({4, sim::OrientedRect{3.5, 0, 0.5, 1.0, 0}, 0.5});
  const SceneLabel l = label_scene(s, kEgo, spec, {});
  EXPECT_EQ(l.profile.depth_index[0], static_cast<int>(3.0 / spec.r_width()));
  EXPECT_NEAR(depth_of_bin(spec, l.profile.depth_index[0]), 3.0, spec.r_width());
  EXPECT_EQ((*l.profile.categories)[0], Category::Negative);
}

TEST(SceneOracleTest, ShallowPitAndLowBoxAreTraversable) {
  const PolarGridSpec spec = PolarGridSpec::desk();
  SceneSpec s;
  s.pits.push_back({1, sim::OrientedRect{3, 0, 0.5, 0.5, 0}, 0.1});
  s.boxes.push_back({2, sim::OrientedRect{-3, 0, 0.5, 0.5, 0}, 0, 0.1});
  // Overhang above the vehicle clearance.
  s.boxes.push_back({3, sim::OrientedRect{0, 3, 0.5, 0.5, 0}, 1.7, 1.0});
  const CadProfile p = label_from_scene(s, kEgo, spec, {});
  for (int d : p.depth_index) EXPECT_EQ(d, spec.n_r - 1);
}

TEST(SceneOracleTest, ThinCylinderSeenAnywhereInSector) {
  const PolarGridSpec spec = PolarGridSpec::desk();
  SceneSpec s;
  // Pole near the middle of sector 2 at 10 m, far from any sector edge ray.
  const double a = spec.phi_center(2);
  s.cylinders.push_back({5, 10 * std::cos(a), 10 * std::sin(a), 0.03, 0, 1.5});
  const SceneLabel l = label_scene(s, kEgo, spec, {});
  EXPECT_NEAR(l.distance[2], 9.97, 1e-12);
  EXPECT_EQ((*l.profile.categories)[2], Category::Thin);
  EXPECT_EQ(l.profile.depth_index[1], spec.n_r - 1);
  EXPECT_EQ(l.profile.depth_index[3], spec.n_r - 1);
}

TEST(SceneOracleTest, ActorUsesCurrentPosition) {
  const PolarGridSpec spec = PolarGridSpec::desk();
  SceneSpec s;
  sim::Actor a;
  a.id = 7;
  a.trajectory.waypoints = {{-10, 4, -10, 0}, {1, 4, 1, 0}};
  s.actors.push_back(a);
  const SceneLabel now = label_scene(s, kEgo, spec, {}, 0.0);
  EXPECT_NEAR(now.distance[0], 4.0 - 0.3, 1e-9);
  EXPECT_EQ((*now.profile.categories)[0], Category::Dynamic);
  const SceneLabel before = label_scene(s, kEgo, spec, {}, -5.0);
  EXPECT_EQ(before.profile.depth_index[0], spec.n_r - 1);
}

TEST(SceneOracleTest, CliffEdgeIsNegative) {
  const PolarGridSpec spec = PolarGridSpec::desk();
  SceneSpec s;
  s.base_height.reset();
  s.patches.push_back({1, sim::OrientedRect{-46, 0, 50, 50, 0}, 0.0});
  const SceneLabel l = label_scene(s, kEgo, spec, {});
  EXPECT_DOUBLE_EQ(l.distance[0], 4.0);
  EXPECT_EQ((*l.profile.categories)[0], Category::Negative);
  EXPECT_EQ(l.profile.depth_index[spec.n_phi / 2], spec.n_r - 1);
}

TEST(SceneOracleTest, EgoBlocked) {
  SceneSpec s;
  s.boxes.push_back({1, sim::OrientedRect{0.2, 0, 0.5, 0.5, 0}, 0, 1});
  try {
    label_from_scene(s, kEgo, PolarGridSpec::desk(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EgoBlocked);
  }
  SceneSpec v;
  v.base_height.reset();
  EXPECT_THROW(label_from_scene(v, kEgo, PolarGridSpec::desk(), {}), Error);
}

TEST(SceneOracleTest, EgoPoseMovesTheGrid) {
  const PolarGridSpec spec = PolarGridSpec::full();
  // Ego at (2, 0) facing +y: the wall at x=5 lies to its right (phi = -90 deg).
  const SceneLabel l = label_scene(wall_scene(5.0), Pose::from_yaw(kTwoPi / 4, Vector3(2, 0, 0.8)), spec, {});
  EXPECT_DOUBLE_EQ(l.distance[spec.n_phi * 3 / 4], 3.0);
}

TEST(SceneOracleTest, AddingObstaclesNeverIncreasesDepth) {
  const PolarGridSpec spec = PolarGridSpec::desk();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-11, 11), size(0.05, 1.5), ang(0, kTwoPi);
  int trials = 0;
  for (std::uint64_t seed = 0; trials < 60; ++seed) {
    const SceneSpec base = sim::sample_random_scene(seed, sim::DifficultyProfile::desk());
    const CadProfile before = label_from_scene(base, kEgo, spec, {});
    SceneSpec more = base;
    const int id = more.next_free_id();
    switch (seed % 3) {
      case 0: more.boxes.push_back({id, sim::OrientedRect{u(rng), u(rng), size(rng), size(rng), ang(rng)}, 0, 1}); break;
      case 1: more.cylinders.push_back({id, u(rng), u(rng), size(rng) / 5, 0, 1}); break;
      default: more.pits.push_back({id, sim::OrientedRect{u(rng), u(rng), size(rng), size(rng), ang(rng)}, 0.5});
    }
    CadProfile after;
    try {
      after = label_from_scene(more, kEgo, spec, {});
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::EgoBlocked);
      continue;
    }
    for (int j = 0; j < spec.n_phi; ++j) EXPECT_LE(after.depth_index[j], before.depth_index[j]);
    ++trials;
  }
}

TEST(SceneOracleTest, RotationShiftsProfile) {
  const PolarGridSpec spec = PolarGridSpec::desk();
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> shift(1, spec.n_phi - 1);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const SceneSpec s = sim::sample_random_scene(seed, sim::DifficultyProfile::dense());
    const int k = shift(rng);
    const SceneLabel a = label_scene(s, kEgo, spec, {});
    const SceneLabel b = label_scene(s.rotated(k * spec.phi_width()), kEgo, spec, {});
    for (int j = 0; j < spec.n_phi; ++j) {
      const int jj = (j + k) % spec.n_phi;
      if (std::isinf(a.distance[j])) {
        EXPECT_TRUE(std::isinf(b.distance[jj]));
        continue;
      }
      EXPECT_NEAR(b.distance[jj], a.distance[j], 1e-9);
      const double frac = a.distance[j] / spec.r_width();
      if (std::abs(frac - std::round(frac)) > 1e-7) {
        EXPECT_EQ(b.profile.depth_index[jj], a.profile.depth_index[j]);
      }
      EXPECT_EQ(b.terminator[jj], a.terminator[j]);
    }
  }
}

TEST(SceneOracleTest, DistancesMatchFineRayMarch) {
  // Independent oracle: march many rays per sector with a small step and
  // test membership directly.
  const PolarGridSpec spec = PolarGridSpec::desk();
  const TraversabilityRules rules;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const SceneSpec s = sim::sample_random_scene(seed, sim::DifficultyProfile::dense());
    const SceneLabel l = label_scene(s, kEgo, spec, rules);
    auto blocked = [&](double x, double y) {
      const auto h = s.terrain_height(x, y);
      if (!h || *h - 0.0 > rules.h_obs || *h < -rules.h_neg) return true;
      for (const auto& b : s.boxes) if (b.footprint.contains(x, y)) return true;
      for (const auto& c : s.cylinders) if (std::hypot(x - c.cx, y - c.cy) <= c.radius) return true;
      for (const auto& a : s.actors) {
        if (a.shape == sim::ActorShape::Box ? a.box_at(0).footprint.contains(x, y)
                                            : std::hypot(x - a.cylinder_at(0).cx, y - a.cylinder_at(0).cy) <= a.half_x) {
          return true;
        }
      }
      return false;
    };
    for (int j = 0; j < spec.n_phi; ++j) {
      double march = std::numeric_limits<double>::infinity();
      for (int q = 0; q <= 60; ++q) {
        const double a = (j + q / 60.0) * spec.phi_width();
        for (double r = 0.0; r < spec.max_radius + 0.5; r += 0.01) {
          if (blocked(r * std::cos(a), r * std::sin(a))) {
            march = std::min(march, r);
            break;
          }
        }
      }
      if (std::isinf(march)) {
        EXPECT_GE(l.distance[j], spec.max_radius);
      } else {
        // The march under-samples the sector, so it can only overestimate.
        EXPECT_LE(l.distance[j], march + 1e-9);
        EXPECT_GT(l.distance[j], march - 0.35) << "seed " << seed << " sector " << j;
      }
    }
  }
}

TEST(PointOracleTest, FlatGroundIsFullRange) {
  const PolarGridSpec spec = PolarGridSpec::desk();
  const auto frames = aggregate(SceneSpec{}, survey());
  const CadProfile p = label_from_points(frames, spec, {});
  for (int d : p.depth_index) EXPECT_EQ(d, spec.n_r - 1);
}

TEST(PointOracleTest, NoGroundReference) {
  std::vector<PointFrame> frames(1);
  frames[0].points = {{10, 0, -0.8, 0.5}};
  try {
    label_from_points(frames, PolarGridSpec::desk(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoGroundReference);
  }
}

TEST(PointOracleTest, HandBuiltPillars) {
  const PolarGridSpec spec = PolarGridSpec::desk();
  std::vector<PointFrame> frames(2);
  frames[1].frame_index = 1;
  const double w = spec.r_width();
  for (int j = 0; j < spec.n_phi; ++j) {
    const double a = spec.phi_center(j);
    for (int i = 0; i < spec.n_r; ++i) {
      const double r = (i + 0.5) * w;
      double z = -0.8;
      if (j == 0 && i == 10) z = -0.5;  // obstruction
      if (j == 1 && i == 12) z = -1.2;  // drop
      if (j == 2 && i >= 6 && i <= 7) continue;  // short gap, 2 bins = 0.75 m > g_max
      if (j == 3 && i == 6) continue;            // single empty bin is tolerated
      frames[0].points.push_back({r * std::cos(a), r * std::sin(a), z, 0.5});
    }
  }
  // Historical dynamic points must not block; current ones must.
  const double a4 = spec.phi_center(4), a5 = spec.phi_center(5);
  frames[1].points = {{5.0 * std::cos(a4), 5.0 * std::sin(a4), 0.0, 0.5}};
  frames[1].tags = std::vector<PointTag>{{9, true}};
  frames[0].points.push_back({6.0 * std::cos(a5), 6.0 * std::sin(a5), 0.0, 0.5});
  std::vector<PointTag> tags(frames[0].points.size());
  tags.back() = {9, true};
  frames[0].tags = tags;

  const CadProfile p = label_from_points(frames, spec, {});
  EXPECT_EQ(p.depth_index[0], 10);
  EXPECT_EQ(p.depth_index[1], 12);
  EXPECT_EQ(p.depth_index[2], 5);
  EXPECT_EQ(p.depth_index[3], spec.n_r - 1);
  EXPECT_EQ(p.depth_index[4], spec.n_r - 1);
  EXPECT_EQ(p.depth_index[5], static_cast<int>(6.0 / w));
  EXPECT_EQ(p.depth_index[6], spec.n_r - 1);
}

TEST(PointOracleTest, WallCrossOracleAgreement) {
  const PolarGridSpec spec = PolarGridSpec::full();
  const Agreement a = compare(wall_scene(5.0), spec);
  EXPECT_GT(a.covered, spec.n_phi / 4);
  EXPECT_GE(a.agree, 0.95 * a.covered) << a.agree << "/" << a.covered;
}

TEST(PointOracleTest, RandomSceneCrossOracleAgreement) {
  const PolarGridSpec spec = PolarGridSpec::desk();
  int covered = 0, agree = 0;
  for (std::uint64_t seed = 100; seed < 104; ++seed) {
    const Agreement a = compare(sim::sample_random_scene(seed, sim::DifficultyProfile::desk()), spec);
    covered += a.covered;
    agree += a.agree;
  }
  EXPECT_GT(covered, 100);
  EXPECT_GE(agree, 0.95 * covered) << agree << "/" << covered;
}

TEST(PointOracleTest, HistoryRecoversPitInBlindSpot) {
  const PolarGridSpec spec = PolarGridSpec::desk();
  SceneSpec s;
  s.pits.push_back({1, sim::OrientedRect{2.4, 0, 0.6, 1.5, 0}, 0.6});
  sim::LidarModel m = sim::LidarModel::vlp16();
  m.noise_sigma = 0;
  const sim::SequenceSpec seq = sim::SequenceSpec::straight(4, 0.5, 1.5);
  const Sample sample = sim::generate_sequence(s, seq, m, 3);
  const auto aligned = sample.aligned();
  const TraversabilityRules rules;
  const int truth = label_from_scene(s, sample.frames[0].pose, spec, rules).depth_index[0];
  const int single = label_from_points(std::span(aligned).first(1), spec, rules).depth_index[0];
  const int multi = label_from_points(aligned, spec, rules).depth_index[0];
  EXPECT_LT(std::abs(multi - truth), std::abs(single - truth));
  EXPECT_LE(std::abs(multi - truth), 1);
}

}  // namespace
}  // namespace cad::oracle
