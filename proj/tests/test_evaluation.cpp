#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include <json.hpp>

#include "cad/core/error.hpp"
#include "cad/eval/evaluation.hpp"

namespace cad::eval {
namespace {

CadProfile profile(const std::vector<int>& d) {
  CadProfile p;
  p.depth_index = d;
  p.confidence.assign(d.size(), 0.5);
  p.labeled = true;
  return p;
}

CadProfile random_profile(const PolarGridSpec& g, std::mt19937_64& rng) {
  std::vector<int> d(static_cast<std::size_t>(g.n_phi));
  for (int& v : d) v = static_cast<int>(rng() % static_cast<std::uint64_t>(g.n_r));
  return profile(d);
}

TEST(MaeTest, ExactCases) {
  const PolarGridSpec g = PolarGridSpec::full();
  std::vector<int> a(384, 50), b(384, 51);
  EXPECT_EQ(mae(profile(a), profile(a), g), 0.0);
  EXPECT_NEAR(mae(profile(a), profile(b), g), 0.1171875, 1e-12);
  EXPECT_THROW(mae(profile(a), profile(std::vector<int>(48, 0)), g), Error);
}

TEST(MaeTest, MatchesBruteForce) {
  const PolarGridSpec g = PolarGridSpec::desk();
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const CadProfile p = random_profile(g, rng), q = random_profile(g, rng);
    double s = 0;
    for (int j = 0; j < g.n_phi; ++j) s += std::abs(p.depth_index[j] - q.depth_index[j]) * g.r_width();
    EXPECT_NEAR(mae(p, q, g), s / g.n_phi, 1e-12);
  }
}

TEST(AccuracyTest, ThresholdAtFullGrid) {
  const PolarGridSpec g = PolarGridSpec::full();
  std::vector<int> gt(384, 60), four(384, 64), five(384, 65);
  EXPECT_EQ(accuracy_at(profile(four), profile(gt), g), 1.0);
  EXPECT_EQ(accuracy_at(profile(five), profile(gt), g), 0.0);
  EXPECT_EQ(accuracy_at(profile(gt), profile(gt), g), 1.0);
}

TEST(AccuracyTest, MonotoneInThreshold) {
  const PolarGridSpec g = PolarGridSpec::desk();
  std::mt19937_64 rng(2);
  const CadProfile p = random_profile(g, rng), q = random_profile(g, rng);
  double last = -1;
  for (double t = 0; t < 13; t += 0.25) {
    const double a = accuracy_at(p, q, g, t);
    EXPECT_GE(a, last);
    last = a;
  }
  EXPECT_EQ(last, 1.0);
}

TEST(WorstKTest, Cases) {
  EXPECT_NEAR(worst_k({0.1, 0.2, 0.9, 1.5, 0.3}, 2), 1.2, 1e-15);
  EXPECT_NEAR(worst_k({0.7, 0.7, 0.7}, 3), 0.7, 1e-15);
  const std::vector<double> e{0.4, 0.1, 0.2, 0.9};
  EXPECT_NEAR(worst_k(e, 4), (0.4 + 0.1 + 0.2 + 0.9) / 4, 1e-15);
  double last = 1e9;
  for (int k = 1; k <= 4; ++k) {
    EXPECT_LE(worst_k(e, k), last);
    last = worst_k(e, k);
  }
  try {
    worst_k(e, 5);
    ADD_FAILURE();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::InsufficientData);
  }
}

PointFrame tagged_frame(int index, const std::vector<std::pair<Point3, bool>>& pts) {
  PointFrame f;
  f.frame_index = index;
  f.tags.emplace();
  for (const auto& [p, dyn] : pts) {
    f.points.push_back(p);
    f.tags->push_back({dyn ? 9 : 1, dyn});
  }
  return f;
}

TEST(IhdTest, RuleCases) {
  // 1 m bins, 8 directions; direction 0 covers azimuth [0, 45) deg.
  const PolarGridSpec g{16.0, -2.0, 1.0, 16, 8};
  const Point3 dyn_point{4.0 * std::cos(0.3), 4.0 * std::sin(0.3), -0.3, 0.5};
  const std::vector<PointFrame> frames{tagged_frame(0, {}), tagged_frame(1, {{dyn_point, true}})};
  std::vector<int> gt(8, 15), near(8, 15), far(8, 15);
  gt[0] = 9;    // 9.5 m
  near[0] = 3;  // 3.5 m, 0.5 m from the point: outside epsilon 0.3
  far[0] = 9;
  IhdCount c = ihd(profile(near), profile(gt), frames, g, 0.6);
  EXPECT_EQ(c.eligible, 1);
  EXPECT_EQ(c.count, 1);
  c = ihd(profile(near), profile(gt), frames, g, 0.3);
  EXPECT_EQ(c.count, 0);
  c = ihd(profile(far), profile(gt), frames, g, 0.6);
  EXPECT_EQ(c.count, 0);
  EXPECT_EQ(c.eligible, 1);
  // Dynamic point beyond the gt depth: not eligible.
  gt[0] = 2;
  EXPECT_EQ(ihd(profile(near), profile(gt), frames, g).eligible, 0);
}

TEST(IhdTest, NoDynamicAndMissingTags) {
  const PolarGridSpec g = PolarGridSpec::desk();
  const std::vector<PointFrame> frames{tagged_frame(0, {}), tagged_frame(1, {{{3, 0, -0.5, 0.5}, false}})};
  const CadProfile p = profile(std::vector<int>(48, 10));
  const IhdCount c = ihd(p, p, frames, g);
  EXPECT_EQ(c.count, 0);
  EXPECT_EQ(c.eligible, 0);
  EXPECT_EQ(c.ratio(), 0.0);
  std::vector<PointFrame> untagged = frames;
  untagged[1].tags.reset();
  try {
    ihd(p, p, untagged, g);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingTags);
  }
}

TEST(ReportTest, CategoryUnionAndJson) {
  const PolarGridSpec g = PolarGridSpec::desk();
  std::mt19937_64 rng(3);
  Evaluator ev(g);
  double sum = 0, conf = 0;
  long ok = 0, n = 0;
  for (int s = 0; s < 6; ++s) {
    CadProfile gt = random_profile(g, rng), pred = random_profile(g, rng);
    std::vector<Category> cats(48);
    for (auto& c : cats) c = static_cast<Category>(rng() % kCategoryCount);
    gt.categories = cats;
    for (auto& c : pred.confidence) c = 0.01 * static_cast<double>(rng() % 100);
    ev.add(pred, gt);
    const auto e = direction_errors(pred, gt, g);
    for (int j = 0; j < 48; ++j) {
      sum += e[j];
      ok += e[j] <= 0.5;
      conf += pred.confidence[j];
      ++n;
    }
  }
  const EvalReport r = ev.report();
  EXPECT_TRUE(r.categorized);
  EXPECT_EQ(r.samples, 6);
  EXPECT_NEAR(r.total().mae(), sum / n, 1e-12);
  EXPECT_NEAR(r.total().accuracy(), static_cast<double>(ok) / n, 1e-15);
  EXPECT_NEAR(r.mean_confidence, conf / n, 1e-12);
  double weighted = 0;
  long count = 0;
  for (int c = 0; c < kCategoryCount; ++c) {
    const auto& st = r.of(static_cast<Category>(c));
    weighted += st.mae() * st.directions;
    count += st.directions;
  }
  EXPECT_EQ(count, n);
  EXPECT_NEAR(weighted / count, r.total().mae(), 1e-12);
  ASSERT_TRUE(r.worst_5 && r.worst_20);
  EXPECT_GE(*r.worst_5, *r.worst_20);

  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["categories"].size(), 5u);
  const std::string table = r.to_table();
  for (const char* col : {"Total", "Thin", "Dynamic", "Negative", "Others"}) {
    EXPECT_NE(table.find(col), std::string::npos);
  }
}

TEST(CategorizeTest, UsesTerminatorClasses) {
  CadProfile gt = profile({1, 2, 31});
  try {
    categorize_directions(gt);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingTags);
  }
  gt.categories = std::vector<Category>{Category::Thin, Category::Negative, Category::Others};
  EXPECT_EQ(categorize_directions(gt), *gt.categories);
}

TEST(ReportTest, UncategorizedHasTotalOnly) {
  const PolarGridSpec g = PolarGridSpec::desk();
  Evaluator ev(g);
  const CadProfile p = profile(std::vector<int>(48, 4));
  ev.add(p, p);
  const EvalReport r = ev.report();
  EXPECT_FALSE(r.categorized);
  EXPECT_EQ(nlohmann::json::parse(r.to_json())["categories"].size(), 1u);
  EXPECT_EQ(r.total().mae(), 0.0);
  EXPECT_EQ(r.total().accuracy(), 1.0);
}

}  // namespace
}  // namespace cad::eval
