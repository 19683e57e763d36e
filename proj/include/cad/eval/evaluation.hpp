#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cad/core/geometry.hpp"

namespace cad::eval {

// Metric error per direction: |depth_of_bin(pred) - depth_of_bin(gt)|.
// Throws SpecMismatch.
std::vector<double> direction_errors(const CadProfile& pred, const CadProfile& gt, const PolarGridSpec& spec);

double mae(const CadProfile& pred, const CadProfile& gt, const PolarGridSpec& spec);
double accuracy_at(const CadProfile& pred, const CadProfile& gt, const PolarGridSpec& spec, double threshold = 0.5);

// Mean of the k largest errors. Throws InsufficientData when errors.size() < k.
double worst_k(std::vector<double> errors, int k);

struct IhdCount {
  int count = 0;
  int eligible = 0;
  double ratio() const { return eligible == 0 ? 0.0 : static_cast<double>(count) / eligible; }
};

// frames in current coordinates, current first; historical frames must carry
// tags. Throws MissingTags.
IhdCount ihd(const CadProfile& pred, const CadProfile& gt, std::span<const PointFrame> frames,
             const PolarGridSpec& spec, double epsilon = 0.3, double threshold = 0.5);

// Class of the terminating object per direction, as attached by the scene
// labeler. Throws MissingTags when gt carries no categories.
std::vector<Category> categorize_directions(const CadProfile& gt);

struct CategoryStats {
  double error_sum = 0.0;
  long correct = 0;
  long directions = 0;

  double mae() const { return directions ? error_sum / directions : 0.0; }
  double accuracy() const { return directions ? static_cast<double>(correct) / directions : 0.0; }
};

struct EvalReport {
  // Index 0 is the total; 1 + Category for the rest.
  std::array<CategoryStats, 1 + kCategoryCount> stats{};
  std::optional<double> worst_5, worst_20;
  IhdCount ihd;
  double mean_confidence = 0.0;
  int samples = 0;
  double threshold = 0.5;
  double ihd_epsilon = 0.3;
  bool categorized = false;

  const CategoryStats& total() const { return stats[0]; }
  const CategoryStats& of(Category c) const { return stats[1 + static_cast<int>(c)]; }

  std::string to_json() const;
  std::string to_table() const;
};

class Evaluator {
 public:
  explicit Evaluator(PolarGridSpec spec, double threshold = 0.5, double ihd_epsilon = 0.3);

  // frames (aligned, tagged) enable IHD; gt.categories enables the breakdown.
  void add(const CadProfile& pred, const CadProfile& gt, std::span<const PointFrame> frames = {});
  EvalReport report() const;

 private:
  PolarGridSpec spec_;
  EvalReport acc_;
  std::vector<double> errors_;
  double confidence_sum_ = 0.0;
  long confidence_count_ = 0;
  bool any_uncategorized_ = false;
};

}  // namespace cad::eval
