#include "cad/eval/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include <json.hpp>

#include "cad/core/error.hpp"

namespace cad::eval {

namespace {

void require_same(const CadProfile& pred, const CadProfile& gt, const PolarGridSpec& spec) {
  pred.validate(spec);
  gt.validate(spec);
}

}  // namespace

std::vector<double> direction_errors(const CadProfile& pred, const CadProfile& gt, const PolarGridSpec& spec) {
  require_same(pred, gt, spec);
  std::vector<double> e(static_cast<std::size_t>(spec.n_phi));
  for (int j = 0; j < spec.n_phi; ++j) {
    e[j] = std::abs(depth_of_bin(spec, pred.depth_index[j]) - depth_of_bin(spec, gt.depth_index[j]));
  }
  return e;
}

double mae(const CadProfile& pred, const CadProfile& gt, const PolarGridSpec& spec) {
  const auto e = direction_errors(pred, gt, spec);
  double s = 0.0;
  for (double v : e) s += v;
  return s / static_cast<double>(e.size());
}

double accuracy_at(const CadProfile& pred, const CadProfile& gt, const PolarGridSpec& spec, double threshold) {
  const auto e = direction_errors(pred, gt, spec);
  const auto ok = std::count_if(e.begin(), e.end(), [&](double v) { return v <= threshold; });
  return static_cast<double>(ok) / static_cast<double>(e.size());
}

double worst_k(std::vector<double> errors, int k) {
  if (k <= 0) fail(ErrorCode::InvalidArgument, "worst_k needs k >= 1");
  if (errors.size() < static_cast<std::size_t>(k)) {
    fail(ErrorCode::InsufficientData,
         "worst_k: " + std::to_string(errors.size()) + " errors for k = " + std::to_string(k));
  }
  std::partial_sort(errors.begin(), errors.begin() + k, errors.end(), std::greater<>());
  double s = 0.0;
  for (int i = 0; i < k; ++i) s += errors[i];
  return s / k;
}

IhdCount ihd(const CadProfile& pred, const CadProfile& gt, std::span<const PointFrame> frames,
             const PolarGridSpec& spec, double epsilon, double threshold) {
  require_same(pred, gt, spec);
  // Radial distances of historical dynamic points, per direction.
  std::vector<std::vector<double>> dyn(static_cast<std::size_t>(spec.n_phi));
  for (std::size_t k = 1; k < frames.size(); ++k) {
    const PointFrame& f = frames[k];
    if (!f.tags) fail(ErrorCode::MissingTags, "historical frame " + std::to_string(k) + " carries no point tags");
    for (std::size_t i = 0; i < f.points.size(); ++i) {
      if (!(*f.tags)[i].dynamic) continue;
      const auto idx = bin_point(spec, f.points[i]);
      if (idx) dyn[idx->phi_bin].push_back(std::hypot(f.points[i].x, f.points[i].y));
    }
  }
  IhdCount out;
  for (int j = 0; j < spec.n_phi; ++j) {
    const double g = depth_of_bin(spec, gt.depth_index[j]);
    const double p = depth_of_bin(spec, pred.depth_index[j]);
    bool eligible = false, hit = false;
    for (double r : dyn[j]) {
      if (r >= g) continue;
      eligible = true;
      hit = hit || std::abs(p - r) <= epsilon;
    }
    if (!eligible) continue;
    ++out.eligible;
    if (hit && std::abs(p - g) > threshold) ++out.count;
  }
  return out;
}

std::vector<Category> categorize_directions(const CadProfile& gt) {
  if (!gt.categories) fail(ErrorCode::MissingTags, "ground truth carries no direction categories");
  return *gt.categories;
}

Evaluator::Evaluator(PolarGridSpec spec, double threshold, double ihd_epsilon) : spec_(spec) {
  spec_.validate();
  acc_.threshold = threshold;
  acc_.ihd_epsilon = ihd_epsilon;
}

void Evaluator::add(const CadProfile& pred, const CadProfile& gt, std::span<const PointFrame> frames) {
  const auto e = direction_errors(pred, gt, spec_);
  const bool categorized = gt.categories.has_value();
  any_uncategorized_ = any_uncategorized_ || !categorized;
  for (int j = 0; j < spec_.n_phi; ++j) {
    const bool ok = e[j] <= acc_.threshold;
    for (int slot : {0, categorized ? 1 + static_cast<int>((*gt.categories)[j]) : -1}) {
      if (slot < 0) continue;
      acc_.stats[slot].error_sum += e[j];
      acc_.stats[slot].correct += ok;
      acc_.stats[slot].directions += 1;
    }
    confidence_sum_ += pred.confidence[j];
    ++confidence_count_;
  }
  errors_.insert(errors_.end(), e.begin(), e.end());
  if (frames.size() > 1) {
    const IhdCount c = ihd(pred, gt, frames, spec_, acc_.ihd_epsilon, acc_.threshold);
    acc_.ihd.count += c.count;
    acc_.ihd.eligible += c.eligible;
  }
  ++acc_.samples;
}

EvalReport Evaluator::report() const {
  EvalReport r = acc_;
  r.categorized = r.samples > 0 && !any_uncategorized_;
  if (errors_.size() >= 5) r.worst_5 = worst_k(errors_, 5);
  if (errors_.size() >= 20) r.worst_20 = worst_k(errors_, 20);
  r.mean_confidence = confidence_count_ ? confidence_sum_ / confidence_count_ : 0.0;
  return r;
}

namespace {

constexpr std::array<const char*, 5> kColumns{"Total", "Thin", "Dynamic", "Negative", "Others"};

}  // namespace

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["samples"] = samples;
  j["threshold_m"] = threshold;
  j["worst_k_pooling"] = "per-direction errors pooled over all samples";
  j["ihd_epsilon_m"] = ihd_epsilon;
  j["mean_confidence"] = mean_confidence;
  j["worst_5_m"] = worst_5 ? nlohmann::json(*worst_5) : nlohmann::json(nullptr);
  j["worst_20_m"] = worst_20 ? nlohmann::json(*worst_20) : nlohmann::json(nullptr);
  j["ihd"] = {{"count", ihd.count}, {"eligible", ihd.eligible}, {"ratio", ihd.ratio()}};
  const std::size_t n = categorized ? stats.size() : 1;
  for (std::size_t c = 0; c < n; ++c) {
    j["categories"][kColumns[c]] = {{"mae_m", stats[c].mae()},
                                    {"accuracy", stats[c].accuracy()},
                                    {"directions", stats[c].directions}};
  }
  return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
  const std::size_t n = categorized ? stats.size() : 1;
  std::string out;
  char buf[160];
  auto row = [&](const char* name, auto&& cell) {
    std::snprintf(buf, sizeof(buf), "%-12s", name);
    out += buf;
    for (std::size_t c = 0; c < n; ++c) out += cell(c);
    out += "\n";
  };
  row("", [&](std::size_t c) {
    std::snprintf(buf, sizeof(buf), "%10s", kColumns[c]);
    return std::string(buf);
  });
  row("MAE (m)", [&](std::size_t c) {
    std::snprintf(buf, sizeof(buf), "%10.3f", stats[c].mae());
    return std::string(buf);
  });
  row("Acc (%)", [&](std::size_t c) {
    std::snprintf(buf, sizeof(buf), "%10.2f", 100.0 * stats[c].accuracy());
    return std::string(buf);
  });
  row("Dirs", [&](std::size_t c) {
    std::snprintf(buf, sizeof(buf), "%10ld", stats[c].directions);
    return std::string(buf);
  });
  auto opt = [&](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    std::snprintf(buf, sizeof(buf), "%.3f", *v);
    return std::string(buf);
  };
  out += "Worst-5 (m) " + opt(worst_5) + "   Worst-20 (m) " + opt(worst_20) + "\n";
  std::snprintf(buf, sizeof(buf), "IHD %d/%d (%.2f%%)", ihd.count, ihd.eligible, 100.0 * ihd.ratio());
  out += buf;
  std::snprintf(buf, sizeof(buf), "   mean confidence %.2f%%   samples %d\n", 100.0 * mean_confidence, samples);
  out += buf;
  std::snprintf(buf, sizeof(buf), "threshold %.2f m, IHD epsilon %.2f m, Worst-K pooled over directions\n",
                threshold, ihd_epsilon);
  out += buf;
  return out;
}

}  // namespace cad::eval
