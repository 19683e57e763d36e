#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cad/ad/graph.hpp"

namespace cad::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  std::size_t worst_input = 0;
  Index worst_entry = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Entries whose gradient magnitude is below floor_ratio times the largest
  // gradient are compared against that floor instead of their own size.
  double floor_ratio = 1e-3;
  // 0 checks every entry; otherwise an evenly strided subset per input.
  Index max_entries_per_input = 0;
};

// Central-difference check of a scalar function of the given leaves. `fn`
// must rebuild its graph from the leaves' current values on every call.
inline GradCheckResult grad_check(const std::function<Var<double>()>& fn, const std::vector<Var<double>>& leaves,
                                  const GradCheckOptions& opts = {}) {
  for (Var<double> l : leaves) l.zero_grad();
  Var<double> out = fn();
  backward(out);

  std::vector<Tensor<double>> analytic;
  double scale = 0.0;
  for (Var<double> l : leaves) {
    analytic.push_back(l.grad());
    scale = std::max(scale, l.grad().array().abs().maxCoeff());
  }
  const double floor = std::max(1e-12, opts.floor_ratio * scale);

  GradCheckResult result;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    Var<double> l = leaves[k];
    const Index n = l.size();
    const Index stride =
        opts.max_entries_per_input > 0 ? std::max<Index>(1, n / opts.max_entries_per_input) : 1;
    for (Index i = 0; i < n; i += stride) {
      double& x = l.mutable_value()[i];
      const double saved = x;
      x = saved + opts.epsilon;
      const double up = fn().item();
      x = saved - opts.epsilon;
      const double down = fn().item();
      x = saved;
      const double numeric = (up - down) / (2.0 * opts.epsilon);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.entries_checked;
      if (rel > result.max_rel_error || result.entries_checked == 1) {
        result.max_rel_error = rel;
        result.worst_input = k;
        result.worst_entry = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

// Convenience form: the function receives fresh leaves built from `inputs`.
inline GradCheckResult grad_check(const std::function<Var<double>(const std::vector<Var<double>>&)>& fn,
                                  const std::vector<Tensor<double>>& inputs, const GradCheckOptions& opts = {}) {
  std::vector<Var<double>> leaves;
  for (const auto& t : inputs) leaves.push_back(leaf(t));
  return grad_check([&] { return fn(leaves); }, leaves, opts);
}

}  // namespace cad::ad
