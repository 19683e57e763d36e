#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "cad/ad/ops.hpp"

namespace cad::train {

using ad::Index;
using ad::Shape;
using ad::Tensor;
using ad::Var;

inline constexpr double kLogFloor = 1e-12;

struct LossConfig {
  double alpha = 1.0;    // DisMSE weight in the supervised loss
  double beta = 0.01;    // variance weight in the unsupervised loss
  double lambda = 1.0;   // unsupervised balance
  double sigma1 = 0.04;  // CE schedule
  double mu1 = 250.0;
  double sigma2 = 0.1;  // variance schedule
  double mu2 = 100.0;
  double sigma_g = 9.0;  // distance-weight width, in bins
  int b = 8;             // entropy grouping

  // Throws ConfigError; n_r > 0 also checks that b divides it.
  void validate(int n_r = 0) const;
};

// 1 / (1 + exp(-sigma (t - mu))).
inline double schedule(double t, double sigma, double mu) { return 1.0 / (1.0 + std::exp(-sigma * (t - mu))); }
inline double w_ce(double t, const LossConfig& c) { return schedule(t, c.sigma1, c.mu1); }
inline double w_var(double t, const LossConfig& c) { return schedule(t, c.sigma2, c.mu2); }

inline double distance_weight(double d, double label, double sigma_g) {
  const double x = d - label;
  return 1.0 - std::exp(-x * x / (2.0 * sigma_g * sigma_g));
}

namespace detail {

inline void check_labels(const Shape& psi, const std::vector<int>& labels) {
  if (psi.size() != 2 || static_cast<Index>(labels.size()) != psi[1]) {
    fail(ErrorCode::ShapeMismatch, "labels do not match distribution " + ad::shape_str(psi));
  }
  for (int l : labels) {
    if (l < 0 || l >= psi[0]) fail(ErrorCode::ShapeMismatch, "label index out of range");
  }
}

inline void check_psi(const Shape& psi) {
  if (psi.size() != 2) fail(ErrorCode::ShapeMismatch, "distribution must be (n_r, n_phi), got " + ad::shape_str(psi));
}

template <typename T>
Tensor<T> one_hot(const std::vector<int>& labels, Index n_r) {
  const Index n_phi = static_cast<Index>(labels.size());
  Tensor<T> y(Shape{n_r, n_phi});
  for (Index j = 0; j < n_phi; ++j) y[labels[j] * n_phi + j] = T(1);
  return y;
}

// Constant (n_r, n_phi) tensor holding the depth index d in every row.
template <typename T>
Tensor<T> depth_grid(Index n_r, Index n_phi) {
  Tensor<T> t(Shape{n_r, n_phi});
  for (Index d = 0; d < n_r; ++d) t.matrix(n_r, n_phi).row(d).setConstant(static_cast<T>(d));
  return t;
}

}  // namespace detail

// (1/N_phi) sum_j sum_d g_jd (y_jd - psi_jd)^2.
template <typename T>
Var<T> dis_mse(const Var<T>& psi, const std::vector<int>& labels, double sigma_g) {
  detail::check_labels(psi.shape(), labels);
  const Index n_r = psi.dim(0), n_phi = psi.dim(1);
  Tensor<T> g(psi.shape());
  for (Index d = 0; d < n_r; ++d)
    for (Index j = 0; j < n_phi; ++j) g[d * n_phi + j] = static_cast<T>(distance_weight(d, labels[j], sigma_g));
  const Var<T> diff = ad::sub(ad::constant(detail::one_hot<T>(labels, n_r)), psi);
  return ad::scale(ad::sum(ad::mul(ad::constant(std::move(g)), ad::mul(diff, diff))), T(1) / n_phi);
}

// -(1/N_phi) sum_j sum_d y_jd log psi_jd.
template <typename T>
Var<T> ce_loss(const Var<T>& psi, const std::vector<int>& labels) {
  detail::check_labels(psi.shape(), labels);
  const Index n_r = psi.dim(0), n_phi = psi.dim(1);
  const Var<T> logp = ad::log_clamped(psi, static_cast<T>(kLogFloor));
  return ad::scale(ad::sum(ad::mul(ad::constant(detail::one_hot<T>(labels, n_r)), logp)), T(-1) / n_phi);
}

template <typename T>
Var<T> cad_loss(const Var<T>& psi, const std::vector<int>& labels, double t, const LossConfig& c) {
  return ad::add(ad::scale(dis_mse(psi, labels, c.sigma_g), static_cast<T>(c.alpha)),
                 ad::scale(ce_loss(psi, labels), static_cast<T>(w_ce(t, c))));
}

// (1/N_phi) sum_j sum_d (d - mean_j)^2 psi_jd.
template <typename T>
Var<T> var_loss(const Var<T>& psi) {
  detail::check_psi(psi.shape());
  const Index n_r = psi.dim(0), n_phi = psi.dim(1);
  const Var<T> depth = ad::constant(detail::depth_grid<T>(n_r, n_phi));
  const Var<T> mean = ad::sum_axis(ad::mul(depth, psi), 0);
  const Var<T> spread = ad::sub(depth, ad::concat(std::vector<Var<T>>(static_cast<std::size_t>(n_r), mean), 0));
  return ad::scale(ad::sum(ad::mul(ad::mul(spread, spread), psi)), T(1) / n_phi);
}

// Entropy of the distribution after summing adjacent groups of b bins,
// averaged over directions. Throws ConfigError when b does not divide n_r.
template <typename T>
Var<T> entropy_reg(const Var<T>& psi, int b) {
  detail::check_psi(psi.shape());
  const Index n_r = psi.dim(0), n_phi = psi.dim(1);
  if (b <= 0 || n_r % b != 0) fail(ErrorCode::ConfigError, "entropy grouping b must divide n_r");
  const Var<T> grouped = ad::sum_axis(ad::reshape(psi, Shape{n_r / b, b, n_phi}), 1);
  const Var<T> plogp = ad::mul(grouped, ad::log_clamped(grouped, static_cast<T>(kLogFloor)));
  return ad::scale(ad::sum(plogp), T(-1) / n_phi);
}

template <typename T>
Var<T> unsup_loss(const Var<T>& psi, double t, const LossConfig& c) {
  return ad::add(entropy_reg(psi, c.b), ad::scale(var_loss(psi), static_cast<T>(w_var(t, c) * c.beta)));
}

// Loss value plus its components, averaged per side of the batch.
template <typename T>
struct LossTerms {
  Var<T> total;
  double dis_mse = 0, ce = 0, var = 0, entropy = 0;
};

// mean over labeled of cad_loss + lambda * mean over unlabeled of unsup_loss.
// Either side may be empty; both empty throws EmptyBatch.
template <typename T>
LossTerms<T> total_loss(std::span<const Var<T>> psi_l, std::span<const std::vector<int>> labels,
                        std::span<const Var<T>> psi_u, double t, const LossConfig& c) {
  if (psi_l.size() != labels.size()) fail(ErrorCode::ShapeMismatch, "one label set per labeled prediction");
  if (psi_l.empty() && psi_u.empty()) fail(ErrorCode::EmptyBatch, "both labeled and unlabeled batches are empty");
  LossTerms<T> out;
  Var<T> sup, uns;
  for (std::size_t i = 0; i < psi_l.size(); ++i) {
    const Var<T> dm = dis_mse(psi_l[i], labels[i], c.sigma_g);
    const Var<T> ce = ce_loss(psi_l[i], labels[i]);
    const Var<T> l = ad::add(ad::scale(dm, static_cast<T>(c.alpha)), ad::scale(ce, static_cast<T>(w_ce(t, c))));
    sup = i == 0 ? l : ad::add(sup, l);
    out.dis_mse += static_cast<double>(dm.item()) / psi_l.size();
    out.ce += static_cast<double>(ce.item()) / psi_l.size();
  }
  for (std::size_t i = 0; i < psi_u.size(); ++i) {
    const Var<T> h = entropy_reg(psi_u[i], c.b);
    const Var<T> v = var_loss(psi_u[i]);
    const Var<T> l = ad::add(h, ad::scale(v, static_cast<T>(w_var(t, c) * c.beta)));
    uns = i == 0 ? l : ad::add(uns, l);
    out.entropy += static_cast<double>(h.item()) / psi_u.size();
    out.var += static_cast<double>(v.item()) / psi_u.size();
  }
  if (sup) sup = ad::scale(sup, T(1) / static_cast<T>(psi_l.size()));
  if (uns) uns = ad::scale(uns, static_cast<T>(c.lambda / psi_u.size()));
  out.total = !sup ? uns : !uns ? sup : ad::add(sup, uns);
  return out;
}

}  // namespace cad::train
