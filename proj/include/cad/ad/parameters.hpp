#pragma once

#include <cmath>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cad/ad/graph.hpp"

namespace cad::ad {

// Ordered set of named trainable leaves. Insertion order is the
// serialization order and the optimizer's iteration order.
template <typename T>
class ParameterStore {
 public:
  using Entry = std::pair<std::string, Var<T>>;

  Var<T> add(const std::string& name, Tensor<T> init) {
    if (index_.count(name)) fail(ErrorCode::InvalidArgument, "duplicate parameter name '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, leaf(std::move(init)));
    return entries_.back().second;
  }

  const Var<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorCode::InvalidArgument, "unknown parameter '" + name + "'");
    return entries_[it->second].second;
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  Index scalar_count() const {
    Index n = 0;
    for (const auto& [name, v] : entries_) n += v.size();
    return n;
  }

  void zero_grad() {
    for (auto& [name, v] : entries_) v.zero_grad();
  }

  // Copies values by name, converting scalar type. Shapes must match.
  template <typename U>
  void assign_from(const ParameterStore<U>& other) {
    for (auto& [name, v] : entries_) {
      const auto& src = other.get(name).value();
      if (src.shape() != v.shape()) fail(ErrorCode::ShapeMismatch, "parameter '" + name + "' shape differs");
      v.mutable_value() = src.template cast<T>();
    }
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// He-uniform initialization for a weight with the given fan-in.
template <typename T>
Tensor<T> he_uniform(Shape shape, Index fan_in, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Tensor<T> uniform(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParameterStore<T>& params) {
    ++t_;
    if (m_.empty()) {
      for (const auto& [name, v] : params.entries()) {
        m_.emplace_back(v.shape(), T(0));
        v2_.emplace_back(v.shape(), T(0));
      }
    }
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T c1 = static_cast<T>(1.0 - std::pow(cfg_.beta1, t_));
    const T c2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, t_));
    const T lr = static_cast<T>(cfg_.learning_rate), eps = static_cast<T>(cfg_.epsilon);
    std::size_t i = 0;
    for (const auto& entry : params.entries()) {
      Var<T> v = entry.second;
      const auto& g = v.grad().array();
      auto& m = m_[i].array();
      auto& s = v2_[i].array();
      m = b1 * m + (T(1) - b1) * g;
      s = b2 * s + (T(1) - b2) * g.square();
      v.mutable_value().array() -= lr * (m / c1) / ((s / c2).sqrt() + eps);
      ++i;
    }
  }

  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<Tensor<T>> m_, v2_;
};

template <typename T>
class Sgd {
 public:
  explicit Sgd(double learning_rate) : lr_(learning_rate) {}
  void step(ParameterStore<T>& params) {
    for (const auto& entry : params.entries()) {
      Var<T> v = entry.second;
      v.mutable_value().array() -= static_cast<T>(lr_) * v.grad().array();
    }
  }

 private:
  double lr_;
};

}  // namespace cad::ad
