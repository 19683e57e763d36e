#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "cad/eval/evaluation.hpp"
#include "cad/io/dataset_io.hpp"
#include "cad/net/cadnet.hpp"
#include "cad/train/losses.hpp"

namespace cad::train {

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
  int epochs = 100;
  int batch_labeled = 4;
  int batch_unlabeled = 4;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t seed = 0;
  bool use_unlabeled = true;
  // Schedule time is epoch * schedule_scale.
  double schedule_scale = 1.0;
  // 0 disables periodic checkpoints.
  int checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;

  // Throws ConfigError.
  void validate() const;
};

struct TrainItem {
  std::string id;
  net::ModelInput input;
  std::optional<CadProfile> label;
};

struct TrainData {
  std::vector<TrainItem> labeled, unlabeled, validation;
};

// Loads the three splits of a manifest. Unlabeled samples whose current
// frame holds fewer than one in-grid point per 10 pillars are skipped.
TrainData load_train_data(const std::filesystem::path& root, const io::DatasetManifest& manifest,
                          bool augmented = true);
TrainItem make_item(const Sample& sample, const PolarGridSpec& spec, bool augmented = true);
bool has_enough_points(const net::ModelInput& input, const PolarGridSpec& spec);

struct EpochLog {
  int epoch = 0;
  double t = 0;
  double loss = 0, dis_mse = 0, ce = 0, var = 0, entropy = 0;
  double w_ce = 0, w_var = 0;
  int steps = 0;
  double train_mae = 0;
  std::optional<double> val_mae, val_confidence;

  std::string to_json() const;
};

struct Metrics {
  double mae = 0;
  double confidence = 0;
};

template <typename T>
Metrics evaluate_items(const net::CadNet<T>& model, const std::vector<TrainItem>& items) {
  Metrics m;
  int n = 0;
  for (const TrainItem& it : items) {
    if (!it.label) continue;
    const auto out = model.forward(it.input);
    const CadProfile p = net::profile_from_distribution(out.psi.value());
    m.mae += eval::mae(p, *it.label, model.grid());
    for (double c : p.confidence) m.confidence += c / static_cast<double>(p.confidence.size());
    ++n;
  }
  if (n) {
    m.mae /= n;
    m.confidence /= n;
  }
  return m;
}

template <typename T>
Metrics mean_confidence(const net::CadNet<T>& model, const std::vector<TrainItem>& items) {
  Metrics m;
  for (const TrainItem& it : items) {
    const CadProfile p = net::profile_from_distribution(model.forward(it.input).psi.value());
    for (double c : p.confidence) m.confidence += c / static_cast<double>(p.confidence.size() * items.size());
  }
  return m;
}

// Semi-supervised training. Each step takes batch_labeled labeled samples
// and, when enabled, batch_unlabeled unlabeled ones drawn cyclically from a
// shuffled order. on_epoch, when set, observes each finished epoch. Throws InsufficientLabels without labeled
// data and Numerical on a non-finite loss.
template <typename T>
std::vector<EpochLog> fit(net::CadNet<T>& model, const TrainData& data, const TrainConfig& cfg,
                          const LossConfig& loss_cfg, std::ostream* log = nullptr,
                          const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  loss_cfg.validate(model.grid().n_r);
  if (data.labeled.empty()) fail(ErrorCode::InsufficientLabels, "training needs at least one labeled sample");
  for (const TrainItem& it : data.labeled) {
    if (!it.label) fail(ErrorCode::InsufficientLabels, "labeled sample " + it.id + " has no label");
  }

  std::mt19937_64 rng(cfg.seed);
  ad::Adam<T> adam(ad::AdamConfig{cfg.learning_rate});
  ad::Sgd<T> sgd(cfg.learning_rate);
  auto& params = model.parameters();
  const bool unsup = cfg.use_unlabeled && !data.unlabeled.empty();

  std::vector<std::size_t> u_order(data.unlabeled.size());
  for (std::size_t i = 0; i < u_order.size(); ++i) u_order[i] = i;
  std::size_t u_next = u_order.size();

  auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
  };

  std::vector<EpochLog> logs;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog e;
    e.epoch = epoch;
    e.t = epoch * cfg.schedule_scale;
    e.w_ce = w_ce(e.t, loss_cfg);
    e.w_var = w_var(e.t, loss_cfg);

    std::vector<std::size_t> order(data.labeled.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order);

    double mae_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_labeled) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_labeled));
      std::vector<Var<T>> psi_l, psi_u;
      std::vector<std::vector<int>> labels;
      for (std::size_t i = start; i < end; ++i) {
        const TrainItem& it = data.labeled[order[i]];
        psi_l.push_back(model.forward(it.input).psi);
        labels.push_back(it.label->depth_index);
        mae_sum += eval::mae(net::profile_from_distribution(psi_l.back().value()), *it.label, model.grid());
      }
      if (unsup) {
        for (int k = 0; k < cfg.batch_unlabeled; ++k) {
          if (u_next == u_order.size()) {
            shuffle(u_order);
            u_next = 0;
          }
          psi_u.push_back(model.forward(data.unlabeled[u_order[u_next++]].input).psi);
        }
      }
      const LossTerms<T> terms = total_loss<T>(psi_l, labels, psi_u, e.t, loss_cfg);
      const double value = static_cast<double>(terms.total.item());
      if (!std::isfinite(value)) fail(ErrorCode::Numerical, "non-finite loss at epoch " + std::to_string(epoch));
      params.zero_grad();
      ad::backward(terms.total);
      if (cfg.optimizer == Optimizer::Adam) {
        adam.step(params);
      } else {
        sgd.step(params);
      }
      e.loss += value;
      e.dis_mse += terms.dis_mse;
      e.ce += terms.ce;
      e.var += terms.var;
      e.entropy += terms.entropy;
      ++e.steps;
    }
    e.loss /= e.steps;
    e.dis_mse /= e.steps;
    e.ce /= e.steps;
    e.var /= e.steps;
    e.entropy /= e.steps;
    e.train_mae = mae_sum / static_cast<double>(order.size());

    if (!data.validation.empty()) {
      const Metrics m = evaluate_items(model, data.validation);
      e.val_mae = m.mae;
      e.val_confidence = m.confidence;
    }
    if (log) *log << e.to_json() << '\n' << std::flush;
    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04d.ckpt", epoch + 1);
      model.save(cfg.checkpoint_dir / name);
    }
    logs.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  return logs;
}

}  // namespace cad::train
