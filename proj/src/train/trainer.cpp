#include "cad/train/trainer.hpp"

#include <json.hpp>

#include "cad/core/error.hpp"

namespace cad::train {

void LossConfig::validate(int n_r) const {
  for (double v : {alpha, beta, lambda, sigma1, mu1, sigma2, mu2, sigma_g}) {
    if (!std::isfinite(v)) fail(ErrorCode::ConfigError, "loss parameters must be finite");
  }
  if (sigma1 <= 0 || sigma2 <= 0 || sigma_g <= 0) fail(ErrorCode::ConfigError, "sigma values must be positive");
  if (alpha < 0 || beta < 0 || lambda < 0) fail(ErrorCode::ConfigError, "loss balances must be >= 0");
  if (b <= 0) fail(ErrorCode::ConfigError, "entropy grouping b must be positive");
  if (n_r > 0 && n_r % b != 0) fail(ErrorCode::ConfigError, "entropy grouping b must divide n_r");
}

void TrainConfig::validate() const {
  if (epochs <= 0 || batch_labeled <= 0 || batch_unlabeled <= 0) {
    fail(ErrorCode::ConfigError, "epochs and batch sizes must be positive");
  }
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) fail(ErrorCode::ConfigError, "learning rate must be > 0");
  if (!(schedule_scale > 0) || !std::isfinite(schedule_scale)) {
    fail(ErrorCode::ConfigError, "schedule scale must be > 0");
  }
  if (checkpoint_every < 0) fail(ErrorCode::ConfigError, "checkpoint interval must be >= 0");
  if (checkpoint_every > 0 && checkpoint_dir.empty()) fail(ErrorCode::ConfigError, "checkpoint directory missing");
}

bool has_enough_points(const net::ModelInput& input, const PolarGridSpec& spec) {
  return !input.frames.empty() && input.frames[0].pillar.size() * 10 >= static_cast<std::size_t>(spec.n_pillars());
}

TrainItem make_item(const Sample& sample, const PolarGridSpec& spec, bool augmented) {
  const std::vector<PointFrame> frames = sample.aligned();
  return {sample.id, net::prepare_input(frames, spec, augmented), sample.label};
}

TrainData load_train_data(const std::filesystem::path& root, const io::DatasetManifest& manifest, bool augmented) {
  TrainData d;
  for (const io::SampleRecord& r : manifest.records) {
    TrainItem it = make_item(io::load_sample(root, r, manifest.grid), manifest.grid, augmented);
    switch (r.split) {
      case io::Split::LabeledTrain: d.labeled.push_back(std::move(it)); break;
      case io::Split::UnlabeledTrain:
        if (has_enough_points(it.input, manifest.grid)) {
          it.label.reset();
          d.unlabeled.push_back(std::move(it));
        }
        break;
      case io::Split::Validation: d.validation.push_back(std::move(it)); break;
    }
  }
  return d;
}

std::string EpochLog::to_json() const {
  nlohmann::json j{{"epoch", epoch},   {"t", t},       {"loss", loss},   {"dis_mse", dis_mse},
                   {"ce", ce},         {"var", var},   {"entropy", entropy}, {"w_ce", w_ce},
                   {"w_var", w_var},   {"steps", steps}, {"train_mae", train_mae}};
  j["val_mae"] = val_mae ? nlohmann::json(*val_mae) : nlohmann::json(nullptr);
  j["val_confidence"] = val_confidence ? nlohmann::json(*val_confidence) : nlohmann::json(nullptr);
  return j.dump();
}

}  // namespace cad::train
