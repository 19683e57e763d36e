#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "cad/core/error.hpp"
#include "cad/net/cadnet.hpp"
#include "cad/oracle/cad_oracle.hpp"
#include "cad/train/trainer.hpp"

namespace cad::cli {

// 0 success, 2 configuration, 3 I/O, 4 missing prerequisite, 5 spec
// mismatch, 1 anything else (including a non-finite training loss).
int exit_code(ErrorCode code);

// Entry point shared by the executable and the tests. args[0] is the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

inline constexpr const char* kManifestName = "manifest.jsonl";

// Throws ConfigError on unknown keys or invalid values.
oracle::TraversabilityRules rules_from_json(const std::string& text);

// Settings read by `train --config`. Every key is optional:
//   {"model": {"augmented", "pillar_widths", "sam_embed", "sam_fused",
//              "backbone", "fusion", "grid"},
//    "train": {"epochs", "batch_labeled", "batch_unlabeled", "learning_rate",
//              "optimizer", "use_unlabeled", "schedule_scale", "checkpoint_every"},
//    "loss":  {"alpha", "beta", "lambda", "sigma1", "mu1", "sigma2", "mu2",
//              "sigma_g", "b"}}
// A "model.grid" that differs from the dataset grid throws SpecMismatch.
struct TrainSettings {
  net::CadNetConfig model;
  train::TrainConfig train;
  train::LossConfig loss;
};
TrainSettings settings_from_json(const std::string& text, const PolarGridSpec& dataset_grid, int dataset_f);

// Per-sample seed for sample `index` of a generation run.
std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t attempt = 0);

}  // namespace cad::cli
