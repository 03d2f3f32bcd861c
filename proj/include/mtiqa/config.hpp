#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mtiqa/datasets.hpp"
#include "mtiqa/encoders.hpp"
#include "mtiqa/losses.hpp"
#include "mtiqa/metrics.hpp"
#include "mtiqa/optim.hpp"

namespace mtiqa {

struct TrainConfig {
  std::size_t epochs = 30;
  std::vector<std::size_t> batch_sizes = {4};  // one entry applies to every dataset
  std::size_t crops = 3;
  TaskSet tasks = {true, true, true};
  SceneLoss scene_loss = SceneLoss::kBinary;
  Weighting weighting = Weighting::kDwa;
  double tau2 = 2.0;
  std::size_t dwa_window = 0;
  AdamWConfig optimizer{3e-3, 0.9, 0.999, 1e-8, 1e-3};
  std::vector<std::size_t> datasets;  // empty = every dataset in the data dir
  SplitSpec split;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EvalConfig {
  std::size_t crops = 15;
  std::uint64_t crop_seed = 999;
  std::size_t sessions = 1;
  std::vector<std::size_t> datasets;  // empty = the training datasets
  bool mapped_plcc = false;
  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct Config {
  std::uint64_t seed = 0;
  std::string data_dir = "data";
  GeneratorConfig generator;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  GmadOptions gmad;

  friend bool operator==(const Config&, const Config&) = default;
};

/// Parses INI text. Unknown sections or keys are errors, so typos in
/// ablation files fail loudly.
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);
std::string serialize_config(const Config& config);

/// Applies one "section.key=value" override.
void apply_override(Config& config, const std::string& assignment);

/// Cross-field checks (task set non-empty, dwa needs two tasks, ...).
void validate(const Config& config);

std::string tasks_to_string(const TaskSet& tasks);
TaskSet parse_tasks(const std::string& text);

}  // namespace mtiqa
