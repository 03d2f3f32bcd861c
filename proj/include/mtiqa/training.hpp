#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mtiqa/checkpoint.hpp"
#include "mtiqa/config.hpp"
#include "mtiqa/correspondence.hpp"
#include "mtiqa/datasets.hpp"
#include "mtiqa/encoders.hpp"

namespace mtiqa {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  std::array<double, 3> loss{};
  std::array<double, 3> lambda{};  // weights used during the epoch
  double lr = 0.0;                 // at the end of the epoch
  double val_metric = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
};

/// Per-epoch progress callback; may be empty.
using ProgressFn = std::function<void(const EpochLog&)>;

/// Joint training over the train splits (one Split per dataset, in
/// dataset-id order). Parameters, crops and batches are seeded from `seed`.
/// Keeps the epoch with the best validation metric: mean SRCC over datasets
/// when quality is trained, else mean accuracy of the trained heads. With
/// zero epochs the untrained model is returned.
TrainResult train(const Config& config, const std::vector<Split>& splits, std::uint64_t seed,
                  const ProgressFn& progress = {});

Checkpoint make_checkpoint(const Model& model, const Config& config, std::uint64_t epoch, double val_metric);
/// Rebuilds a model; throws DataError when the label-space hash differs.
std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ckpt, Config* config_out = nullptr);

struct Prediction {
  double score = 0.0;
  std::vector<double> quality;
  std::vector<double> scene;
  std::vector<double> distortion;
  LabelPrediction labels;
  bool has_marginals = true;
};

/// Inference with `crops` random crops per image; image i uses its own
/// crop seed, so results do not depend on batching.
std::vector<Prediction> predict(const Model& model, const std::vector<const FeatureImage*>& images,
                                const std::vector<std::uint64_t>& crop_seeds, std::size_t crops);
Prediction predict(const Model& model, const FeatureImage& image, std::size_t crops, std::uint64_t crop_seed);

/// Crop seed for a stored record under a base seed.
std::uint64_t record_seed(std::uint64_t base, const ImageRecord& record);

struct DatasetMetrics {
  std::size_t dataset = 0;
  std::size_t count = 0;
  double srcc = 0.0;
  double plcc = 0.0;
  double acc_scene = 0.0;
  double acc_distortion = 0.0;
};

/// NaN marks a metric that is undefined (constant predictions, or no
/// marginals under the regression head).
DatasetMetrics evaluate_records(const Model& model, const std::vector<ImageRecord>& records, const EvalConfig& eval);

}  // namespace mtiqa
