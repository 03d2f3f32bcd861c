#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mtiqa/autograd.hpp"
#include "mtiqa/datasets.hpp"
#include "mtiqa/labels.hpp"

namespace mtiqa {

struct Crop {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const Crop&, const Crop&) = default;
};

struct CropSet {
  std::size_t size = 0;
  std::vector<Crop> crops;
};

/// U crop offsets drawn uniformly over every valid placement.
CropSet sample_crops(const FeatureImage& img, std::size_t count, std::size_t crop_size, std::mt19937_64& rng);
CropSet sample_crops(const FeatureImage& img, std::size_t count, std::size_t crop_size, std::uint64_t seed);

struct ModelConfig {
  int quality_levels = 5;
  std::size_t channels = 16;
  std::size_t crop_size = 6;
  // Side of the patch neighbourhood fed to the stem. 1 means single patches.
  std::size_t window = 2;
  std::size_t hidden = 64;
  std::size_t embed_dim = 32;
  std::size_t token_dim = 16;
  double tau_init = 0.07;
  bool separate_templates = false;
  bool freeze_text_encoder = false;
  // Replace the text side with a scalar regression head on the image
  // embedding (quality only).
  bool linear_head = false;
  std::uint64_t init_seed = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Row-stacked stem inputs for a batch: every window of every crop of every
/// image, shape [B*U*nw, window^2*channels], image-major then crop-major.
Tensor window_matrix(const std::vector<const FeatureImage*>& images, const std::vector<CropSet>& crops,
                     std::size_t window);
std::size_t windows_per_crop(std::size_t crop_size, std::size_t window);

/// Parameters of both encoders plus the temperature. The image encoder is a
/// shared stem over small patch windows (half tanh units, half squared
/// units so local energy is visible), mean-pooled per crop, followed by a
/// tanh layer and a linear map to K. The text encoder averages token
/// embeddings and maps them linearly to K.
class Model {
 public:
  Model(ModelConfig config, const LabelSpace& labels);

  const ModelConfig& config() const { return config_; }
  const LabelSpace& labels() const { return labels_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  /// All parameters, text ones included even when frozen.
  const std::vector<ParameterPtr>& parameters() const { return params_; }
  ParameterPtr parameter(const std::string& name) const;
  std::vector<std::string> text_parameter_names() const;

  /// Number of text descriptions V (C*S*D, or S+D+C with separate templates).
  std::size_t num_descriptions() const { return token_average_.shape()[0]; }
  /// [V, vocab] matrix averaging each description's token one-hots.
  const Tensor& token_average() const { return token_average_; }

  /// F(x) for the stacked windows: [B*U, K].
  NodeId encode_images(Graph& g, NodeId windows, std::size_t batch, std::size_t crops) const;
  /// G: [V, K].
  NodeId encode_texts(Graph& g) const;

  double log_tau() const;

 private:
  ParameterPtr add(const std::string& name, Shape shape, bool xavier, bool trainable = true);

  ModelConfig config_;
  LabelSpace labels_;
  Vocabulary vocab_;
  Tensor token_average_;
  std::vector<ParameterPtr> params_;
  std::map<std::string, ParameterPtr> by_name_;
  std::mt19937_64 init_rng_;
};

}  // namespace mtiqa
