#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mtiqa/labels.hpp"

namespace mtiqa {

/// H x W grid of Dft-dimensional patch features, row-major with channels
/// fastest. Stored as float because that is the on-disk precision.
struct FeatureImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> data;

  float at(std::size_t r, std::size_t c, std::size_t k) const { return data[(r * width + c) * channels + k]; }
  friend bool operator==(const FeatureImage&, const FeatureImage&) = default;
};

struct ImageRecord {
  std::uint32_t id = 0;
  std::uint32_t dataset_id = 0;
  std::uint32_t reference_id = 0;
  std::uint16_t scene_mask = 0;  // bit s set iff scene s is present
  std::uint8_t distortion = 0;
  double severity = 0.0;
  double mos = 0.0;
  FeatureImage features;

  bool has_scene(std::size_t s) const { return (scene_mask >> s) & 1u; }
  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct MosScale {
  double gain = 1.0;
  double offset = 0.0;
  friend bool operator==(const MosScale&, const MosScale&) = default;
};

struct GeneratorConfig {
  std::size_t num_datasets = 3;
  std::size_t references = 57;  // content groups per dataset
  std::size_t versions = 10;    // distorted/pristine versions per reference
  std::size_t grid = 8;
  std::size_t channels = 16;
  double gamma = 1.5;
  double sigma_obs = 0.15;
  double min_severity = 0.3;
  double two_scene_prob = 0.25;
  double texture = 0.25;  // i.i.d. patch noise around the scene prototype
  double offset = 0.1;    // per-image global shift of every channel
  double detail = 1.2;    // amplitude of the fine checkerboard texture
  std::uint64_t seed = 7;
  // Per-dataset MOS affine maps and distortion frequency weights; dataset m
  // uses entry m modulo the list length.
  std::vector<MosScale> scales = {{1.0, 0.0}, {25.0, -25.0}, {2.0, 3.0}};
  std::vector<std::vector<double>> profiles = {
      {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1},
      {2, 1, 1, 2, 2, 1, 1, 1, 1, 1, 1},
      {3, 1, 1, 1, 1, 3, 2, 1, 2, 1, 1},
  };

  void validate() const;
  /// INI text listing every knob; written next to each dataset file.
  std::string describe() const;
  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// Latent quality on [1,5]: 1 + 4(1-v)^gamma.
double latent_quality(double severity, double gamma);

/// The fixed scene prototypes and occluder shared by every dataset drawn
/// from one generator seed.
struct GeneratorBasis {
  std::vector<std::vector<double>> prototypes;  // one per scene
  std::vector<double> occluder;
};

GeneratorBasis make_basis(const GeneratorConfig& config, std::size_t num_scenes);

/// Applies distortion d at severity v to a grid given as doubles in
/// FeatureImage layout. Identity at v = 0 for every d.
void apply_distortion(std::vector<double>& grid, std::size_t g, std::size_t channels, std::size_t d, double v,
                      const GeneratorBasis& basis, std::mt19937_64& rng);

/// All M datasets; record ids are unique within a dataset.
std::vector<std::vector<ImageRecord>> generate(const GeneratorConfig& config, const LabelSpace& labels);

// ---- on-disk format ---------------------------------------------------

struct DatasetFile {
  std::uint32_t num_datasets = 0;
  std::uint32_t grid = 0;
  std::uint32_t channels = 0;
  std::uint64_t label_hash = 0;
  std::vector<ImageRecord> records;
};

void write_dataset(const std::filesystem::path& path, const DatasetFile& file);
/// Throws DataError on bad magic, truncation, or out-of-range fields; the
/// message names the byte offset of the offending record.
DatasetFile read_dataset(const std::filesystem::path& path);

// ---- splits and batching ----------------------------------------------

struct SplitSpec {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
  std::uint64_t seed = 0;
  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

struct Split {
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> val;
  std::vector<ImageRecord> test;
};

/// Partitions by reference_id so no content group spans two splits.
Split split(const std::vector<ImageRecord>& records, const SplitSpec& spec);

/// Draws one mini-batch per dataset per iteration. Each dataset walks a
/// shuffled permutation and reshuffles once fewer than `size` unseen
/// images remain, so nothing repeats within a pass.
class BatchSampler {
 public:
  BatchSampler(std::vector<std::size_t> dataset_sizes, std::vector<std::size_t> batch_sizes, std::uint64_t seed);

  /// Indices into each dataset's training list.
  std::vector<std::vector<std::size_t>> next();
  /// One pass over the dataset needing the most iterations.
  std::size_t iterations_per_epoch() const;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> batch_;
  std::vector<std::vector<std::size_t>> perm_;
  std::vector<std::size_t> cursor_;
  std::mt19937_64 rng_;
};

struct ImagePair {
  std::size_t x = 0;  // positions in the flattened batch
  std::size_t y = 0;
  double label = 0.0;  // 1 iff mos_x >= mos_y
};

/// 1 if mos_x >= mos_y else 0; throws DataError when datasets differ.
double pair_label(const ImageRecord& x, const ImageRecord& y);
double pair_label(double mos_x, double mos_y);

/// All unordered within-dataset pairs of a flattened batch.
std::vector<ImagePair> make_pairs(const std::vector<const ImageRecord*>& batch);

}  // namespace mtiqa
