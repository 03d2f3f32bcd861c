#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mtiqa/autograd.hpp"

namespace mtiqa {

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  std::uint32_t version = kVersion;
  std::uint64_t label_hash = 0;
  std::uint64_t epoch = 0;
  double val_metric = 0.0;
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::string config_text;

  const Tensor& tensor(const std::string& name) const;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mtiqa
