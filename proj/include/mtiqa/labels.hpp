#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mtiqa {

struct Triple {
  std::size_t c = 0;  // quality level index
  std::size_t s = 0;  // scene index
  std::size_t d = 0;  // distortion index
  friend bool operator==(const Triple&, const Triple&) = default;
};

struct Description {
  std::size_t index = 0;
  Triple triple;
  std::string text;
};

/// Quality x scene x distortion product space. Flat order puts quality
/// fastest: v = ((s * |D|) + d) * C + c.
class LabelSpace {
 public:
  /// quality_levels is 5 (bad..perfect) or 2 (bad, good).
  explicit LabelSpace(int quality_levels = 5);

  const std::vector<std::string>& quality_words() const { return quality_; }
  const std::vector<std::string>& scenes() const { return scenes_; }
  const std::vector<std::string>& distortions() const { return distortions_; }

  std::size_t num_quality() const { return quality_.size(); }
  std::size_t num_scenes() const { return scenes_.size(); }
  std::size_t num_distortions() const { return distortions_.size(); }
  std::size_t size() const { return num_quality() * num_scenes() * num_distortions(); }

  std::size_t flat_index(const Triple& t) const;
  Triple unflatten(std::size_t v) const;

  std::string render(const Triple& t) const;
  std::vector<Description> enumerate_descriptions() const;

  // Separate-template variant: scenes, then distortions, then quality
  // levels, 9 + 11 + C strings in that order.
  std::string render_scene(std::size_t s) const;
  std::string render_distortion(std::size_t d) const;
  std::string render_quality(std::size_t c) const;
  std::vector<std::string> separate_descriptions() const;

  std::size_t scene_index(const std::string& name) const;
  std::size_t distortion_index(const std::string& name) const;
  std::size_t others_distortion() const { return distortions_.size() - 1; }

  /// Stable 64-bit fingerprint of every name and the set sizes.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> quality_;
  std::vector<std::string> scenes_;
  std::vector<std::string> distortions_;
};

std::string article_for(const std::string& noun);

/// Closed word-level vocabulary over every template string the label space
/// can render. Ids follow sorted word order, so they are stable across runs.
class Vocabulary {
 public:
  explicit Vocabulary(const LabelSpace& labels);

  std::vector<std::uint32_t> tokenize(const std::string& text) const;
  std::string detokenize(const std::vector<std::uint32_t>& ids) const;
  std::size_t size() const { return words_.size(); }
  std::uint32_t id(const std::string& word) const;
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::uint32_t> ids_;
};

/// Lower-cases and splits on whitespace, dropping punctuation other than
/// hyphens (so "still-life" and "color-related" stay single words).
std::vector<std::string> split_words(const std::string& text);

}  // namespace mtiqa
