#include "mtiqa/labels.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

#include "mtiqa/errors.hpp"

namespace mtiqa {

LabelSpace::LabelSpace(int quality_levels)
    : scenes_{"animal", "cityscape", "human", "indoor scene", "landscape", "night scene", "plant", "still-life", "others"},
      distortions_{"blur",          "color-related", "contrast",      "jpeg compression",    "jpeg2000 compression",
                   "noise",         "over-exposure", "quantization",  "under-exposure", "spatially-localized",
                   "others"} {
  if (quality_levels == 5) {
    quality_ = {"bad", "poor", "fair", "good", "perfect"};
  } else if (quality_levels == 2) {
    quality_ = {"bad", "good"};
  } else {
    throw ConfigError("quality_levels must be 2 or 5, got " + std::to_string(quality_levels));
  }
}

std::size_t LabelSpace::flat_index(const Triple& t) const {
  if (t.c >= num_quality() || t.s >= num_scenes() || t.d >= num_distortions()) {
    throw std::out_of_range("label triple (" + std::to_string(t.c) + ", " + std::to_string(t.s) + ", " +
                            std::to_string(t.d) + ") out of range");
  }
  return ((t.s * num_distortions()) + t.d) * num_quality() + t.c;
}

Triple LabelSpace::unflatten(std::size_t v) const {
  if (v >= size()) throw std::out_of_range("flat index " + std::to_string(v) + " out of range");
  Triple t;
  t.c = v % num_quality();
  v /= num_quality();
  t.d = v % num_distortions();
  t.s = v / num_distortions();
  return t;
}

std::string article_for(const std::string& noun) {
  if (noun.empty()) return "a";
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(noun[0])));
  return (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') ? "an" : "a";
}

std::string LabelSpace::render(const Triple& t) const {
  flat_index(t);  // range check
  const std::string& s = scenes_[t.s];
  return "a photo of " + article_for(s) + " " + s + " with " + distortions_[t.d] + " artifacts, which is of " +
         quality_[t.c] + " quality";
}

std::vector<Description> LabelSpace::enumerate_descriptions() const {
  std::vector<Description> out;
  out.reserve(size());
  for (std::size_t v = 0; v < size(); ++v) {
    Triple t = unflatten(v);
    out.push_back({v, t, render(t)});
  }
  return out;
}

std::string LabelSpace::render_scene(std::size_t s) const {
  const std::string& name = scenes_.at(s);
  return "a photo of " + article_for(name) + " " + name;
}

std::string LabelSpace::render_distortion(std::size_t d) const {
  return "a photo with " + distortions_.at(d) + " artifacts";
}

std::string LabelSpace::render_quality(std::size_t c) const { return "a photo of " + quality_.at(c) + " quality"; }

std::vector<std::string> LabelSpace::separate_descriptions() const {
  std::vector<std::string> out;
  for (std::size_t s = 0; s < num_scenes(); ++s) out.push_back(render_scene(s));
  for (std::size_t d = 0; d < num_distortions(); ++d) out.push_back(render_distortion(d));
  for (std::size_t c = 0; c < num_quality(); ++c) out.push_back(render_quality(c));
  return out;
}

std::size_t LabelSpace::scene_index(const std::string& name) const {
  auto it = std::find(scenes_.begin(), scenes_.end(), name);
  if (it == scenes_.end()) throw std::out_of_range("unknown scene '" + name + "'");
  return static_cast<std::size_t>(it - scenes_.begin());
}

std::size_t LabelSpace::distortion_index(const std::string& name) const {
  auto it = std::find(distortions_.begin(), distortions_.end(), name);
  if (it == distortions_.end()) throw std::out_of_range("unknown distortion '" + name + "'");
  return static_cast<std::size_t>(it - distortions_.begin());
}

std::uint64_t LabelSpace::hash() const {
  // FNV-1a over the three name lists, with a separator byte between names
  // and a different one between lists.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](unsigned char b) {
    h ^= b;
    h *= 1099511628211ULL;
  };
  for (const auto* list : {&quality_, &scenes_, &distortions_}) {
    for (const auto& name : *list) {
      for (char ch : name) mix(static_cast<unsigned char>(ch));
      mix(0x1f);
    }
    mix(0x1e);
  }
  return h;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&]() {
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  };
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      flush();
    } else if (std::isalnum(ch) || ch == '-') {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  flush();
  return words;
}

Vocabulary::Vocabulary(const LabelSpace& labels) {
  std::set<std::string> all;
  auto add = [&all](const std::string& text) {
    for (auto& w : split_words(text)) all.insert(std::move(w));
  };
  for (const auto& d : labels.enumerate_descriptions()) add(d.text);
  for (const auto& s : labels.separate_descriptions()) add(s);
  // Articles for every scene, so either vowel rule outcome is covered.
  add("a an");
  words_.assign(all.begin(), all.end());
  for (std::uint32_t i = 0; i < words_.size(); ++i) ids_[words_[i]] = i;
}

std::uint32_t Vocabulary::id(const std::string& word) const {
  auto it = ids_.find(word);
  if (it == ids_.end()) throw DataError("out-of-vocabulary word '" + word + "'");
  return it->second;
}

std::vector<std::uint32_t> Vocabulary::tokenize(const std::string& text) const {
  std::vector<std::uint32_t> ids;
  for (const auto& w : split_words(text)) ids.push_back(id(w));
  return ids;
}

std::string Vocabulary::detokenize(const std::vector<std::uint32_t>& ids) const {
  std::string out;
  for (auto i : ids) {
    if (i >= words_.size()) throw std::out_of_range("token id " + std::to_string(i) + " out of range");
    if (!out.empty()) out.push_back(' ');
    out += words_[i];
  }
  return out;
}

}  // namespace mtiqa
