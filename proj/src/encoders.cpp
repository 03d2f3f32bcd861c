#include "mtiqa/encoders.hpp"

#include <cmath>

#include "mtiqa/errors.hpp"

namespace mtiqa {

CropSet sample_crops(const FeatureImage& img, std::size_t count, std::size_t crop_size, std::mt19937_64& rng) {
  if (count == 0) throw ConfigError("sample_crops: need at least one crop");
  if (crop_size == 0 || crop_size > img.height || crop_size > img.width) {
    throw ConfigError("sample_crops: crop size " + std::to_string(crop_size) + " does not fit a " +
                      std::to_string(img.height) + "x" + std::to_string(img.width) + " grid");
  }
  std::uniform_int_distribution<std::size_t> rows(0, img.height - crop_size);
  std::uniform_int_distribution<std::size_t> cols(0, img.width - crop_size);
  CropSet set;
  set.size = crop_size;
  for (std::size_t u = 0; u < count; ++u) {
    const std::size_t r = rows(rng);
    set.crops.push_back({r, cols(rng)});
  }
  return set;
}

CropSet sample_crops(const FeatureImage& img, std::size_t count, std::size_t crop_size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_crops(img, count, crop_size, rng);
}

std::size_t windows_per_crop(std::size_t crop_size, std::size_t window) {
  const std::size_t side = crop_size - window + 1;
  return side * side;
}

Tensor window_matrix(const std::vector<const FeatureImage*>& images, const std::vector<CropSet>& crops,
                     std::size_t window) {
  if (images.empty() || images.size() != crops.size()) throw ShapeError("window_matrix: one crop set per image");
  const std::size_t ch = images[0]->channels;
  const std::size_t cs = crops[0].size;
  const std::size_t u = crops[0].crops.size();
  if (window == 0 || window > cs) throw ConfigError("window size must be in [1, crop size]");
  const std::size_t side = cs - window + 1;
  const std::size_t nw = side * side;
  const std::size_t width = window * window * ch;
  Tensor out({images.size() * u * nw, width});
  double* dst = out.data().data();
  for (std::size_t b = 0; b < images.size(); ++b) {
    const FeatureImage& img = *images[b];
    if (img.channels != ch || crops[b].size != cs || crops[b].crops.size() != u) {
      throw ShapeError("window_matrix: images in a batch must share channels and crop layout");
    }
    for (const Crop& c : crops[b].crops) {
      for (std::size_t wr = 0; wr < side; ++wr) {
        for (std::size_t wc = 0; wc < side; ++wc) {
          // Patches in column-major order within the window.
          for (std::size_t dc = 0; dc < window; ++dc) {
            for (std::size_t dr = 0; dr < window; ++dr) {
              const float* src = &img.data[((c.row + wr + dr) * img.width + (c.col + wc + dc)) * ch];
              for (std::size_t k = 0; k < ch; ++k) *dst++ = src[k];
            }
          }
        }
      }
    }
  }
  return out;
}

namespace {

Tensor build_token_average(const LabelSpace& labels, const Vocabulary& vocab, bool separate) {
  std::vector<std::string> texts;
  if (separate) {
    texts = labels.separate_descriptions();
  } else {
    for (auto& d : labels.enumerate_descriptions()) texts.push_back(std::move(d.text));
  }
  Tensor avg({texts.size(), vocab.size()});
  for (std::size_t v = 0; v < texts.size(); ++v) {
    const auto ids = vocab.tokenize(texts[v]);
    for (auto id : ids) avg.at(v, id) += 1.0 / static_cast<double>(ids.size());
  }
  return avg;
}

}  // namespace

Model::Model(ModelConfig config, const LabelSpace& labels)
    : config_(std::move(config)), labels_(labels), vocab_(labels_), init_rng_(config_.init_seed) {
  if (config_.quality_levels != static_cast<int>(labels_.num_quality())) {
    throw ConfigError("model quality_levels does not match the label space");
  }
  if (config_.hidden < 2 || config_.hidden % 2 != 0) throw ConfigError("model hidden width must be even");
  if (config_.embed_dim == 0 || config_.token_dim == 0) throw ConfigError("model dims must be positive");
  if (!(config_.tau_init > 0.0)) throw ConfigError("model tau_init must be positive");
  if (config_.window == 0 || config_.window > config_.crop_size) {
    throw ConfigError("model window must be in [1, crop_size]");
  }
  token_average_ = build_token_average(labels_, vocab_, config_.separate_templates);

  const std::size_t in = config_.window * config_.window * config_.channels;
  add("image.stem.w", {in, config_.hidden}, true);
  add("image.stem.b", {config_.hidden}, false);
  add("image.mid.w", {config_.hidden, config_.hidden}, true);
  add("image.mid.b", {config_.hidden}, false);
  add("image.out.w", {config_.hidden, config_.embed_dim}, true);
  add("image.out.b", {config_.embed_dim}, false);
  if (config_.linear_head) {
    add("head.w", {config_.embed_dim, 1}, true);
    add("head.b", {1}, false);
    // Centre the untrained head on the middle of the quality scale.
    parameter("head.b")->value[0] = 0.5 * (1.0 + static_cast<double>(labels_.num_quality()));
  } else {
    const bool text_trainable = !config_.freeze_text_encoder;
    add("text.embed", {vocab_.size(), config_.token_dim}, true, text_trainable);
    add("text.proj.w", {config_.token_dim, config_.embed_dim}, true, text_trainable);
    add("text.proj.b", {config_.embed_dim}, false, text_trainable);
    add("log_tau", {1}, false);
    parameter("log_tau")->value[0] = std::log(config_.tau_init);
  }
}

ParameterPtr Model::add(const std::string& name, Shape shape, bool xavier, bool trainable) {
  Tensor value(shape);
  if (xavier) {
    // Embedding tables count as [vocab, dim] layers for the fan bound.
    const double a = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
    std::uniform_real_distribution<double> dist(-a, a);
    for (auto& x : value.data()) x = dist(init_rng_);
  }
  auto p = std::make_shared<Parameter>(name, std::move(value), trainable);
  params_.push_back(p);
  by_name_[name] = p;
  return p;
}

ParameterPtr Model::parameter(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::out_of_range("model has no parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> Model::text_parameter_names() const {
  std::vector<std::string> out;
  for (const auto& p : params_) {
    if (p->name.rfind("text.", 0) == 0) out.push_back(p->name);
  }
  return out;
}

double Model::log_tau() const { return parameter("log_tau")->value[0]; }

NodeId Model::encode_images(Graph& g, NodeId windows, std::size_t batch, std::size_t crops) const {
  const std::size_t h = config_.hidden;
  const std::size_t nw = windows_per_crop(config_.crop_size, config_.window);
  NodeId u = g.add(g.matmul(windows, g.parameter(parameter("image.stem.w"))), g.parameter(parameter("image.stem.b")));
  NodeId smooth = g.tanh(g.slice(u, 1, 0, h / 2));
  NodeId energy_in = g.slice(u, 1, h / 2, h);
  NodeId energy = g.mul(energy_in, energy_in);
  NodeId stem = g.concat({smooth, energy}, 1);
  NodeId pooled = g.mean(g.reshape(stem, {batch * crops, nw, h}), 1);
  NodeId mid = g.tanh(g.add(g.matmul(pooled, g.parameter(parameter("image.mid.w"))),
                            g.parameter(parameter("image.mid.b"))));
  return g.add(g.matmul(mid, g.parameter(parameter("image.out.w"))), g.parameter(parameter("image.out.b")));
}

NodeId Model::encode_texts(Graph& g) const {
  NodeId avg = g.constant(token_average_);
  NodeId tokens = g.matmul(avg, g.parameter(parameter("text.embed")));
  return g.add(g.matmul(tokens, g.parameter(parameter("text.proj.w"))), g.parameter(parameter("text.proj.b")));
}

}  // namespace mtiqa
