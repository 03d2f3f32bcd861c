#include "mtiqa/training.hpp"

#include <cmath>
#include <limits>

#include "mtiqa/errors.hpp"
#include "mtiqa/gradcheck.hpp"
#include "mtiqa/losses.hpp"
#include "mtiqa/metrics.hpp"
#include "mtiqa/optim.hpp"
#include "mtiqa/rng.hpp"

namespace mtiqa {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kPredictChunk = 32;

double safe_srcc(const std::vector<double>& x, const std::vector<double>& y) {
  try {
    return srcc(x, y);
  } catch (const NumericalError&) {
    return kNaN;
  }
}

double safe_plcc(const std::vector<double>& x, const std::vector<double>& y, bool mapped) {
  try {
    return plcc(x, y, mapped);
  } catch (const NumericalError&) {
    return kNaN;
  }
}

ModelConfig model_config_for(const Config& config, std::size_t channels, std::uint64_t seed) {
  ModelConfig mc = config.model;
  mc.channels = channels;
  mc.init_seed = seed;
  return mc;
}

double validation_metric(const Model& model, const std::vector<Split>& splits, const Config& config) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : splits) {
    if (s.val.empty()) continue;
    const DatasetMetrics m = evaluate_records(model, s.val, config.eval);
    double v = 0.0;
    if (config.train.tasks[0]) {
      v = m.srcc;
    } else {
      double acc = 0.0;
      int k = 0;
      if (config.train.tasks[1]) acc += m.acc_scene, ++k;
      if (config.train.tasks[2]) acc += m.acc_distortion, ++k;
      v = acc / k;
    }
    total += std::isfinite(v) ? v : -1.0;
    ++n;
  }
  return n > 0 ? total / static_cast<double>(n) : kNaN;
}

}  // namespace

std::uint64_t record_seed(std::uint64_t base, const ImageRecord& record) {
  return derive_seed({base, record.dataset_id, record.id});
}

Checkpoint make_checkpoint(const Model& model, const Config& config, std::uint64_t epoch, double val_metric) {
  Checkpoint c;
  c.label_hash = model.labels().hash();
  c.epoch = epoch;
  c.val_metric = val_metric;
  for (const auto& p : model.parameters()) c.tensors.emplace_back(p->name, p->value);
  c.config_text = serialize_config(config);
  return c;
}

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ckpt, Config* config_out) {
  Config config = parse_config(ckpt.config_text);
  LabelSpace labels(config.model.quality_levels);
  if (labels.hash() != ckpt.label_hash) {
    throw DataError("checkpoint label-space hash does not match the current label space");
  }
  const Tensor& stem = ckpt.tensor("image.stem.w");
  const std::size_t w2 = config.model.window * config.model.window;
  if (stem.rank() != 2 || stem.shape()[0] % w2 != 0) throw DataError("checkpoint stem weight has unexpected shape");
  auto model = std::make_unique<Model>(model_config_for(config, stem.shape()[0] / w2, 0), labels);
  for (const auto& p : model->parameters()) {
    const Tensor& t = ckpt.tensor(p->name);
    if (t.shape() != p->value.shape()) {
      throw DataError("checkpoint tensor '" + p->name + "' has shape " + to_string(t.shape()) + ", model expects " +
                      to_string(p->value.shape()));
    }
    p->value = t;
  }
  if (ckpt.tensors.size() != model->parameters().size()) throw DataError("checkpoint has unexpected extra tensors");
  if (config_out) *config_out = config;
  return model;
}

std::vector<Prediction> predict(const Model& model, const std::vector<const FeatureImage*>& images,
                                const std::vector<std::uint64_t>& crop_seeds, std::size_t crops) {
  if (images.size() != crop_seeds.size()) throw std::invalid_argument("predict: one crop seed per image");
  std::vector<Prediction> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += kPredictChunk) {
    const std::size_t end = std::min(images.size(), start + kPredictChunk);
    std::vector<const FeatureImage*> chunk(images.begin() + static_cast<std::ptrdiff_t>(start),
                                           images.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<CropSet> sets;
    for (std::size_t i = start; i < end; ++i) {
      sets.push_back(sample_crops(*images[i], crops, model.config().crop_size, crop_seeds[i]));
    }
    Graph g;
    NodeId w = g.constant(window_matrix(chunk, sets, model.config().window));
    const HeadNodes head = build_head(g, model, w, chunk.size(), crops);
    g.evaluate();
    const Tensor& score = g.value(head.score);
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      if (!std::isfinite(score[b])) throw NumericalError("non-finite prediction for image " + std::to_string(start + b));
      Prediction p;
      p.score = score[b];
      p.has_marginals = head.has_marginals;
      if (head.has_marginals) {
        auto row = [&](NodeId id) {
          const Tensor& t = g.value(id);
          const std::size_t n = t.shape()[1];
          return std::vector<double>(t.data().begin() + static_cast<std::ptrdiff_t>(b * n),
                                     t.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * n));
        };
        p.quality = row(head.quality_marginal);
        p.scene = row(head.scene_marginal);
        p.distortion = row(head.distortion_marginal);
        p.labels = predict_labels(p.quality, p.scene, p.distortion);
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

Prediction predict(const Model& model, const FeatureImage& image, std::size_t crops, std::uint64_t crop_seed) {
  return predict(model, {&image}, {crop_seed}, crops).front();
}

DatasetMetrics evaluate_records(const Model& model, const std::vector<ImageRecord>& records, const EvalConfig& eval) {
  DatasetMetrics m;
  m.count = records.size();
  if (records.empty()) throw DataError("cannot evaluate an empty record set");
  m.dataset = records.front().dataset_id;
  std::vector<const FeatureImage*> images;
  std::vector<std::uint64_t> seeds;
  for (const auto& r : records) {
    images.push_back(&r.features);
    seeds.push_back(record_seed(eval.crop_seed, r));
  }
  const auto preds = predict(model, images, seeds, eval.crops);
  std::vector<double> q;
  std::vector<double> mos;
  std::vector<std::size_t> ps;
  std::vector<std::size_t> pd;
  std::vector<std::uint16_t> ts;
  std::vector<std::size_t> td;
  for (std::size_t i = 0; i < records.size(); ++i) {
    q.push_back(preds[i].score);
    mos.push_back(records[i].mos);
    ps.push_back(preds[i].labels.scene);
    pd.push_back(preds[i].labels.distortion);
    ts.push_back(records[i].scene_mask);
    td.push_back(records[i].distortion);
  }
  m.srcc = records.size() >= 2 ? safe_srcc(q, mos) : kNaN;
  m.plcc = records.size() >= 3 ? safe_plcc(q, mos, eval.mapped_plcc) : kNaN;
  if (preds.front().has_marginals) {
    m.acc_scene = scene_accuracy(ps, ts);
    m.acc_distortion = distortion_accuracy(pd, td);
  } else {
    m.acc_scene = kNaN;
    m.acc_distortion = kNaN;
  }
  return m;
}

TrainResult train(const Config& config, const std::vector<Split>& splits, std::uint64_t seed,
                  const ProgressFn& progress) {
  validate(config);
  if (splits.empty()) throw DataError("train: no datasets");
  const TrainConfig& tc = config.train;
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> batch;
  for (std::size_t m = 0; m < splits.size(); ++m) {
    if (splits[m].train.empty()) throw DataError("train: dataset " + std::to_string(m) + " has no training images");
    sizes.push_back(splits[m].train.size());
    batch.push_back(tc.batch_sizes.size() == 1 ? tc.batch_sizes[0] : tc.batch_sizes.at(m));
  }
  if (tc.batch_sizes.size() != 1 && tc.batch_sizes.size() != splits.size()) {
    throw ConfigError("train.batch_size needs one value or one per dataset");
  }
  const std::size_t channels = splits[0].train[0].features.channels;

  LabelSpace labels(config.model.quality_levels);
  Model model(model_config_for(config, channels, derive_seed({seed, 1})), labels);
  const auto& params = model.parameters();
  OptimizerState opt = init_optimizer(params, tc.optimizer);
  DwaState dwa(tc.tasks, tc.weighting, tc.tau2, tc.dwa_window);
  BatchSampler sampler(sizes, batch, derive_seed({seed, 2}));
  std::mt19937_64 crop_rng(derive_seed({seed, 3}));

  TrainResult result;
  const double initial_metric = validation_metric(model, splits, config);
  result.best = make_checkpoint(model, config, 0, initial_metric);
  double best_metric = std::isfinite(initial_metric) ? initial_metric : -INFINITY;

  const std::size_t per_epoch = sampler.iterations_per_epoch();
  const std::size_t total_steps = per_epoch * tc.epochs;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto lambda = dwa.lambda();
    std::array<double, 3> epoch_sum{};
    for (std::size_t it = 0; it < per_epoch; ++it) {
      const auto picks = sampler.next();
      std::vector<const ImageRecord*> recs;
      for (std::size_t m = 0; m < picks.size(); ++m) {
        for (auto i : picks[m]) recs.push_back(&splits[m].train[i]);
      }
      std::vector<const FeatureImage*> images;
      std::vector<CropSet> crops;
      for (const auto* r : recs) {
        images.push_back(&r->features);
        crops.push_back(sample_crops(r->features, tc.crops, config.model.crop_size, crop_rng));
      }
      Graph g;
      NodeId w = g.constant(window_matrix(images, crops, config.model.window));
      const HeadNodes head = build_head(g, model, w, recs.size(), tc.crops);
      const std::vector<ImagePair> pairs = tc.tasks[0] ? make_pairs(recs) : std::vector<ImagePair>{};
      const LossNodes losses = build_losses(g, head.score, head.scene_marginal, head.distortion_marginal, recs, pairs,
                                            tc.tasks, lambda, tc.scene_loss, labels.num_scenes(),
                                            labels.num_distortions());
      g.evaluate();
      std::array<double, 3> task_loss{};
      for (std::size_t j = 0; j < 3; ++j) task_loss[j] = losses.present[j] ? g.value(losses.task[j]).item() : 0.0;
      const double total = g.value(losses.total).item();
      if (!std::isfinite(total)) {
        std::string where;
        try {
          check_finite(g);
        } catch (const NumericalError& e) {
          where = e.what();
        }
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", iteration " +
                             std::to_string(it) + " (quality " + std::to_string(task_loss[0]) + ", scene " +
                             std::to_string(task_loss[1]) + ", distortion " + std::to_string(task_loss[2]) + ")" +
                             (where.empty() ? "" : ": " + where));
      }
      for (const auto& p : params) p->zero_grad();
      g.backprop(losses.total);
      adamw_step(params, opt, lr_at(step, total_steps, tc.optimizer.lr));
      ++step;
      dwa.record(task_loss);
      for (std::size_t j = 0; j < 3; ++j) epoch_sum[j] += task_loss[j];
    }
    dwa.end_epoch();

    EpochLog row;
    row.epoch = epoch;
    for (std::size_t j = 0; j < 3; ++j) row.loss[j] = epoch_sum[j] / static_cast<double>(per_epoch);
    row.lambda = lambda;
    row.lr = lr_at(step, total_steps, tc.optimizer.lr);
    row.val_metric = validation_metric(model, splits, config);
    if (std::isfinite(row.val_metric) && row.val_metric > best_metric) {
      best_metric = row.val_metric;
      result.best = make_checkpoint(model, config, epoch, row.val_metric);
    }
    result.log.push_back(row);
    if (progress) progress(row);
  }
  return result;
}

}  // namespace mtiqa
