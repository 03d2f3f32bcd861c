#include "mtiqa/sessions.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "mtiqa/errors.hpp"
#include "mtiqa/metrics.hpp"
#include "mtiqa/rng.hpp"

namespace mtiqa {

namespace {

std::string num(double x) {
  if (!std::isfinite(x)) return "nan";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

// Median/std over the finite values only; NaN if none are finite.
std::pair<double, double> robust_summary(const std::vector<double>& values) {
  std::vector<double> finite;
  for (double v : values) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  if (finite.empty()) return {NAN, NAN};
  return {median(finite), stddev(finite)};
}

}  // namespace

std::vector<std::size_t> train_dataset_ids(const Config& config, std::size_t available) {
  std::vector<std::size_t> ids = config.train.datasets;
  if (ids.empty()) {
    for (std::size_t m = 0; m < available; ++m) ids.push_back(m);
  }
  for (auto id : ids) {
    if (id >= available) throw DataError("train.datasets names dataset " + std::to_string(id) + " which is not loaded");
  }
  return ids;
}

std::vector<std::size_t> eval_dataset_ids(const Config& config, std::size_t available) {
  if (config.eval.datasets.empty()) return train_dataset_ids(config, available);
  for (auto id : config.eval.datasets) {
    if (id >= available) throw DataError("eval.datasets names dataset " + std::to_string(id) + " which is not loaded");
  }
  return config.eval.datasets;
}

std::vector<Split> make_splits(const Config& config, const std::vector<std::vector<ImageRecord>>& datasets,
                               const std::vector<std::size_t>& ids, std::uint64_t seed) {
  std::vector<Split> out;
  for (auto id : ids) {
    SplitSpec spec = config.train.split;
    spec.seed = derive_seed({seed, 0x5b1175ULL, id});
    out.push_back(split(datasets.at(id), spec));
  }
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<SessionRow>& rows) {
  std::vector<std::size_t> ids;
  for (const auto& r : rows) {
    if (std::find(ids.begin(), ids.end(), r.metrics.dataset) == ids.end()) ids.push_back(r.metrics.dataset);
  }
  std::vector<SummaryRow> out;
  for (auto id : ids) {
    std::vector<double> s, p, as, ad;
    for (const auto& r : rows) {
      if (r.metrics.dataset != id) continue;
      s.push_back(r.metrics.srcc);
      p.push_back(r.metrics.plcc);
      as.push_back(r.metrics.acc_scene);
      ad.push_back(r.metrics.acc_distortion);
    }
    SummaryRow row;
    row.dataset = id;
    row.median.dataset = row.stddev.dataset = id;
    row.median.count = row.stddev.count = s.size();
    std::tie(row.median.srcc, row.stddev.srcc) = robust_summary(s);
    std::tie(row.median.plcc, row.stddev.plcc) = robust_summary(p);
    std::tie(row.median.acc_scene, row.stddev.acc_scene) = robust_summary(as);
    std::tie(row.median.acc_distortion, row.stddev.acc_distortion) = robust_summary(ad);
    out.push_back(row);
  }
  return out;
}

SessionsResult run_sessions(const Config& config, const std::vector<std::vector<ImageRecord>>& datasets,
                            std::size_t sessions, std::size_t jobs, const ProgressFn& progress) {
  validate(config);
  if (sessions == 0) throw ConfigError("need at least one session");
  const auto train_ids = train_dataset_ids(config, datasets.size());
  const auto eval_ids = eval_dataset_ids(config, datasets.size());

  std::vector<std::vector<SessionRow>> per_session(sessions);
  std::vector<TrainResult> trained(sessions);
  std::vector<std::exception_ptr> errors(sessions);
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;

  auto worker = [&]() {
    for (std::size_t s = next++; s < sessions; s = next++) {
      try {
        const std::uint64_t seed = config.seed + s;
        const auto splits = make_splits(config, datasets, train_ids, seed);
        ProgressFn guarded;
        if (progress) {
          guarded = [&](const EpochLog& row) {
            std::lock_guard lock(progress_mutex);
            progress(row);
          };
        }
        trained[s] = train(config, splits, seed, guarded);
        const auto model = model_from_checkpoint(trained[s].best);
        for (auto id : eval_ids) {
          const auto it = std::find(train_ids.begin(), train_ids.end(), id);
          const auto& records = it != train_ids.end() ? splits[static_cast<std::size_t>(it - train_ids.begin())].test
                                                      : datasets[id];
          SessionRow row;
          row.session = s;
          row.metrics = evaluate_records(*model, records, config.eval);
          row.metrics.dataset = id;
          per_session[s].push_back(row);
        }
      } catch (...) {
        errors[s] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, sessions);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t s = 0; s < sessions; ++s) {
    if (!errors[s]) continue;
    try {
      std::rethrow_exception(errors[s]);
    } catch (const NumericalError& e) {
      throw NumericalError("session " + std::to_string(s) + " (seed " + std::to_string(config.seed + s) +
                           ") failed: " + e.what());
    } catch (const DataError& e) {
      throw DataError("session " + std::to_string(s) + " (seed " + std::to_string(config.seed + s) +
                      ") failed: " + e.what());
    }
  }

  SessionsResult result;
  for (auto& rows : per_session) result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  result.summary = summarize(result.rows);
  result.training = std::move(trained);
  return result;
}

void write_results_csv(std::ostream& out, const std::vector<SessionRow>& rows, const std::vector<SummaryRow>& summary) {
  out << "session,dataset,srcc,plcc,acc_scene,acc_distortion,srcc_std,plcc_std,acc_scene_std,acc_distortion_std\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << r.session << ',' << m.dataset << ',' << num(m.srcc) << ',' << num(m.plcc) << ',' << num(m.acc_scene) << ','
        << num(m.acc_distortion) << ",,,,\n";
  }
  for (const auto& s : summary) {
    out << "summary," << s.dataset << ',' << num(s.median.srcc) << ',' << num(s.median.plcc) << ','
        << num(s.median.acc_scene) << ',' << num(s.median.acc_distortion) << ',' << num(s.stddev.srcc) << ','
        << num(s.stddev.plcc) << ',' << num(s.stddev.acc_scene) << ',' << num(s.stddev.acc_distortion) << '\n';
  }
}

void write_train_log_csv(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,loss_quality,loss_scene,loss_distortion,lambda_quality,lambda_scene,lambda_distortion,lr,val_metric\n";
  for (const auto& r : log) {
    out << r.epoch;
    for (double x : r.loss) out << ',' << num(x);
    for (double x : r.lambda) out << ',' << num(x);
    out << ',' << num(r.lr) << ',' << num(r.val_metric) << '\n';
  }
}

}  // namespace mtiqa
