#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mtiqa/config.hpp"
#include "mtiqa/training.hpp"

namespace mtiqa {

struct SessionRow {
  std::size_t session = 0;
  DatasetMetrics metrics;
};

struct SummaryRow {
  std::size_t dataset = 0;
  DatasetMetrics median;  // count holds the number of sessions
  DatasetMetrics stddev;
};

struct SessionsResult {
  std::vector<SessionRow> rows;       // session-major, then dataset
  std::vector<SummaryRow> summary;    // one per evaluated dataset
  std::vector<TrainResult> training;  // one per session
};

/// Dataset ids to train on and to evaluate, after applying defaults.
std::vector<std::size_t> train_dataset_ids(const Config& config, std::size_t available);
std::vector<std::size_t> eval_dataset_ids(const Config& config, std::size_t available);

/// n independent split/train/evaluate cycles; session s uses seed
/// config.seed + s. Datasets that were trained on are scored on their test
/// split, held-out datasets on every record. Sessions run on up to `jobs`
/// threads; results are ordered by session regardless.
SessionsResult run_sessions(const Config& config, const std::vector<std::vector<ImageRecord>>& datasets,
                            std::size_t sessions, std::size_t jobs = 1, const ProgressFn& progress = {});

std::vector<SummaryRow> summarize(const std::vector<SessionRow>& rows);

/// session,dataset,srcc,plcc,acc_scene,acc_distortion then, on the summary
/// rows (session = "summary") only, the four standard deviations.
void write_results_csv(std::ostream& out, const std::vector<SessionRow>& rows, const std::vector<SummaryRow>& summary);
void write_train_log_csv(std::ostream& out, const std::vector<EpochLog>& log);

/// Splits each dataset with the per-session seed.
std::vector<Split> make_splits(const Config& config, const std::vector<std::vector<ImageRecord>>& datasets,
                               const std::vector<std::size_t>& ids, std::uint64_t seed);

}  // namespace mtiqa
