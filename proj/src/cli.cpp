#include "mtiqa/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <json.hpp>
#include <ostream>

#include "mtiqa/config.hpp"
#include "mtiqa/errors.hpp"
#include "mtiqa/metrics.hpp"
#include "mtiqa/sessions.hpp"
#include "mtiqa/training.hpp"

namespace mtiqa {

namespace fs = std::filesystem;

fs::path dataset_path(const fs::path& dir, std::size_t dataset) {
  return dir / ("dataset_" + std::to_string(dataset) + ".mtiqa");
}

std::vector<std::vector<ImageRecord>> load_datasets(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("data directory '" + dir.string() + "' does not exist");
  const std::uint64_t hash = LabelSpace(5).hash();
  std::vector<std::vector<ImageRecord>> out;
  std::uint32_t expected = 0;
  for (std::size_t m = 0;; ++m) {
    const fs::path p = dataset_path(dir, m);
    if (!fs::exists(p)) {
      if (m == 0) throw DataError("no dataset files in '" + dir.string() + "'");
      break;
    }
    DatasetFile f = read_dataset(p);
    if (f.label_hash != hash) throw DataError("'" + p.string() + "': label-space hash mismatch");
    if (m == 0) expected = f.num_datasets;
    if (f.num_datasets != expected) throw DataError("'" + p.string() + "': inconsistent dataset count in header");
    for (const auto& r : f.records) {
      if (r.dataset_id != m) throw DataError("'" + p.string() + "': record " + std::to_string(r.id) +
                                             " belongs to dataset " + std::to_string(r.dataset_id));
    }
    out.push_back(std::move(f.records));
  }
  if (out.size() != expected) {
    throw DataError("expected " + std::to_string(expected) + " dataset files in '" + dir.string() + "', found " +
                    std::to_string(out.size()));
  }
  return out;
}

namespace {

struct Options {
  std::string config_path;
  std::int64_t seed = -1;
  std::string out_dir;
  std::size_t jobs = 1;
  std::vector<std::string> overrides;
  std::string checkpoint;
  std::string checkpoint_b;
  std::string input;
  int verbosity = 1;  // 0 quiet, 1 progress, 2 per-epoch session progress
};

Config resolve_config(const Options& o) {
  Config c = o.config_path.empty() ? Config{} : load_config(o.config_path);
  for (const auto& s : o.overrides) apply_override(c, s);
  if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
  validate(c);
  return c;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory '" + dir.string() + "'");
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw DataError("cannot open '" + p.string() + "' for writing");
  return f;
}

int cmd_gendata(const Options& o, std::ostream& out) {
  const Config c = resolve_config(o);
  GeneratorConfig gen = c.generator;
  gen.seed = c.seed;
  const fs::path dir = o.out_dir.empty() ? fs::path(c.data_dir) : fs::path(o.out_dir);
  ensure_dir(dir);
  const LabelSpace labels(5);
  const auto sets = generate(gen, labels);
  for (std::size_t m = 0; m < sets.size(); ++m) {
    DatasetFile f;
    f.num_datasets = static_cast<std::uint32_t>(sets.size());
    f.grid = static_cast<std::uint32_t>(gen.grid);
    f.channels = static_cast<std::uint32_t>(gen.channels);
    f.label_hash = labels.hash();
    f.records = sets[m];
    const fs::path p = dataset_path(dir, m);
    write_dataset(p, f);
    auto side = open_out(fs::path(p).replace_extension(".ini"));
    side << "[dataset]\nindex = " << m << "\nrecords = " << f.records.size() << "\n\n" << gen.describe();
    if (o.verbosity > 0) out << "wrote " << p.string() << " (" << f.records.size() << " records)\n";
  }
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  const Config c = resolve_config(o);
  const auto datasets = load_datasets(c.data_dir);
  const auto ids = train_dataset_ids(c, datasets.size());
  const auto splits = make_splits(c, datasets, ids, c.seed);
  const fs::path dir = o.out_dir.empty() ? fs::path("run") : fs::path(o.out_dir);
  ensure_dir(dir);
  const TrainResult r = train(c, splits, c.seed, [&](const EpochLog& row) {
    if (o.verbosity > 0) out << "epoch " << row.epoch << " loss " << row.loss[0] << " " << row.loss[1] << " " << row.loss[2] << " val "
        << row.val_metric << "\n";
  });
  save_checkpoint(dir / "checkpoint.mtiqa", r.best);
  auto log = open_out(dir / "train_log.csv");
  write_train_log_csv(log, r.log);
  auto cfg = open_out(dir / "config.ini");
  cfg << serialize_config(c);
  out << "best epoch " << r.best.epoch << " val " << r.best.val_metric << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  Config c = resolve_config(o);
  const fs::path dir = o.out_dir.empty() ? fs::path("run") : fs::path(o.out_dir);
  std::vector<SessionRow> rows;
  if (!o.checkpoint.empty()) {
    // Score an existing checkpoint on the test splits of the session the
    // config's seed describes (held-out datasets are scored whole).
    Config ck_config;
    const auto model = model_from_checkpoint(load_checkpoint(o.checkpoint), &ck_config);
    const auto datasets = load_datasets(c.data_dir);
    const auto train_ids = train_dataset_ids(c, datasets.size());
    const auto splits = make_splits(c, datasets, train_ids, c.seed);
    for (auto id : eval_dataset_ids(c, datasets.size())) {
      const auto it = std::find(train_ids.begin(), train_ids.end(), id);
      const auto& records =
          it != train_ids.end() ? splits[static_cast<std::size_t>(it - train_ids.begin())].test : datasets[id];
      SessionRow row;
      row.metrics = evaluate_records(*model, records, c.eval);
      row.metrics.dataset = id;
      rows.push_back(row);
    }
  } else {
    const auto datasets = load_datasets(c.data_dir);
    ProgressFn progress;
    if (o.verbosity > 1) {
      progress = [&](const EpochLog& row) { err << "epoch " << row.epoch << " val " << row.val_metric << "\n"; };
    }
    const auto result = run_sessions(c, datasets, c.eval.sessions, o.jobs, progress);
    rows = result.rows;
  }
  ensure_dir(dir);
  const auto summary = summarize(rows);
  auto csv = open_out(dir / "results.csv");
  write_results_csv(csv, rows, summary);
  write_results_csv(out, rows, summary);
  return kExitOk;
}

std::vector<ImageRecord> load_corpus(const std::string& input) {
  if (input.empty()) throw ConfigError("--input is required");
  return read_dataset(input).records;
}

int cmd_predict(const Options& o, std::ostream& out) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  Config c;
  const auto model = model_from_checkpoint(load_checkpoint(o.checkpoint), &c);
  for (const auto& s : o.overrides) apply_override(c, s);
  const auto records = load_corpus(o.input);
  std::vector<const FeatureImage*> images;
  std::vector<std::uint64_t> seeds;
  for (const auto& r : records) {
    images.push_back(&r.features);
    seeds.push_back(record_seed(c.eval.crop_seed, r));
  }
  const auto preds = predict(*model, images, seeds, c.eval.crops);
  std::ofstream file;
  if (!o.out_dir.empty()) {
    ensure_dir(o.out_dir);
    file = open_out(fs::path(o.out_dir) / "predictions.jsonl");
  }
  std::ostream& sink = o.out_dir.empty() ? out : file;
  const LabelSpace& labels = model->labels();
  for (std::size_t i = 0; i < records.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = records[i].id;
    j["dataset"] = records[i].dataset_id;
    j["score"] = preds[i].score;
    if (preds[i].has_marginals) {
      j["scene"] = labels.scenes()[preds[i].labels.scene];
      j["distortion"] = labels.distortions()[preds[i].labels.distortion];
      j["quality"] = preds[i].quality;
    } else {
      j["scene"] = nullptr;
      j["distortion"] = nullptr;
      j["quality"] = nullptr;
    }
    sink << j.dump() << '\n';
  }
  return kExitOk;
}

int cmd_gmad(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.checkpoint.empty() || o.checkpoint_b.empty()) throw ConfigError("--checkpoint and --checkpoint-b are required");
  Config c;
  const auto model_a = model_from_checkpoint(load_checkpoint(o.checkpoint), &c);
  const auto model_b = model_from_checkpoint(load_checkpoint(o.checkpoint_b));
  for (const auto& s : o.overrides) apply_override(c, s);
  const auto records = load_corpus(o.input);
  std::vector<const FeatureImage*> images;
  std::vector<std::uint64_t> seeds;
  for (const auto& r : records) {
    images.push_back(&r.features);
    seeds.push_back(record_seed(c.eval.crop_seed, r));
  }
  std::vector<double> sa, sb;
  for (const auto& p : predict(*model_a, images, seeds, c.eval.crops)) sa.push_back(p.score);
  for (const auto& p : predict(*model_b, images, seeds, c.eval.crops)) sb.push_back(p.score);
  std::vector<std::string> warnings;
  const auto pairs = gmad(sa, sb, c.gmad, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";

  std::ofstream file;
  if (!o.out_dir.empty()) {
    ensure_dir(o.out_dir);
    file = open_out(fs::path(o.out_dir) / "gmad.csv");
  }
  std::ostream& sink = o.out_dir.empty() ? out : file;
  sink << "attacker,defender,level,best_id,worst_id,best_index,worst_index,attacker_gap,defender_gap,epsilon\n";
  sink.precision(17);
  for (const auto& p : pairs) {
    sink << (p.attacker == 0 ? "A" : "B") << ',' << (p.defender == 0 ? "A" : "B") << ',' << p.level << ','
         << records[p.best].id << ',' << records[p.worst].id << ',' << p.best << ',' << p.worst << ','
         << p.attacker_gap << ',' << p.defender_gap << ',' << p.epsilon << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multitask blind image quality assessment on synthetic feature images", "mtiqa"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "INI configuration file");
    sub->add_option("--seed", o.seed, "master seed (overrides run.seed)");
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--jobs", o.jobs, "parallel sessions")->check(CLI::PositiveNumber);
    sub->add_option("--set", o.overrides, "section.key=value override (repeatable)");
    auto* quiet = sub->add_flag_callback("-q,--quiet", [&o] { o.verbosity = 0; }, "no progress output");
    sub->add_flag_callback("-v,--verbose", [&o] { o.verbosity = 2; }, "per-epoch progress for eval sessions on stderr")
        ->excludes(quiet);
  };
  auto* gendata = app.add_subcommand("gendata", "generate synthetic datasets");
  auto* train_cmd = app.add_subcommand("train", "train one model and write a checkpoint");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint, or run repeated sessions");
  auto* predict_cmd = app.add_subcommand("predict", "score a dataset file as JSON lines");
  auto* gmad_cmd = app.add_subcommand("gmad", "gMAD pair search between two checkpoints");
  for (auto* sub : {gendata, train_cmd, eval, predict_cmd, gmad_cmd}) common(sub);
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint to score");
  predict_cmd->add_option("--checkpoint", o.checkpoint, "checkpoint")->required();
  predict_cmd->add_option("--input", o.input, "dataset file")->required();
  gmad_cmd->add_option("--checkpoint", o.checkpoint, "model A")->required();
  gmad_cmd->add_option("--checkpoint-b", o.checkpoint_b, "model B")->required();
  gmad_cmd->add_option("--input", o.input, "corpus dataset file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*gendata) return cmd_gendata(o, out);
    if (*train_cmd) return cmd_train(o, out);
    if (*eval) return cmd_eval(o, out, err);
    if (*predict_cmd) return cmd_predict(o, out);
    if (*gmad_cmd) return cmd_gmad(o, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace mtiqa
