#include "mtiqa/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "mtiqa/errors.hpp"

namespace mtiqa {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto t = trim(v);
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto t = trim(v);
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const auto t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);  // shortest round-trip form
  return std::string(buf, p);
}

std::string fmt(bool b) { return b ? "true" : "false"; }

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& part : split_on(v, ',')) out.push_back(to_u64(key, part));
  return out;
}

struct Entry {
  std::string section;
  std::string key;
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&)> set;
};

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e;
    auto size_entry = [&e](std::string sec, std::string key, auto member) {
      const std::string name = sec + "." + key;
      e.push_back({sec, key, [member](const Config& c) { return std::to_string(member(const_cast<Config&>(c))); },
                   [member, name](Config& c, const std::string& v) {
                     member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(to_u64(name, v));
                   }});
    };
    auto real_entry = [&e](std::string sec, std::string key, auto member) {
      const std::string name = sec + "." + key;
      e.push_back({sec, key, [member](const Config& c) { return fmt(member(const_cast<Config&>(c))); },
                   [member, name](Config& c, const std::string& v) { member(c) = to_double(name, v); }});
    };
    auto bool_entry = [&e](std::string sec, std::string key, auto member) {
      const std::string name = sec + "." + key;
      e.push_back({sec, key, [member](const Config& c) { return fmt(static_cast<bool>(member(const_cast<Config&>(c)))); },
                   [member, name](Config& c, const std::string& v) { member(c) = to_bool(name, v); }});
    };

    size_entry("run", "seed", [](Config& c) -> std::uint64_t& { return c.seed; });
    e.push_back({"run", "data_dir", [](const Config& c) { return c.data_dir; },
                 [](Config& c, const std::string& v) { c.data_dir = trim(v); }});

    size_entry("generator", "num_datasets", [](Config& c) -> std::size_t& { return c.generator.num_datasets; });
    size_entry("generator", "references", [](Config& c) -> std::size_t& { return c.generator.references; });
    size_entry("generator", "versions", [](Config& c) -> std::size_t& { return c.generator.versions; });
    size_entry("generator", "grid", [](Config& c) -> std::size_t& { return c.generator.grid; });
    size_entry("generator", "channels", [](Config& c) -> std::size_t& { return c.generator.channels; });
    real_entry("generator", "gamma", [](Config& c) -> double& { return c.generator.gamma; });
    real_entry("generator", "sigma_obs", [](Config& c) -> double& { return c.generator.sigma_obs; });
    real_entry("generator", "min_severity", [](Config& c) -> double& { return c.generator.min_severity; });
    real_entry("generator", "two_scene_prob", [](Config& c) -> double& { return c.generator.two_scene_prob; });
    real_entry("generator", "texture", [](Config& c) -> double& { return c.generator.texture; });
    real_entry("generator", "offset", [](Config& c) -> double& { return c.generator.offset; });
    real_entry("generator", "detail", [](Config& c) -> double& { return c.generator.detail; });
    e.push_back({"generator", "scales",
                 [](const Config& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.generator.scales.size(); ++i) {
                     out += (i ? "," : "") + fmt(c.generator.scales[i].gain) + ":" + fmt(c.generator.scales[i].offset);
                   }
                   return out;
                 },
                 [](Config& c, const std::string& v) {
                   c.generator.scales.clear();
                   for (const auto& part : split_on(v, ',')) {
                     const auto ab = split_on(part, ':');
                     if (ab.size() != 2) throw ConfigError("generator.scales: expected gain:offset, got '" + part + "'");
                     c.generator.scales.push_back(
                         {to_double("generator.scales", ab[0]), to_double("generator.scales", ab[1])});
                   }
                 }});
    e.push_back({"generator", "profiles",
                 [](const Config& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.generator.profiles.size(); ++i) {
                     if (i) out += ";";
                     for (std::size_t k = 0; k < c.generator.profiles[i].size(); ++k) {
                       out += (k ? " " : "") + fmt(c.generator.profiles[i][k]);
                     }
                   }
                   return out;
                 },
                 [](Config& c, const std::string& v) {
                   c.generator.profiles.clear();
                   for (const auto& part : split_on(v, ';')) {
                     std::vector<double> w;
                     for (const auto& x : split_on(part, ' ')) w.push_back(to_double("generator.profiles", x));
                     c.generator.profiles.push_back(std::move(w));
                   }
                 }});

    e.push_back({"model", "quality_levels", [](const Config& c) { return std::to_string(c.model.quality_levels); },
                 [](Config& c, const std::string& v) {
                   c.model.quality_levels = static_cast<int>(to_u64("model.quality_levels", v));
                 }});
    size_entry("model", "crop_size", [](Config& c) -> std::size_t& { return c.model.crop_size; });
    size_entry("model", "window", [](Config& c) -> std::size_t& { return c.model.window; });
    size_entry("model", "hidden", [](Config& c) -> std::size_t& { return c.model.hidden; });
    size_entry("model", "embed_dim", [](Config& c) -> std::size_t& { return c.model.embed_dim; });
    size_entry("model", "token_dim", [](Config& c) -> std::size_t& { return c.model.token_dim; });
    real_entry("model", "tau_init", [](Config& c) -> double& { return c.model.tau_init; });
    bool_entry("model", "separate_templates", [](Config& c) -> bool& { return c.model.separate_templates; });
    bool_entry("model", "freeze_text_encoder", [](Config& c) -> bool& { return c.model.freeze_text_encoder; });
    bool_entry("model", "linear_head", [](Config& c) -> bool& { return c.model.linear_head; });

    size_entry("train", "epochs", [](Config& c) -> std::size_t& { return c.train.epochs; });
    e.push_back({"train", "batch_size", [](const Config& c) { return join_sizes(c.train.batch_sizes); },
                 [](Config& c, const std::string& v) { c.train.batch_sizes = parse_sizes("train.batch_size", v); }});
    size_entry("train", "crops", [](Config& c) -> std::size_t& { return c.train.crops; });
    e.push_back({"train", "tasks", [](const Config& c) { return tasks_to_string(c.train.tasks); },
                 [](Config& c, const std::string& v) { c.train.tasks = parse_tasks(v); }});
    e.push_back({"train", "scene_loss",
                 [](const Config& c) { return std::string(c.train.scene_loss == SceneLoss::kBinary ? "binary" : "softmax"); },
                 [](Config& c, const std::string& v) {
                   const auto t = trim(v);
                   if (t == "binary") c.train.scene_loss = SceneLoss::kBinary;
                   else if (t == "softmax") c.train.scene_loss = SceneLoss::kSoftmax;
                   else throw ConfigError("train.scene_loss: expected binary or softmax, got '" + v + "'");
                 }});
    e.push_back({"train", "weighting",
                 [](const Config& c) { return std::string(c.train.weighting == Weighting::kDwa ? "dwa" : "equal"); },
                 [](Config& c, const std::string& v) {
                   const auto t = trim(v);
                   if (t == "dwa") c.train.weighting = Weighting::kDwa;
                   else if (t == "equal") c.train.weighting = Weighting::kEqual;
                   else throw ConfigError("train.weighting: expected dwa or equal, got '" + v + "'");
                 }});
    real_entry("train", "tau2", [](Config& c) -> double& { return c.train.tau2; });
    size_entry("train", "dwa_window", [](Config& c) -> std::size_t& { return c.train.dwa_window; });
    real_entry("train", "lr", [](Config& c) -> double& { return c.train.optimizer.lr; });
    real_entry("train", "beta1", [](Config& c) -> double& { return c.train.optimizer.beta1; });
    real_entry("train", "beta2", [](Config& c) -> double& { return c.train.optimizer.beta2; });
    real_entry("train", "eps", [](Config& c) -> double& { return c.train.optimizer.eps; });
    real_entry("train", "weight_decay", [](Config& c) -> double& { return c.train.optimizer.weight_decay; });
    e.push_back({"train", "datasets", [](const Config& c) { return join_sizes(c.train.datasets); },
                 [](Config& c, const std::string& v) { c.train.datasets = parse_sizes("train.datasets", v); }});
    real_entry("train", "train_fraction", [](Config& c) -> double& { return c.train.split.train; });
    real_entry("train", "val_fraction", [](Config& c) -> double& { return c.train.split.val; });
    real_entry("train", "test_fraction", [](Config& c) -> double& { return c.train.split.test; });

    size_entry("eval", "crops", [](Config& c) -> std::size_t& { return c.eval.crops; });
    size_entry("eval", "crop_seed", [](Config& c) -> std::uint64_t& { return c.eval.crop_seed; });
    size_entry("eval", "sessions", [](Config& c) -> std::size_t& { return c.eval.sessions; });
    e.push_back({"eval", "datasets", [](const Config& c) { return join_sizes(c.eval.datasets); },
                 [](Config& c, const std::string& v) { c.eval.datasets = parse_sizes("eval.datasets", v); }});
    bool_entry("eval", "mapped_plcc", [](Config& c) -> bool& { return c.eval.mapped_plcc; });

    size_entry("gmad", "levels", [](Config& c) -> std::size_t& { return c.gmad.levels; });
    real_entry("gmad", "epsilon", [](Config& c) -> double& { return c.gmad.epsilon; });
    return e;
  }();
  return entries;
}

const Entry& find_entry(const std::string& section, const std::string& key) {
  for (const auto& e : registry()) {
    if (e.section == section && e.key == key) return e;
  }
  throw ConfigError("unknown config key '" + section + "." + key + "'");
}

}  // namespace

std::string tasks_to_string(const TaskSet& tasks) {
  static const char* names[3] = {"quality", "scene", "distortion"};
  std::string out;
  for (std::size_t j = 0; j < 3; ++j) {
    if (!tasks[j]) continue;
    if (!out.empty()) out += ",";
    out += names[j];
  }
  return out;
}

TaskSet parse_tasks(const std::string& text) {
  TaskSet t{false, false, false};
  for (const auto& part : split_on(text, ',')) {
    if (part == "quality") t[0] = true;
    else if (part == "scene") t[1] = true;
    else if (part == "distortion") t[2] = true;
    else throw ConfigError("train.tasks: unknown task '" + part + "'");
  }
  return t;
}

Config parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  Config c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' outside a section");
    for (const auto& [key, value] : body) find_entry(section, key).set(c, value.data());
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const Config& config) {
  std::string out;
  std::string section;
  for (const auto& e : registry()) {
    if (e.section != section) {
      if (!section.empty()) out += "\n";
      out += "[" + e.section + "]\n";
      section = e.section;
    }
    out += e.key + " = " + e.get(config) + "\n";
  }
  return out;
}

void apply_override(Config& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override must look like section.key=value, got '" + assignment + "'");
  }
  find_entry(trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)))
      .set(config, assignment.substr(eq + 1));
}

void validate(const Config& c) {
  c.generator.validate();
  std::size_t k = 0;
  for (bool t : c.train.tasks) k += t;
  if (k == 0) throw ConfigError("train.tasks must name at least one task");
  if (c.train.weighting == Weighting::kDwa && k < 2) {
    throw ConfigError("train.weighting = dwa requires at least two tasks; use equal");
  }
  if (c.model.linear_head && (c.train.tasks[1] || c.train.tasks[2] || !c.train.tasks[0])) {
    throw ConfigError("model.linear_head supports the quality task only");
  }
  if (c.model.linear_head && c.model.separate_templates) {
    throw ConfigError("model.linear_head and model.separate_templates are exclusive");
  }
  if (c.model.quality_levels != 2 && c.model.quality_levels != 5) throw ConfigError("model.quality_levels must be 2 or 5");
  if (c.train.batch_sizes.empty()) throw ConfigError("train.batch_size must be set");
  for (auto b : c.train.batch_sizes) {
    if (b < 2 && c.train.tasks[0]) throw ConfigError("train.batch_size must be >= 2 to form pairs");
  }
  if (c.train.crops == 0 || c.eval.crops == 0) throw ConfigError("crop counts must be positive");
  if (!(c.train.tau2 > 0.0)) throw ConfigError("train.tau2 must be positive");
  if (!(c.train.optimizer.lr >= 0.0)) throw ConfigError("train.lr must be non-negative");
  if (c.eval.sessions == 0) throw ConfigError("eval.sessions must be positive");
  if (c.gmad.levels == 0) throw ConfigError("gmad.levels must be positive");
}

}  // namespace mtiqa
