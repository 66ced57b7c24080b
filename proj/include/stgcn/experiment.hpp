#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stgcn/common.hpp"
#include "stgcn/curriculum.hpp"
#include "stgcn/dataset_io.hpp"
#include "stgcn/features.hpp"
#include "stgcn/model.hpp"
#include "stgcn/train.hpp"
#include "stgcn/transfer.hpp"

// Experiment-file driven orchestration used by the CLI. One experiment per
// file; all artifacts land in the configured output directory together with
// a manifest (config echo, seed, artifact content hashes).

namespace stgcn {

// Flat key-value text with [section] headers.
//
//   # comment
//   [section]
//   key = value
//
// Keys are addressed as "section.key". Values keep internal whitespace;
// '#' starts a comment anywhere outside a value's leading text.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& is, const std::string& name) {
    KeyValueConfig kv;
    std::string line, section;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const auto begin = s.find_first_not_of(" \t\r");
        if (begin == std::string::npos) return std::string();
        const auto end = s.find_last_not_of(" \t\r");
        return s.substr(begin, end - begin + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(name + ":" + std::to_string(line_no) + ": unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty())
          throw ConfigError(name + ":" + std::to_string(line_no) + ": empty section name");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(name + ":" + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty())
        throw ConfigError(name + ":" + std::to_string(line_no) + ": empty key");
      kv.values_[section.empty() ? key : section + "." + key] = trim(line.substr(eq + 1));
    }
    return kv;
  }

  static KeyValueConfig parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    return parse(is, path);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key: " + key);
    return it->second;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  int get_int(const std::string& key) const { return parse_int(key, get(key)); }
  int get_int_or(const std::string& key, int fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  double get_double(const std::string& key) const { return parse_double(key, get(key)); }
  double get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  std::uint64_t get_u64_or(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    try {
      return std::stoull(get(key));
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": expected an unsigned integer");
    }
  }

  std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(get(key))) out.push_back(parse_double(key, item));
    return out;
  }

  std::vector<int> get_ints(const std::string& key) const {
    std::vector<int> out;
    for (const auto& item : split_list(get(key))) out.push_back(parse_int(key, item));
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> items;
    std::string cur;
    for (char ch : value) {
      if (ch == ',') {
        items.push_back(cur);
        cur.clear();
      } else if (ch != ' ' && ch != '\t') {
        cur.push_back(ch);
      }
    }
    if (!cur.empty() || !items.empty()) items.push_back(cur);
    return items;
  }

  static int parse_int(const std::string& key, const std::string& value) {
    try {
      std::size_t pos = 0;
      const int v = std::stoi(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": expected an integer, got '" + value + "'");
    }
  }

  static double parse_double(const std::string& key, const std::string& value) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": expected a number, got '" + value + "'");
    }
  }

  std::map<std::string, std::string> values_;
};

namespace experiment {

// STGCN_OUTPUT_DIR overrides the configured output directory (and nothing
// else).
inline std::string resolve_output_dir(const std::string& configured) {
  if (const char* env = std::getenv("STGCN_OUTPUT_DIR"); env && *env) return env;
  return configured;
}

inline std::uint64_t hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot hash missing artifact: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0)
    h = fnv1a64(buf, std::size_t(is.gcount()), h);
  return h;
}

// manifest.json: command, seed, the full config echo and one fnv1a-64 hash
// per artifact. Deterministic content so identical runs produce identical
// manifests.
inline void write_manifest(const std::string& out_dir, const std::string& command,
                           std::uint64_t seed, const KeyValueConfig& kv,
                           const std::vector<std::string>& artifacts) {
  nlohmann::json j;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = kv.values();
  nlohmann::json hashes;
  for (const auto& path : artifacts) {
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx", (unsigned long long)hash_file(path));
    hashes[std::filesystem::path(path).filename().string()] = hex;
  }
  j["artifacts"] = hashes;
  std::ofstream os(std::filesystem::path(out_dir) / "manifest.json");
  if (!os) throw DataError("cannot write manifest in " + out_dir);
  os << j.dump(2) << '\n';
}

inline TrainConfig train_config_from(const KeyValueConfig& kv, std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = kv.get_int_or("train.epochs", 30);
  tc.batch_size = kv.get_int_or("train.batch_size", 4);
  if (kv.has("train.lr_values")) tc.lr_values = kv.get_doubles("train.lr_values");
  if (kv.has("train.lr_boundaries")) tc.lr_boundaries = kv.get_ints("train.lr_boundaries");
  tc.momentum = kv.get_double_or("train.momentum", 0.9);
  tc.seed = seed;
  tc.validate();
  return tc;
}

inline ModelConfig model_config_from(const KeyValueConfig& kv, const Dataset& train,
                                     std::uint64_t seed) {
  if (train.samples.empty()) throw DataError("training dataset is empty");
  ModelConfig mc;
  mc.topology = build_topology(train.topology_kind);
  mc.num_classes = train.num_classes();
  mc.frames = train.samples[0].frames;
  mc.width_ratio = kv.get_double_or("model.width_ratio", 1.0);
  mc.strategy = strategy_from_string(kv.get_or("model.strategy", "spatial"));
  if (kv.has("model.base_channels")) mc.base_channels = kv.get_ints("model.base_channels");
  if (kv.has("model.strides")) mc.strides = kv.get_ints("model.strides");
  mc.temporal_kernel = kv.get_int_or("model.temporal_kernel", 9);
  if (kv.has("model.head_layers")) mc.head.layer_sizes = kv.get_ints("model.head_layers");
  mc.head.dropout_rate = kv.get_double_or("model.head_dropout", 0.0);
  mc.head.seed = seed;
  mc.validate();
  return mc;
}

struct RunResult {
  std::string output_dir;
  Metrics final_val;
  std::vector<std::string> artifacts;
};

template <typename S = float>
RunResult run_train(const KeyValueConfig& kv) {
  namespace fs = std::filesystem;
  const std::uint64_t seed = kv.get_u64_or("experiment.seed", 0);
  const std::string out_dir = resolve_output_dir(kv.get("experiment.output_dir"));
  fs::create_directories(out_dir);
  const Dataset train = load_dataset(kv.get("data.train"));
  const Dataset val = load_dataset(kv.get("data.val"));
  const ModelConfig mc = model_config_from(kv, train, seed);
  const TrainConfig tc = train_config_from(kv, seed);
  Model<S> model = build_model<S>(mc, seed);
  const History history = fit(model, train, val, tc);
  const Metrics metrics = evaluate(model, val);

  RunResult result;
  result.output_dir = out_dir;
  result.final_val = metrics;
  const std::string ckpt = (fs::path(out_dir) / "model.ckpt").string();
  const std::string hist = (fs::path(out_dir) / "history.csv").string();
  const std::string conf = (fs::path(out_dir) / "confusion.csv").string();
  save_checkpoint(model, ckpt);
  write_history_csv(history, hist);
  write_confusion_csv(metrics, val.class_names, conf);
  result.artifacts = {ckpt, hist, conf};
  write_manifest(out_dir, "train", seed, kv, result.artifacts);
  return result;
}

template <typename S = float>
RunResult run_finetune(const KeyValueConfig& kv) {
  namespace fs = std::filesystem;
  const std::uint64_t seed = kv.get_u64_or("experiment.seed", 0);
  const std::string out_dir = resolve_output_dir(kv.get("experiment.output_dir"));
  fs::create_directories(out_dir);
  const Dataset train = load_dataset(kv.get("data.train"));
  const Dataset val = load_dataset(kv.get("data.val"));
  if (train.samples.empty()) throw DataError("training dataset is empty");

  const Checkpoint ckpt = load_checkpoint(kv.get("transfer.checkpoint"));
  TransferPlan plan;
  plan.mode = transfer_mode_from_string(kv.get_or("transfer.mode", "frozen_top_n"));
  plan.n = kv.get_int_or("transfer.n", 1);
  if (kv.has("transfer.head_layers")) plan.head.layer_sizes = kv.get_ints("transfer.head_layers");
  plan.head.dropout_rate = kv.get_double_or("transfer.head_dropout", 0.0);
  plan.head.seed = seed;
  plan.validate();

  Model<S> model = load_pretrained<S>(ckpt, train.num_classes(), plan.head,
                                      build_topology(train.topology_kind).num_joints());
  apply_plan(model, plan);
  const TrainConfig tc = train_config_from(kv, seed);
  const History history = fit(model, train, val, tc);
  const Metrics metrics = evaluate(model, val);

  RunResult result;
  result.output_dir = out_dir;
  result.final_val = metrics;
  const std::string out_ckpt = (fs::path(out_dir) / "model.ckpt").string();
  const std::string hist = (fs::path(out_dir) / "history.csv").string();
  const std::string conf = (fs::path(out_dir) / "confusion.csv").string();
  save_checkpoint(model, out_ckpt);
  write_history_csv(history, hist);
  write_confusion_csv(metrics, val.class_names, conf);
  result.artifacts = {out_ckpt, hist, conf};
  write_manifest(out_dir, "finetune", seed, kv, result.artifacts);
  return result;
}

template <typename S = float>
RunResult run_extract(const KeyValueConfig& kv) {
  namespace fs = std::filesystem;
  const std::uint64_t seed = kv.get_u64_or("experiment.seed", 0);
  const std::string out_dir = resolve_output_dir(kv.get("experiment.output_dir"));
  fs::create_directories(out_dir);
  const Dataset train = load_dataset(kv.get("data.train"));
  const Dataset val = load_dataset(kv.get("data.val"));
  const Checkpoint ckpt = load_checkpoint(kv.get("features.checkpoint"));
  Model<S> model = model_from_checkpoint<S>(ckpt);

  const PoolingKind pooling = pooling_from_string(kv.get_or("features.pooling", "gap"));
  std::vector<int> layers = kv.has("features.layers") ? kv.get_ints("features.layers")
                                                      : std::vector<int>{10};
  auto extract_set = [&](const Dataset& d) {
    if (layers.size() == 1) return extract(model, d, layers[0], pooling);
    std::vector<FeatureSet> sets;
    for (int layer : layers) sets.push_back(extract(model, d, layer, pooling));
    return fuse(sets);
  };
  FeatureSet train_features = extract_set(train);
  FeatureSet val_features = extract_set(val);
  if (kv.has("features.reduction")) {
    const std::string method = kv.get("features.reduction");
    const ReductionKind rk = method == "pca" ? ReductionKind::pca : ReductionKind::truncated_svd;
    const int dims = kv.get_int("features.dims");
    train_features = reduce(train_features, rk, dims);
    val_features = reduce(val_features, rk, dims);
  }

  ClassifierSpec spec;
  spec.kind = classifier_kind_from_string(kv.get_or("features.classifier", "logreg_multinomial"));
  spec.reg_constant = kv.get_double_or("features.reg_constant", 1.0);
  if (kv.has("features.ffnn_layers")) spec.ffnn_layers = kv.get_ints("features.ffnn_layers");
  spec.seed = seed;
  auto [classifier, metrics] = train_classifier(train_features, val_features, spec);

  RunResult result;
  result.output_dir = out_dir;
  result.final_val = metrics;
  const std::string train_feat = (fs::path(out_dir) / "train.feat").string();
  const std::string val_feat = (fs::path(out_dir) / "val.feat").string();
  const std::string conf = (fs::path(out_dir) / "confusion.csv").string();
  save_feature_set(train_features, train_feat);
  save_feature_set(val_features, val_feat);
  write_confusion_csv(metrics, val.class_names, conf);
  result.artifacts = {train_feat, val_feat, conf};
  if (kv.get_or("features.export_csv", "") == "true") {
    const std::string csv = (fs::path(out_dir) / "features.csv").string();
    std::ofstream os(csv);
    export_features_csv(val_features, os);
    result.artifacts.push_back(csv);
  }
  write_manifest(out_dir, "extract", seed, kv, result.artifacts);
  return result;
}

template <typename S = float>
RunResult run_curriculum(const KeyValueConfig& kv) {
  namespace fs = std::filesystem;
  const std::uint64_t seed = kv.get_u64_or("experiment.seed", 0);
  const std::string out_dir = resolve_output_dir(kv.get("experiment.output_dir"));
  fs::create_directories(out_dir);
  const Dataset train = load_dataset(kv.get("data.train"));
  const Dataset val = load_dataset(kv.get("data.val"));
  const ModelConfig mc = model_config_from(kv, train, seed);
  TrainConfig tc = train_config_from(kv, seed);
  const double lr_scale = kv.get_double_or("curriculum.lr_scale", 1.0);
  if (lr_scale != 1.0)
    for (double& v : tc.lr_values) v *= lr_scale;

  Curriculum curriculum;
  curriculum.scores = score_samples<S>(mc, train, tc);
  curriculum.order = order_by_easiness(curriculum.scores);
  curriculum.pacing = make_pacing(int(train.size()), kv.get_int_or("curriculum.steps", 4),
                                  tc.epochs, kv.get_double_or("curriculum.ratio", 1.5));
  Model<S> model = build_model<S>(mc, seed);
  const History history = curriculum_fit(model, train, val, curriculum, tc);
  const Metrics metrics = evaluate(model, val);

  RunResult result;
  result.output_dir = out_dir;
  result.final_val = metrics;
  const std::string ckpt = (fs::path(out_dir) / "model.ckpt").string();
  const std::string hist = (fs::path(out_dir) / "history.csv").string();
  const std::string conf = (fs::path(out_dir) / "confusion.csv").string();
  const std::string scores = (fs::path(out_dir) / "scores.csv").string();
  const std::string pacing = (fs::path(out_dir) / "pacing.json").string();
  save_checkpoint(model, ckpt);
  write_history_csv(history, hist);
  write_confusion_csv(metrics, val.class_names, conf);
  write_scores_csv(curriculum.scores, scores);
  write_pacing_json(curriculum.pacing, pacing);
  result.artifacts = {ckpt, hist, conf, scores, pacing};
  write_manifest(out_dir, "curriculum", seed, kv, result.artifacts);
  return result;
}

// ---------------------------------------------------------------------------
// Report rendering: rows are metric names, columns are runs, best cell per
// row flagged with '*'.

struct HistorySummary {
  std::string name;
  double final_train_loss = 0.0;
  double final_train_acc = 0.0;
  double final_val_acc = 0.0;
  double best_val_acc = 0.0;
};

inline HistorySummary summarize_history_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open metrics file: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "epoch,lr,train_loss,train_acc,val_acc")
    throw DataError(path + ": not a history CSV (bad header)");
  HistorySummary s;
  s.name = std::filesystem::path(path).parent_path().filename().string();
  if (s.name.empty()) s.name = std::filesystem::path(path).stem().string();
  bool any = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    double epoch, lr, tl, ta, va;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &epoch, &lr, &tl, &ta, &va) != 5)
      throw DataError(path + ": malformed history row");
    s.final_train_loss = tl;
    s.final_train_acc = ta;
    s.final_val_acc = va;
    s.best_val_acc = std::max(s.best_val_acc, va);
    any = true;
  }
  if (!any) throw DataError(path + ": history has no rows");
  return s;
}

struct ConfusionSummary {
  std::vector<std::string> class_names;
  std::vector<std::vector<long long>> counts;
  std::vector<double> per_class_accuracy;
  long long total = 0;
};

inline ConfusionSummary summarize_confusion_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open confusion file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw DataError(path + ": empty confusion CSV");
  ConfusionSummary s;
  {
    std::stringstream ss(line);
    std::string cell;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (!first) s.class_names.push_back(cell);
      first = false;
    }
  }
  const std::size_t k = s.class_names.size();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // row label
    std::vector<long long> row;
    while (std::getline(ss, cell, ',')) {
      long long v = 0;
      try {
        v = std::stoll(cell);
      } catch (const std::exception&) {
        throw DataError(path + ": non-integer confusion count '" + cell + "'");
      }
      if (v < 0) throw DataError(path + ": negative confusion count");
      row.push_back(v);
    }
    if (row.size() != k) throw DataError(path + ": confusion row width mismatch");
    s.counts.push_back(std::move(row));
  }
  if (s.counts.size() != k) throw DataError(path + ": confusion matrix is not square");
  for (std::size_t i = 0; i < k; ++i) {
    long long row_sum = 0;
    for (long long v : s.counts[i]) row_sum += v;
    s.total += row_sum;
    s.per_class_accuracy.push_back(row_sum > 0 ? double(s.counts[i][i]) / double(row_sum) : 0.0);
  }
  return s;
}

inline std::string render_report(const std::vector<HistorySummary>& runs,
                                 const ConfusionSummary* confusion = nullptr) {
  if (runs.empty()) throw ConfigError("report: needs at least one metrics file");
  std::ostringstream os;
  const struct {
    const char* label;
    double HistorySummary::*field;
    bool higher_is_better;
  } rows[] = {{"final_train_loss", &HistorySummary::final_train_loss, false},
              {"final_train_acc", &HistorySummary::final_train_acc, true},
              {"final_val_acc", &HistorySummary::final_val_acc, true},
              {"best_val_acc", &HistorySummary::best_val_acc, true}};
  std::size_t name_width = 16;
  for (const auto& r : runs) name_width = std::max(name_width, r.name.size() + 2);
  os << std::string(18, ' ');
  for (const auto& r : runs) {
    os << r.name;
    os << std::string(name_width - r.name.size(), ' ');
  }
  os << '\n';
  for (const auto& row : rows) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < runs.size(); ++i) {
      const double a = runs[i].*(row.field), b = runs[best].*(row.field);
      if (row.higher_is_better ? a > b : a < b) best = i;
    }
    char label[32];
    std::snprintf(label, sizeof(label), "%-18s", row.label);
    os << label;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      char cell[48];
      std::snprintf(cell, sizeof(cell), "%.4f%s", runs[i].*(row.field),
                    (i == best && runs.size() > 1) ? "*" : "");
      os << cell << std::string(name_width - std::strlen(cell), ' ');
    }
    os << '\n';
  }
  if (confusion) {
    os << "\nper-class accuracy (" << confusion->total << " samples)\n";
    for (std::size_t i = 0; i < confusion->class_names.size(); ++i) {
      char line[160];
      std::snprintf(line, sizeof(line), "  %-24s %.4f\n", confusion->class_names[i].c_str(),
                    confusion->per_class_accuracy[i]);
      os << line;
    }
  }
  return os.str();
}

inline void write_report_csv(const std::vector<HistorySummary>& runs, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "run,final_train_loss,final_train_acc,final_val_acc,best_val_acc\n";
  char buf[256];
  for (const auto& r : runs) {
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%.10g,%.10g\n", r.name.c_str(),
                  r.final_train_loss, r.final_train_acc, r.final_val_acc, r.best_val_acc);
    os << buf;
  }
}

}  // namespace experiment
}  // namespace stgcn
