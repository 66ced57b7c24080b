// Command-line entry point: dataset import, preprocessing, training,
// transfer, feature extraction, curriculum experiments and report emission.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 numerical failure, 1 unexpected error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "stgcn/experiment.hpp"
#include "stgcn/stgcn.hpp"

namespace fs = std::filesystem;
using namespace stgcn;

namespace {

struct SynthArgs {
  std::string family = "A";
  int samples_per_class = 10;
  int frames = 48;
  double noise = 0.01;
  double frame_rate = 30.0;
  int subjects = 8;
  std::uint64_t seed = 0;
  std::string out;
  std::string dump_csv;
};

int cmd_synth(const SynthArgs& args) {
  if (args.family != "A" && args.family != "B")
    throw ConfigError("--family must be A or B");
  GeneratorSpec spec = make_generator_spec(
      args.family == "A" ? GeneratorFamily::A : GeneratorFamily::B, args.seed);
  spec.samples_per_class = args.samples_per_class;
  spec.frames = args.frames;
  spec.noise_std = args.noise;
  spec.frame_rate = args.frame_rate;
  spec.num_subjects = args.subjects;
  const Dataset d = generate(spec);
  save_dataset(d, args.out);
  std::printf("synth: wrote %zu samples (%d classes, T=%d) to %s\n", d.size(),
              d.num_classes(), args.frames, args.out.c_str());
  if (!args.dump_csv.empty()) {
    fs::create_directories(args.dump_csv);
    std::ofstream labels(fs::path(args.dump_csv) / "labels.csv");
    labels << "sample_id,label,subject_id\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "sample%04zu", i);
      std::ofstream os(fs::path(args.dump_csv) / (std::string(name) + ".csv"));
      export_csv_sequence(d.samples[i], os);
      labels << name << ',' << d.samples[i].label << ',' << d.samples[i].subject_id << '\n';
    }
    std::printf("synth: dumped per-sample CSV to %s\n", args.dump_csv.c_str());
  }
  return 0;
}

struct ImportArgs {
  std::string format;
  std::string in;
  std::string labels;
  std::string out;
};

int cmd_import(const ImportArgs& args) {
  Dataset d;
  ImportSummary summary;
  if (args.format == "ntu_skeleton") {
    d = import_ntu_directory(args.in, &summary);
  } else if (args.format == "csv") {
    if (args.labels.empty()) throw ConfigError("csv import requires --labels");
    d = import_csv_directory(args.in, args.labels, &summary);
  } else {
    throw ConfigError("--format must be ntu_skeleton or csv");
  }
  // containers hold one [T, V] shape; align frame counts up front
  int max_frames = 1;
  for (const auto& s : d.samples) max_frames = std::max(max_frames, s.frames);
  for (auto& s : d.samples) s = pad_to_frames(s, max_frames);
  save_dataset(d, args.out);
  std::printf("import: %d samples, %d classes, %d files dropped -> %s\n", summary.samples,
              d.num_classes(), summary.dropped_files, args.out.c_str());
  for (const auto& msg : summary.messages) std::printf("import:   %s\n", msg.c_str());
  return 0;
}

struct PreprocessArgs {
  std::string in;
  std::string out;
  std::string out_train, out_val;
  int target_frames = 300;
  bool remap_shared = false;
  int fra = 0;
  int smooth = 0;
  std::string split_method;
  double train_fraction = 0.7;
  std::vector<int> train_subjects;
  std::uint64_t seed = 0;
};

int cmd_preprocess(const PreprocessArgs& args) {
  Dataset d = load_dataset(args.in);
  std::printf("preprocess: loaded %zu samples from %s\n", d.size(), args.in.c_str());

  CleanReport report;
  d = clean(d, &report);
  std::printf("preprocess: clean removed %d (empty %d, pseudo %d, non-finite %d)\n",
              report.total(), report.empty_removed, report.pseudo_removed,
              report.nonfinite_removed);
  std::printf("preprocess: actor-select done at import (container is single-body)\n");

  if (args.remap_shared) {
    if (d.topology_kind != TopologyKind::kinect_v2)
      throw DataError("--remap-shared requires a kinect_v2 container");
    for (auto& s : d.samples) s = remap_to_shared(s);
    d.topology_kind = TopologyKind::shared20;
    std::printf("preprocess: remapped to the shared 20-joint skeleton\n");
  }
  const SkeletonTopology topology = build_topology(d.topology_kind);

  for (auto& s : d.samples) s = pad_to_frames(s, args.target_frames);
  std::printf("preprocess: frame count fixed to %d\n", args.target_frames);
  for (auto& s : d.samples) s = translate_to_spine(s, topology);
  std::printf("preprocess: translated spine joint to the origin\n");
  for (auto& s : d.samples) s = rotate_align(s, topology);
  std::printf("preprocess: rotated to +x facing, spine parallel to z\n");
  if (args.fra > 1) {
    for (auto& s : d.samples) s = frame_rate_adjust(s, args.fra);
    d.frame_rate /= args.fra;
    std::printf("preprocess: kept every %dth frame (frame rate now %.3g)\n", args.fra,
                d.frame_rate);
  }
  if (args.smooth > 1) {
    for (auto& s : d.samples) s = moving_average(s, args.smooth);
    std::printf("preprocess: moving average, window %d\n", args.smooth);
  }

  if (args.split_method.empty()) {
    if (args.out.empty()) throw ConfigError("--out is required when no split is requested");
    save_dataset(d, args.out);
    std::printf("preprocess: wrote %zu samples to %s\n", d.size(), args.out.c_str());
    return 0;
  }
  if (args.out_train.empty() || args.out_val.empty())
    throw ConfigError("--split requires --out-train and --out-val");
  SplitSpec spec;
  spec.seed = args.seed;
  spec.train_fraction = args.train_fraction;
  if (args.split_method == "cross_subject") {
    spec.method = SplitMethod::cross_subject;
    spec.train_subjects.insert(args.train_subjects.begin(), args.train_subjects.end());
  } else if (args.split_method == "random_ratio") {
    spec.method = SplitMethod::random_ratio;
  } else {
    throw ConfigError("--split must be cross_subject or random_ratio");
  }
  auto [train, val] = split(d, spec);
  save_dataset(train, args.out_train);
  save_dataset(val, args.out_val);
  std::printf("preprocess: split %zu train / %zu val -> %s, %s\n", train.size(), val.size(),
              args.out_train.c_str(), args.out_val.c_str());
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint;
  std::string data;
  std::string out_dir;
};

int cmd_evaluate(const EvaluateArgs& args) {
  const Dataset data = load_dataset(args.data);
  Model<float> model = model_from_checkpoint<float>(load_checkpoint(args.checkpoint));
  const Metrics metrics = evaluate(model, data);
  std::printf("evaluate: top-1 accuracy %.4f over %zu samples (loss %.4f)\n",
              metrics.top1_accuracy, data.size(), metrics.loss);
  if (!args.out_dir.empty()) {
    const std::string out_dir = experiment::resolve_output_dir(args.out_dir);
    fs::create_directories(out_dir);
    write_confusion_csv(metrics, data.class_names, (fs::path(out_dir) / "confusion.csv").string());
    std::printf("evaluate: wrote confusion matrix to %s/confusion.csv\n", out_dir.c_str());
  }
  return 0;
}

struct ReportArgs {
  std::vector<std::string> metrics;
  std::string confusion;
  std::string out_csv;
};

int cmd_report(const ReportArgs& args) {
  std::vector<experiment::HistorySummary> runs;
  for (const auto& path : args.metrics) runs.push_back(experiment::summarize_history_csv(path));
  experiment::ConfusionSummary confusion;
  const bool has_confusion = !args.confusion.empty();
  if (has_confusion) confusion = experiment::summarize_confusion_csv(args.confusion);
  std::fputs(experiment::render_report(runs, has_confusion ? &confusion : nullptr).c_str(),
             stdout);
  if (!args.out_csv.empty()) experiment::write_report_csv(runs, args.out_csv);
  return 0;
}

int run_config_command(const std::string& kind, const std::string& config_path) {
  const KeyValueConfig kv = KeyValueConfig::parse_file(config_path);
  experiment::RunResult result;
  if (kind == "train")
    result = experiment::run_train(kv);
  else if (kind == "finetune")
    result = experiment::run_finetune(kv);
  else if (kind == "extract")
    result = experiment::run_extract(kv);
  else
    result = experiment::run_curriculum(kv);
  std::printf("%s: val top-1 %.4f, artifacts in %s\n", kind.c_str(),
              result.final_val.top1_accuracy, result.output_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skeleton action recognition: ST-GCN training, transfer and curriculum tools"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic skeleton dataset");
  synth_cmd->add_option("--family", synth_args.family, "Generator family: A (5 classes) or B (3)");
  synth_cmd->add_option("--samples-per-class", synth_args.samples_per_class);
  synth_cmd->add_option("--frames", synth_args.frames);
  synth_cmd->add_option("--noise", synth_args.noise, "Gaussian joint noise (meters)");
  synth_cmd->add_option("--frame-rate", synth_args.frame_rate);
  synth_cmd->add_option("--subjects", synth_args.subjects);
  synth_cmd->add_option("--seed", synth_args.seed);
  synth_cmd->add_option("--out", synth_args.out)->required();
  synth_cmd->add_option("--dump-csv", synth_args.dump_csv, "Also dump per-sample CSV files");

  ImportArgs import_args;
  auto* import_cmd = app.add_subcommand("import", "Import skeleton files into a container");
  import_cmd->add_option("--format", import_args.format, "ntu_skeleton or csv")->required();
  import_cmd->add_option("--in", import_args.in, "Input directory")->required();
  import_cmd->add_option("--labels", import_args.labels, "Labels CSV (csv format only)");
  import_cmd->add_option("--out", import_args.out)->required();

  PreprocessArgs pre_args;
  auto* pre_cmd = app.add_subcommand("preprocess", "Run the preprocessing chain");
  pre_cmd->add_option("--in", pre_args.in)->required();
  pre_cmd->add_option("--out", pre_args.out, "Output container (no split)");
  pre_cmd->add_option("--out-train", pre_args.out_train);
  pre_cmd->add_option("--out-val", pre_args.out_val);
  pre_cmd->add_option("--target-frames", pre_args.target_frames);
  pre_cmd->add_flag("--remap-shared", pre_args.remap_shared, "Drop the 5 kinect_v2-only joints");
  pre_cmd->add_option("--fra", pre_args.fra, "Keep every Nth frame");
  pre_cmd->add_option("--smooth", pre_args.smooth, "Moving-average window (odd)");
  pre_cmd->add_option("--split", pre_args.split_method, "cross_subject or random_ratio");
  pre_cmd->add_option("--train-fraction", pre_args.train_fraction);
  pre_cmd->add_option("--train-subjects", pre_args.train_subjects)->delimiter(',');
  pre_cmd->add_option("--seed", pre_args.seed);

  std::string config_path;
  auto* train_cmd = app.add_subcommand("train", "Train a model from an experiment config");
  auto* finetune_cmd = app.add_subcommand("finetune", "Fine-tune a pre-trained checkpoint");
  auto* extract_cmd = app.add_subcommand("extract", "Feature extraction + downstream classifier");
  auto* curriculum_cmd = app.add_subcommand("curriculum", "Curriculum-learning training run");
  for (auto* cmd : {train_cmd, finetune_cmd, extract_cmd, curriculum_cmd})
    cmd->add_option("--config", config_path, "Experiment config file")->required();

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval_cmd->add_option("--data", eval_args.data)->required();
  eval_cmd->add_option("--out-dir", eval_args.out_dir);

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Summarize run metrics side by side");
  report_cmd->add_option("--metrics", report_args.metrics, "History CSV files")->required();
  report_cmd->add_option("--confusion", report_args.confusion, "Confusion CSV to append");
  report_cmd->add_option("--out-csv", report_args.out_csv);

  try {
    app.parse(argc, argv);
    if (synth_cmd->parsed()) return cmd_synth(synth_args);
    if (import_cmd->parsed()) return cmd_import(import_args);
    if (pre_cmd->parsed()) return cmd_preprocess(pre_args);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args);
    if (report_cmd->parsed()) return cmd_report(report_args);
    for (auto* cmd : {train_cmd, finetune_cmd, extract_cmd, curriculum_cmd})
      if (cmd->parsed()) return run_config_command(cmd->get_name(), config_path);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
