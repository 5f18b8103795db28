#include "dapotion/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "dapotion/fusion.hpp"
#include "dapotion/trainer.hpp"

namespace dapotion::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Flags {
  double sigma = -1;
  int grid = 32;
  std::string scheme = "nui";
  std::vector<std::string> classes;
  std::string mirror_pairs;
  bool no_augment = false;
  double flip_prob = 0.5;
  double max_translation = -1;
  std::string part = "auto";
  std::vector<std::string> score_files;
};

std::vector<std::pair<int, int>> parse_pairs(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  if (text.empty()) return out;
  for (const std::string& item : split(text, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw CliError(2, "--mirror-pairs expects a list like 0:1,2:3");
    try {
      out.emplace_back(std::stoi(parts[0]), std::stoi(parts[1]));
    } catch (const std::exception&) {
      throw CliError(2, "--mirror-pairs expects integer joint indices");
    }
  }
  return out;
}

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--seed", cfg.seed, "Seed for every random draw")->capture_default_str();
  sub->add_option("--workers", cfg.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

void add_encoder(CLI::App* sub, RunConfig& cfg, Flags& f) {
  sub->add_option("--sigma", f.sigma, "Gaussian standard deviation in voxels (default 4 * grid / 64)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--channels", cfg.encoder.channels, "Temporal color channels C")
      ->check(CLI::Range(2, 255))
      ->capture_default_str();
  sub->add_option("--scheme", f.scheme, "Aggregation scheme")
      ->transform(CLI::IsMember({"u", "i", "n", "nui"}, CLI::ignore_case))
      ->capture_default_str();
  sub->add_option("--grid", f.grid, "Voxels per axis")->check(CLI::Range(4, 1024))->capture_default_str();
  sub->add_option("--truncation", cfg.encoder.truncation_radius, "Gaussian truncation radius in sigmas")
      ->check(CLI::Range(1.0, 100.0))
      ->capture_default_str();
  sub->add_flag("--collapse-depth", cfg.encoder.collapse_depth, "Sum out the depth axis (2D ablation)");
}

void add_training(CLI::App* sub, RunConfig& cfg, Flags& f) {
  auto& c = cfg.classifier;
  sub->add_option("--epochs", c.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--lr", c.lr_init, "Initial learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--lr-decay", c.lr_decay, "Per-epoch learning-rate factor")
      ->check(CLI::Range(1e-9, 1.0))
      ->capture_default_str();
  sub->add_option("--batch", c.batch_size, "Mini-batch size")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--filters", c.filters, "Filters per block")->delimiter(',')->capture_default_str();
  sub->add_option("--dropout", c.dropout_p)->check(CLI::Range(0.0, 0.999))->capture_default_str();
  sub->add_flag("--no-augment", f.no_augment, "Disable augmentation");
  sub->add_option("--max-rotation", cfg.augment.max_rotation_deg, "Degrees per axis")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--max-translation", f.max_translation, "Voxels per axis (default 4 * grid / 64)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--flip-prob", f.flip_prob, "Flip probability for the y and z axes")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sub->add_option("--mirror-pairs", f.mirror_pairs, "Joint pairs swapped on a y flip, e.g. 0:1,2:3");
}

std::string usage_error(const CLI::App& app, const CLI::Error& e) {
  std::ostringstream out, err;
  app.exit(e, out, err);
  return out.str() + err.str();
}

}  // namespace

RunConfig parse_args(int argc, const char* const* argv) {
  RunConfig cfg;
  Flags f;
  CLI::App app{"Depth-aware pose motion descriptors and 3D-CNN action classification", "dapotion"};
  app.require_subcommand(1);

  auto* synth_cmd = app.add_subcommand("synth-gen", "Generate a labeled synthetic pose dataset");
  add_common(synth_cmd, cfg);
  synth_cmd->add_option("--out", cfg.out, "Output directory")->required();
  synth_cmd->add_option("--classes", f.classes, "Class ids")->delimiter(',');
  synth_cmd->add_option("--n-per-class", cfg.n_per_class)->check(CLI::Range(2, 1000000))->capture_default_str();
  synth_cmd->add_option("--split", cfg.split, "Train fraction")->check(CLI::Range(1e-9, 1.0 - 1e-9))->capture_default_str();
  synth_cmd->add_option("--frames", cfg.synth.num_frames)->check(CLI::Range(2, 1000000))->capture_default_str();
  synth_cmd->add_option("--joints", cfg.synth.num_joints)->check(CLI::Range(1, 65535))->capture_default_str();
  synth_cmd->add_option("--amplitude", cfg.synth.amplitude)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--noise", cfg.synth.noise_std)->check(CLI::NonNegativeNumber)->capture_default_str();

  auto* encode_cmd = app.add_subcommand("encode", "Encode pose files into descriptors");
  add_common(encode_cmd, cfg);
  add_encoder(encode_cmd, cfg, f);
  encode_cmd->add_option("--manifest", cfg.manifest, "Pose manifest")->required();
  encode_cmd->add_option("--out", cfg.out, "Output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the classifier on encoded descriptors");
  add_common(train_cmd, cfg);
  add_training(train_cmd, cfg, f);
  train_cmd->add_option("--manifest", cfg.manifest, "Training descriptor manifest")->required();
  train_cmd->add_option("--val-manifest", cfg.val_manifest, "Validation descriptor manifest");
  train_cmd->add_option("--out", cfg.out, "Checkpoint path")->required();
  train_cmd->add_option("--history", cfg.history, "Per-epoch CSV (default <out>.history.csv)");

  auto* predict_cmd = app.add_subcommand("predict", "Write per-class scores for descriptors");
  add_common(predict_cmd, cfg);
  predict_cmd->add_option("--model", cfg.model, "Checkpoint")->required();
  predict_cmd->add_option("--manifest", cfg.manifest, "Descriptor manifest")->required();
  predict_cmd->add_option("--out", cfg.out, "Score file")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Accuracy and confusion matrix against labels");
  add_common(eval_cmd, cfg);
  eval_cmd->add_option("--manifest", cfg.manifest, "Labeled descriptor manifest")->required();
  auto* model_opt = eval_cmd->add_option("--model", cfg.model, "Checkpoint to score the manifest with");
  auto* scores_opt = eval_cmd->add_option("--scores", f.score_files, "Score file to evaluate");
  model_opt->excludes(scores_opt);
  eval_cmd->add_option("--out", cfg.out, "Optional JSON report");

  auto* fuse_cmd = app.add_subcommand("fuse", "Average score files");
  add_common(fuse_cmd, cfg);
  fuse_cmd->add_option("--scores", f.score_files, "Score files")->delimiter(',')->required();
  fuse_cmd->add_option("--weights", cfg.weights, "Nonnegative weights, one per score file")->delimiter(',');
  fuse_cmd->add_option("--out", cfg.out, "Fused score file")->required();

  auto* render_cmd = app.add_subcommand("render-slices", "Render depth slices of a descriptor");
  add_common(render_cmd, cfg);
  render_cmd->add_option("--input", cfg.input, "Descriptor file")->required();
  render_cmd->add_option("--out", cfg.out, "Output directory")->required();
  render_cmd->add_option("--depth-indices", cfg.depth_indices, "Slices to render (default: middle)")->delimiter(',');
  render_cmd->add_option("--joint", cfg.slice.joint)->check(CLI::NonNegativeNumber)->capture_default_str();
  render_cmd->add_option("--part", f.part, "Channel block")
      ->transform(CLI::IsMember({"auto", "n", "u", "i"}, CLI::ignore_case))
      ->capture_default_str();
  render_cmd->add_option("--channel", cfg.slice.channel, "Absolute channel index (overrides --joint/--part)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = e.get_exit_code() == 0 ? 0 : 2;
    std::string text = usage_error(app, e);
    if (code != 0 && text.find("Usage") == std::string::npos) text += app.help();
    throw CliError(code, text);
  }

  cfg.subcommand = app.get_subcommands().front()->get_name();

  cfg.encoder.grid = {f.grid, f.grid, f.grid};
  cfg.encoder.sigma = f.sigma > 0 ? f.sigma : EncoderConfig::default_sigma(f.grid);
  cfg.encoder.scheme = parse_scheme(f.scheme);

  cfg.classifier.seed = cfg.seed;
  cfg.classifier.blocks = static_cast<int>(cfg.classifier.filters.size());
  cfg.augment.enabled = !f.no_augment;
  cfg.augment.flip_prob_y = cfg.augment.flip_prob_z = f.flip_prob;
  cfg.augment.max_translation = f.max_translation;
  cfg.mirror_pairs = parse_pairs(f.mirror_pairs);
  cfg.synth.seed = cfg.seed;

  if (f.classes.empty()) {
    cfg.classes = synth::all_classes();
  } else {
    for (const auto& name : f.classes) {
      try {
        cfg.classes.push_back(synth::parse_class(name));
      } catch (const Error& e) {
        throw CliError(2, e.what());
      }
    }
  }
  cfg.score_files.assign(f.score_files.begin(), f.score_files.end());
  if (cfg.subcommand == "eval" && cfg.model.empty() && cfg.score_files.size() != 1)
    throw CliError(2, "eval needs exactly one of --model or --scores\n");
  if (cfg.subcommand == "fuse" && !cfg.weights.empty() && cfg.weights.size() != cfg.score_files.size())
    throw CliError(2, "--weights needs one value per score file\n");

  const std::string part = [&] {
    std::string p = f.part;
    std::transform(p.begin(), p.end(), p.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return p;
  }();
  cfg.slice.part = part == "n" ? SlicePart::kN : part == "u" ? SlicePart::kU : part == "i" ? SlicePart::kI : SlicePart::kAuto;
  if (cfg.classifier.filters.empty()) throw CliError(2, "--filters needs at least one value\n");
  for (int fl : cfg.classifier.filters)
    if (fl < 1) throw CliError(2, "--filters values must be positive\n");
  return cfg;
}

RunConfig parse_args(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"dapotion"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_args(static_cast<int>(argv.size()), argv.data());
}

namespace {

struct Summary {
  std::string command;
  std::size_t records = 0;
  std::optional<double> accuracy;
};

LabeledSet load_labeled(const std::vector<ManifestRecord>& records, const std::vector<std::string>& classes) {
  LabeledSet set;
  for (const auto& r : records) {
    auto it = std::find(classes.begin(), classes.end(), r.label);
    if (it == classes.end()) throw Error("label '" + r.label + "' of " + r.path.string() + " is not a training class");
    set.items.push_back(read_descriptor(r.path));
    set.labels.push_back(static_cast<int>(it - classes.begin()));
  }
  return set;
}

ScoreSet score_manifest(Model& model, const std::vector<ManifestRecord>& records, const std::string& name) {
  std::vector<DAPotion> items;
  for (const auto& r : records) items.push_back(read_descriptor(r.path));
  const auto scores = predict_all(model, items, std::max(1, model.config.batch_size));
  ScoreSet set;
  set.model_name = name;
  set.class_names = model.class_names;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (!set.scores.emplace(clip_id(records[i].path), scores[i]).second)
      throw Error("duplicate clip id '" + clip_id(records[i].path) + "'");
  return set;
}

Summary run_synth(const RunConfig& cfg) {
  std::vector<synth::SynthSpec> templates;
  for (synth::MotionClass c : cfg.classes) {
    synth::SynthSpec s = cfg.synth;
    s.motion = c;
    templates.push_back(s);
  }
  const auto m = synth::generate_dataset(templates, cfg.n_per_class, cfg.split, cfg.seed, cfg.out);
  return {"synth-gen", m.train.size() + m.test.size(), std::nullopt};
}

Summary run_encode(const RunConfig& cfg, std::ostream& err) {
  validate(cfg.encoder);
  const auto records = read_manifest(cfg.manifest);
  std::vector<ManifestRecord> outputs(records.size());
  std::vector<std::string> errors(records.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      try {
        const ManifestRecord& r = records[i];
        if (!fs::exists(r.path)) throw IoError("missing pose file " + r.path.string());
        const PoseSequence poses = load_pose_file(r.path);
        DAPotion d = encode_pose_sequence(poses, cfg.encoder);
        const fs::path dst = cfg.out / (clip_id(r.path) + ".dapt");
        write_descriptor(dst, d);
        std::string label = r.label.empty() && poses.label ? *poses.label : r.label;
        outputs[i] = {dst, label};
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(cfg.workers, static_cast<int>(records.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  for (const auto& e : errors)
    if (!e.empty()) throw Error(e);
  write_manifest(cfg.out / cfg.manifest.filename(), outputs);
  err << "encoded " << outputs.size() << " clips into " << cfg.out.string() << "\n";
  return {"encode", outputs.size(), std::nullopt};
}

Summary run_train(const RunConfig& cfg, std::ostream& err) {
  const auto train_records = read_manifest(cfg.manifest);
  std::set<std::string> names;
  for (const auto& r : train_records) names.insert(r.label);
  const std::vector<std::string> classes(names.begin(), names.end());
  if (classes.size() < 2) throw Error("training manifest needs at least two classes");

  LabeledSet train_set = load_labeled(train_records, classes);
  LabeledSet val_set;
  if (!cfg.val_manifest.empty()) val_set = load_labeled(read_manifest(cfg.val_manifest), classes);

  TrainOptions opts;
  opts.classifier = cfg.classifier;
  opts.augment = cfg.augment;
  const int grid_w = train_set.items.front().dims().w;
  if (cfg.augment.max_translation < 0)
    opts.augment.max_translation = AugmentConfig::for_grid(grid_w).max_translation;
  opts.mirror_pairs = cfg.mirror_pairs;
  opts.on_epoch = [&](const EpochRecord& r) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %d lr %.3g loss %.5f val_acc %.4f\n", r.epoch, r.lr, r.train_loss,
                  r.val_accuracy);
    err << line << std::flush;
  };
  TrainResult result = train(train_set, val_set, classes, opts);
  write_checkpoint(cfg.out, result.model);
  fs::path history = cfg.history;
  if (history.empty()) {
    history = cfg.out;
    history += ".history.csv";
  }
  write_file_atomic(history, format_history_csv(result.history));
  std::optional<double> acc;
  if (!val_set.items.empty()) acc = result.history.back().val_accuracy;
  return {"train", train_set.size(), acc};
}

Summary run_predict(const RunConfig& cfg) {
  Model model = read_checkpoint(cfg.model);
  const auto records = read_manifest(cfg.manifest);
  const ScoreSet set = score_manifest(model, records, clip_id(cfg.model));
  write_score_file(cfg.out, set);
  return {"predict", set.scores.size(), std::nullopt};
}

Summary run_eval(const RunConfig& cfg, std::ostream& err) {
  const auto records = read_manifest(cfg.manifest);
  ScoreSet scores;
  if (!cfg.model.empty()) {
    Model model = read_checkpoint(cfg.model);
    scores = score_manifest(model, records, clip_id(cfg.model));
  } else {
    scores = read_score_file(cfg.score_files.front());
  }
  const Evaluation ev = evaluate(scores, labels_from_manifest(records));

  err << "confusion (rows = true class, columns = predicted, row-normalized)\n";
  for (std::size_t r = 0; r < ev.confusion.size(); ++r) {
    err << scores.class_names[r];
    for (double v : ev.confusion[r]) {
      char buf[16];
      std::snprintf(buf, sizeof buf, " %.3f", v);
      err << buf;
    }
    err << "\n";
  }
  if (!cfg.out.empty()) {
    json report;
    report["accuracy"] = ev.accuracy;
    report["total"] = ev.total;
    report["classes"] = scores.class_names;
    report["confusion"] = ev.confusion;
    report["counts"] = ev.counts;
    write_file_atomic(cfg.out, report.dump(2) + "\n");
  }
  return {"eval", ev.total, ev.accuracy};
}

Summary run_fuse(const RunConfig& cfg) {
  std::vector<ScoreSet> sets;
  for (const auto& p : cfg.score_files) sets.push_back(read_score_file(p));
  const ScoreSet fused = fuse_scores(sets, cfg.weights);
  write_score_file(cfg.out, fused);
  return {"fuse", fused.scores.size(), std::nullopt};
}

Summary run_render(const RunConfig& cfg) {
  const DAPotion d = read_descriptor(cfg.input);
  std::vector<int> depths = cfg.depth_indices;
  if (depths.empty()) depths.push_back(d.dims().d / 2);
  const std::string stem = clip_id(cfg.input);
  for (int z : depths) {
    const std::string img = render_slice(d, z, cfg.slice);
    const bool color = img.compare(0, 2, "P6") == 0;
    char name[64];
    std::snprintf(name, sizeof name, "_z%03d.%s", z, color ? "ppm" : "pgm");
    write_file_atomic(cfg.out / (stem + name), img);
  }
  return {"render-slices", depths.size(), std::nullopt};
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  try {
    Summary s;
    if (cfg.subcommand == "synth-gen") s = run_synth(cfg);
    else if (cfg.subcommand == "encode") s = run_encode(cfg, err);
    else if (cfg.subcommand == "train") s = run_train(cfg, err);
    else if (cfg.subcommand == "predict") s = run_predict(cfg);
    else if (cfg.subcommand == "eval") s = run_eval(cfg, err);
    else if (cfg.subcommand == "fuse") s = run_fuse(cfg);
    else if (cfg.subcommand == "render-slices") s = run_render(cfg);
    else throw Error("unknown subcommand '" + cfg.subcommand + "'");

    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json summary;
    summary["command"] = s.command;
    summary["records"] = s.records;
    summary["accuracy"] = s.accuracy ? json(*s.accuracy) : json(nullptr);
    summary["elapsed_s"] = elapsed;
    out << summary.dump() << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace dapotion::cli
