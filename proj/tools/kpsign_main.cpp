// kpsign command-line entry point.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kpsign/kpsign.hpp"

namespace fs = std::filesystem;
using namespace kpsign;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Paths {
  fs::path data_dir;
  fs::path manifest;
};

fs::path manifest_or_default(const Paths& p) {
  return p.manifest.empty() ? p.data_dir / "manifest.tsv" : p.manifest;
}

std::vector<Window> windows_for_split(const fs::path& root, const std::vector<ManifestEntry>& all,
                                      Split split, const Vocabulary& vocab,
                                      std::size_t window_len) {
  std::vector<ManifestEntry> chosen;
  for (const auto& e : all) {
    if (e.split == split) chosen.push_back(e);
  }
  std::size_t nans = 0;
  auto windows = load_windows(root, chosen, vocab, window_len, &nans);
  if (nans > 0) {
    std::cerr << "note: " << nans << " missing-detection coordinates replaced by 0\n";
  }
  return windows;
}

// Infers the standard layout from a keypoint count.
KeypointLayout layout_for_keypoints(std::size_t k, std::optional<std::size_t> face_count) {
  const std::size_t body = kPoseKeypoints + 2 * kHandKeypoints;
  const std::size_t face = face_count.value_or(k >= body ? k - body : 0);
  if (body + face != k) {
    throw FormatError(FormatError::Code::kInvalid,
                      "keypoint count " + std::to_string(k) + " does not match a standard layout");
  }
  return synth::layout_for_face_count(face);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(FormatError::Code::kInvalid, "cannot write " + path.string());
  out << text;
}

// ------------------------------------------------------------------ make-synth

int cmd_make_synth(const fs::path& config_path, const fs::path& out_dir,
                   std::optional<std::uint64_t> seed) {
  auto cfg = config_path.empty() ? synth::SynthConfig{}
                                 : config::synth_config(config::load(config_path));
  if (seed) cfg.seed = *seed;
  const auto ds = synth::generate(cfg);
  synth::write_dataset(ds, out_dir);
  write_text(out_dir / "config.ini", config::synth_section(cfg));
  std::cout << "wrote " << ds.entries.size() << " windows, " << ds.vocab.size() << " classes, K="
            << ds.layout.total() << " to " << out_dir.string() << "\n";
  std::cout << "nearest-template oracle accuracy: " << synth::oracle_classify(ds.windows, ds.templates)
            << "\n";
  return 0;
}

// ------------------------------------------------------------------ split

int cmd_split(const fs::path& in, const fs::path& out, const std::vector<double>& ratios,
              std::uint64_t seed) {
  if (ratios.size() != 3) throw InvalidArgument("--ratios takes three values");
  const auto entries = read_manifest_file(in);
  auto result = split_by_signer(entries, {ratios[0], ratios[1], ratios[2]}, seed);
  // Keep the input order; only the split column changes.
  std::map<std::int64_t, Split> owner;
  for (Split s : kAllSplits) {
    for (const auto& e : result[s]) owner[e.signer_id] = s;
  }
  auto updated = entries;
  for (auto& e : updated) e.split = owner.at(e.signer_id);
  write_manifest_file(out, updated);
  std::cout << "train=" << result.train.size() << " val=" << result.val.size()
            << " test=" << result.test.size() << "\n";
  return 0;
}

// ------------------------------------------------------------------ train

struct TrainFlags {
  fs::path config;
  Paths data;
  fs::path out_dir;
  std::optional<std::size_t> threads, epochs, batch_size;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
};

int cmd_train(const TrainFlags& f) {
  config::ptree tree;
  if (!f.config.empty()) tree = config::load(f.config);
  ModelConfig mc = config::model_config(tree);
  TrainConfig tc = config::train_config(tree);
  if (f.threads) tc.threads = *f.threads;
  if (f.epochs) tc.max_epochs = *f.epochs;
  if (f.batch_size) tc.batch_size = *f.batch_size;
  if (f.lr) tc.adam.learning_rate = *f.lr;
  if (f.seed) tc.seed = *f.seed;
  if (f.mode) mc.attention_mode = parse_attention_mode(*f.mode);

  const auto vocab = Vocabulary::load_file(f.data.data_dir / "vocab.txt");
  const auto entries = read_manifest_file(manifest_or_default(f.data));
  check_labels(entries, vocab);
  auto train = windows_for_split(f.data.data_dir, entries, Split::kTrain, vocab, mc.window_len);
  auto val = windows_for_split(f.data.data_dir, entries, Split::kVal, vocab, mc.window_len);
  if (train.empty() || val.empty()) {
    throw FormatError(FormatError::Code::kInvalid, "manifest needs non-empty train and val splits");
  }
  // The dataset fixes the class count and keypoint count.
  mc.vocab_size = vocab.size();
  mc.keypoints = train.front().keypoints();
  const auto layout = layout_for_keypoints(mc.keypoints, std::nullopt);

  fs::create_directories(f.out_dir);
  write_text(f.out_dir / "config.ini", config::model_section(mc) + config::train_section(tc));
  {
    std::ofstream v(f.out_dir / "vocab.txt", std::ios::trunc);
    vocab.save(v);
  }
  std::ofstream log(f.out_dir / "train.log", std::ios::trunc);
  std::cout << "training " << count_parameters(mc) << " parameters on " << train.size()
            << " windows (val " << val.size() << ")\n";
  auto result = train_loop<float>(mc, tc, train, val, layout.flip_permutation(),
                                  [&](const EpochRecord& r) {
                                    const auto line = format_epoch(r);
                                    std::cout << line << std::endl;
                                    log << line << std::endl;
                                  });
  save_checkpoint(f.out_dir / "model.ckpt", mc, result.best_parameters);
  std::cout << "best epoch " << result.best_epoch << (result.stopped_early ? " (early stop)" : "")
            << ", checkpoint " << (f.out_dir / "model.ckpt").string() << "\n";
  return 0;
}

// ------------------------------------------------------------------ evaluate

int cmd_evaluate(const fs::path& ckpt_path, const Paths& data, const std::string& split_name,
                 const fs::path& out_csv, const fs::path& per_class_csv) {
  const auto ck = load_checkpoint(ckpt_path);
  const auto vocab = Vocabulary::load_file(data.data_dir / "vocab.txt");
  if (vocab.size() != ck.config.vocab_size) {
    throw FormatError(FormatError::Code::kInvalid, "vocabulary size does not match checkpoint");
  }
  const auto entries = read_manifest_file(manifest_or_default(data));
  const Split split = parse_split(split_name);
  const auto windows = windows_for_split(data.data_dir, entries, split, vocab, ck.config.window_len);
  if (windows.empty()) throw FormatError(FormatError::Code::kInvalid, "split is empty");
  const Model<float> model(ck.config, ck.parameters);
  std::vector<Tensor<float>> inputs;
  std::vector<std::size_t> labels;
  for (const auto& w : windows) {
    validate_window(w, ck.config.window_len, ck.config.keypoints);
    inputs.push_back(stack_window<float>(w));
    labels.push_back(w.label_id);
  }
  const auto summary = evaluate_stacked(model, inputs, labels);
  char line[256];
  std::snprintf(line, sizeof line, "%s,%zu,%.6f,%.6f,%.6f\n", split_name.c_str(), windows.size(),
                summary.top1, summary.top5, summary.loss);
  const std::string csv = std::string("split,samples,top1,top5,loss\n") + line;
  std::cout << csv;
  if (!out_csv.empty()) write_text(out_csv, csv);
  if (!per_class_csv.empty()) {
    const auto report = eval::per_class_report(summary.logits, labels);
    std::ostringstream o;
    o << "class,word,support,correct,accuracy,most_confused_with\n";
    for (std::size_t c = 0; c < report.classes.size(); ++c) {
      const auto& s = report.classes[c];
      o << c << ',' << vocab.word(c) << ',' << s.support << ',' << s.correct << ',';
      if (s.accuracy) o << *s.accuracy; else o << "no_support";
      o << ',';
      if (s.most_confused_with) o << vocab.word(*s.most_confused_with);
      o << '\n';
    }
    write_text(per_class_csv, o.str());
  }
  return 0;
}

// ------------------------------------------------------------------ predict

int cmd_predict(const fs::path& ckpt_path, const fs::path& vocab_path, const fs::path& kpsq,
                std::size_t start, std::size_t top_k) {
  const auto ck = load_checkpoint(ckpt_path);
  const auto vocab = Vocabulary::load_file(vocab_path);
  if (vocab.size() != ck.config.vocab_size) {
    throw FormatError(FormatError::Code::kInvalid, "vocabulary size does not match checkpoint");
  }
  const auto file = read_kpsq_file(kpsq);
  if (file.header.keypoints != ck.config.keypoints) {
    throw FormatError(FormatError::Code::kInvalid, "KPSQ keypoint count does not match checkpoint");
  }
  const auto window = sample_window(file, start, ck.config.window_len);
  const Model<float> model(ck.config, ck.parameters);
  const auto logits = model.forward(window);
  std::vector<double> probs(logits.values().begin(), logits.values().end());
  kernels::softmax_row(std::span<double>(probs));
  for (std::size_t c : eval::topk_classes<float>(logits.span(), top_k)) {
    std::printf("%s\t%.6f\n", vocab.word(c).c_str(), probs[c]);
  }
  return 0;
}

// ------------------------------------------------------------------ inspect-model

int cmd_inspect(const fs::path& config_path, const fs::path& ckpt_path, const fs::path& json_out,
                const fs::path& csv_out) {
  ModelConfig mc;
  if (!ckpt_path.empty()) {
    mc = load_checkpoint(ckpt_path).config;
  } else if (!config_path.empty()) {
    mc = config::model_config(config::load(config_path));
  }
  const auto report = eval::computational_report(mc);
  std::printf("attention_mode: %s\n", std::string(to_string(mc.attention_mode)).c_str());
  std::printf("parameters: %llu\n", static_cast<unsigned long long>(report.parameters));
  std::printf("rgb_reference_parameters: %.0f\n", report.reference_parameters);
  std::printf("ratio: %.6f\n", report.ratio);
  std::printf("forward_macs: %llu\n", static_cast<unsigned long long>(report.forward_macs));
  if (!json_out.empty()) write_text(json_out, eval::to_json(report).dump(2) + "\n");
  if (!csv_out.empty()) write_text(csv_out, eval::to_csv(report));
  return 0;
}

// ------------------------------------------------------------------ augment-preview

struct PreviewFlags {
  fs::path kpsq;
  std::size_t start = 0;
  std::size_t window_len = kDefaultWindowLength;
  std::vector<double> shift;
  std::optional<double> scale, rotate;
  bool flip = false;
  std::optional<std::size_t> face_count;
  std::vector<std::size_t> frames;
  fs::path svg, csv;
};

int cmd_augment_preview(const PreviewFlags& f) {
  const auto file = read_kpsq_file(f.kpsq);
  const auto window = sample_window(file, f.start, f.window_len);
  const auto layout = layout_for_keypoints(window.keypoints(), f.face_count);
  augment::AugmentParams p;
  p.flip = f.flip;
  p.rotation_deg = f.rotate.value_or(0.0);
  p.scale = f.scale.value_or(1.0);
  if (!f.shift.empty()) {
    if (f.shift.size() != 2) throw InvalidArgument("--shift takes two values");
    p.dx = f.shift[0];
    p.dy = f.shift[1];
  }
  if (!(p.scale > 0.0)) throw InvalidArgument("--scale must be positive");
  const auto augmented = augment::apply_params(p, window, layout.flip_permutation());

  std::vector<std::size_t> frames = f.frames;
  if (frames.empty()) frames = {0, window.length() - 1};
  for (std::size_t t : frames) {
    if (t >= window.length()) throw InvalidArgument("--frames index outside the window");
  }

  const double w = window.frames.front().width, h = window.frames.front().height;
  std::ostringstream svg;
  svg.precision(std::numeric_limits<double>::max_digits10);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w * frames.size() << "\" height=\""
      << h << "\" viewBox=\"0 0 " << w * frames.size() << ' ' << h << "\">\n";
  for (std::size_t panel = 0; panel < frames.size(); ++panel) {
    const std::size_t t = frames[panel];
    svg << "<g id=\"frame-" << t << "\" transform=\"translate(" << w * panel << ",0)\">\n"
        << "<rect width=\"" << w << "\" height=\"" << h
        << "\" fill=\"white\" stroke=\"black\"/>\n";
    for (const char* cls : {"original", "augmented"}) {
      const bool orig = cls[0] == 'o';
      const auto& coords = (orig ? window : augmented).frames[t].coords;
      for (std::size_t k = 0; k < coords.size(); ++k) {
        svg << "<circle class=\"" << cls << "\" data-frame=\"" << t << "\" data-kp=\"" << k
            << "\" cx=\"" << coords[k].x << "\" cy=\"" << coords[k].y << "\" r=\"1.5\" fill=\""
            << (orig ? "#1f77b4" : "#d62728") << "\"/>\n";
      }
    }
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  write_text(f.svg, svg.str());

  if (!f.csv.empty()) {
    std::ostringstream csv;
    csv.precision(std::numeric_limits<double>::max_digits10);
    csv << "frame,keypoint,x,y,x_aug,y_aug\n";
    for (std::size_t t = 0; t < window.length(); ++t) {
      for (std::size_t k = 0; k < window.keypoints(); ++k) {
        const auto& a = window.frames[t].coords[k];
        const auto& b = augmented.frames[t].coords[k];
        csv << window.frames[t].frame_index << ',' << k << ',' << a.x << ',' << a.y << ',' << b.x
            << ',' << b.y << '\n';
      }
    }
    write_text(f.csv, csv.str());
  }
  std::printf("flip=%d rotate=%g scale=%g shift=(%g,%g)\n", p.flip ? 1 : 0, p.rotation_deg, p.scale,
              p.dx, p.dy);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keypoint sign-language word recognition"};
  app.require_subcommand(1);

  fs::path synth_config, synth_out;
  std::optional<std::uint64_t> synth_seed;
  auto* make_synth = app.add_subcommand("make-synth", "Generate a synthetic keypoint dataset");
  make_synth->add_option("--config", synth_config, "Config file with a [synth] section");
  make_synth->add_option("--out", synth_out, "Output dataset directory")->required();
  make_synth->add_option("--seed", synth_seed, "Override the synth seed");

  fs::path split_in, split_out;
  std::vector<double> split_ratios{0.8, 0.1, 0.1};
  std::uint64_t split_seed = 0;
  auto* split = app.add_subcommand("split", "Assign signer-disjoint train/val/test splits");
  split->add_option("--manifest", split_in, "Input manifest")->required();
  split->add_option("--out", split_out, "Output manifest")->required();
  split->add_option("--ratios", split_ratios, "train val test fractions")->expected(3);
  split->add_option("--seed", split_seed, "Shuffle seed");

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", tf.config, "Config file ([model], [train], [augment])");
  train->add_option("--data", tf.data.data_dir, "Dataset directory")->required();
  train->add_option("--manifest", tf.data.manifest, "Manifest (default <data>/manifest.tsv)");
  train->add_option("--out", tf.out_dir, "Run directory")->required();
  train->add_option("--threads", tf.threads, "Worker threads (default 1)");
  train->add_option("--epochs", tf.epochs, "Maximum epochs");
  train->add_option("--batch-size", tf.batch_size, "Batch size");
  train->add_option("--lr", tf.lr, "Learning rate");
  train->add_option("--seed", tf.seed, "Training seed");
  train->add_option("--attention-mode", tf.mode, "frame_wise or trajectory_wise");

  fs::path eval_ckpt, eval_out, eval_per_class;
  Paths eval_data;
  std::string eval_split = "val";
  auto* evaluate = app.add_subcommand("evaluate", "Top-1/top-5 metrics on a manifest split");
  evaluate->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  evaluate->add_option("--data", eval_data.data_dir, "Dataset directory")->required();
  evaluate->add_option("--manifest", eval_data.manifest, "Manifest (default <data>/manifest.tsv)");
  evaluate->add_option("--split", eval_split, "train, val or test");
  evaluate->add_option("--out", eval_out, "Metrics CSV");
  evaluate->add_option("--per-class", eval_per_class, "Per-class CSV");

  fs::path pred_ckpt, pred_vocab, pred_kpsq;
  std::size_t pred_start = 0, pred_k = 5;
  auto* predict = app.add_subcommand("predict", "Top-k words for one window");
  predict->add_option("--checkpoint", pred_ckpt, "Checkpoint file")->required();
  predict->add_option("--vocab", pred_vocab, "Vocabulary file")->required();
  predict->add_option("--kpsq", pred_kpsq, "KPSQ file")->required();
  predict->add_option("--start", pred_start, "First frame of the window");
  predict->add_option("--top-k", pred_k, "Number of words to print");

  fs::path insp_config, insp_ckpt, insp_json, insp_csv;
  auto* inspect = app.add_subcommand("inspect-model", "Parameter count and computational report");
  auto* insp_cfg_opt = inspect->add_option("--config", insp_config, "Config file with [model]");
  inspect->add_option("--checkpoint", insp_ckpt, "Checkpoint file")->excludes(insp_cfg_opt);
  inspect->add_option("--json", insp_json, "Write the report as JSON");
  inspect->add_option("--csv", insp_csv, "Write the report as CSV");

  PreviewFlags pf;
  auto* preview = app.add_subcommand("augment-preview", "Before/after SVG and CSV of an augmentation");
  preview->add_option("--kpsq", pf.kpsq, "KPSQ file")->required();
  preview->add_option("--start", pf.start, "First frame of the window");
  preview->add_option("--window-len", pf.window_len, "Window length");
  preview->add_option("--shift", pf.shift, "dx dy in pixels")->expected(2);
  preview->add_option("--scale", pf.scale, "Scale factor about the window centroid");
  preview->add_option("--rotate", pf.rotate, "Rotation in degrees about the window centroid");
  preview->add_flag("--flip", pf.flip, "Horizontal flip with left/right relabelling");
  preview->add_option("--face-count", pf.face_count, "Face keypoints in the layout (0, 128, 468)");
  preview->add_option("--frames", pf.frames, "Window frames to draw (default first and last)");
  preview->add_option("--svg", pf.svg, "SVG output")->required();
  preview->add_option("--csv", pf.csv, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*make_synth) return cmd_make_synth(synth_config, synth_out, synth_seed);
    if (*split) return cmd_split(split_in, split_out, split_ratios, split_seed);
    if (*train) return cmd_train(tf);
    if (*evaluate) return cmd_evaluate(eval_ckpt, eval_data, eval_split, eval_out, eval_per_class);
    if (*predict) return cmd_predict(pred_ckpt, pred_vocab, pred_kpsq, pred_start, pred_k);
    if (*inspect) return cmd_inspect(insp_config, insp_ckpt, insp_json, insp_csv);
    if (*preview) return cmd_augment_preview(pf);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
