#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "kpsign/kpsign.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(KPSIGN_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "kpsign_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write(dir_ / "synth.ini",
          "[synth]\nn_classes = 4\nsamples_per_class = 6\nn_signers = 3\nwindow_len = 4\n");
    const auto r = run("make-synth --config " + (dir_ / "synth.ini").string() + " --out " +
                       (dir_ / "data").string());
    ASSERT_EQ(r.code, 0) << r.out;
  }

  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("no-such-command").code, 1);
  EXPECT_EQ(run("train --data x").code, 1);  // missing --out
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, DataErrorsExitTwo) {
  write(dir_ / "garbage.kpsq", "not a kpsq file at all, definitely");
  const auto r = run("augment-preview --kpsq " + (dir_ / "garbage.kpsq").string() + " --svg " +
                     (dir_ / "g.svg").string());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_EQ(run("inspect-model --config " + (dir_ / "missing.ini").string()).code, 2);
  write(dir_ / "bad.ini", "[model]\nunknown_key = 1\n");
  EXPECT_EQ(run("inspect-model --config " + (dir_ / "bad.ini").string()).code, 2);
}

TEST_F(Cli, InspectReferenceModel) {
  const auto json = dir_ / "report.json";
  const auto r = run("inspect-model --json " + json.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("parameters: 23657954"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("ratio: 0.6857"), std::string::npos) << r.out;
  const auto report = kpsign::eval::report_from_json(nlohmann::json::parse(slurp(json)));
  EXPECT_EQ(report.parameters, 23'657'954u);
  EXPECT_EQ(report.reference_parameters, 34.5e6);
}

TEST_F(Cli, ShiftPreviewOffsetsEveryKeypointByExactly15) {
  const auto kpsq = dir_ / "data" / "seq" / "signer_000.kpsq";
  const auto svg = dir_ / "shift.svg", csv = dir_ / "shift.csv";
  const auto r = run("augment-preview --kpsq " + kpsq.string() + " --window-len 4 --shift 15 15" +
                     " --svg " + svg.string() + " --csv " + csv.string());
  ASSERT_EQ(r.code, 0) << r.out;

  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "frame,keypoint,x,y,x_aug,y_aug");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    double x, y, xa, ya;
    long frame, kp;
    ASSERT_EQ(std::sscanf(line.c_str(), "%ld,%ld,%lf,%lf,%lf,%lf", &frame, &kp, &x, &y, &xa, &ya),
              6);
    EXPECT_EQ(xa - x, 15.0);
    EXPECT_EQ(ya - y, 15.0);
    ++rows;
  }
  EXPECT_EQ(rows, 4u * 75u);

  const std::string text = slurp(svg);
  const std::regex circle(
      R"re(class="(original|augmented)" data-frame="(\d+)" data-kp="(\d+)" cx="([^"]+)" cy="([^"]+)")re");
  std::map<std::pair<int, int>, std::pair<double, double>> original, augmented;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), circle);
       it != std::sregex_iterator(); ++it) {
    auto& target = (*it)[1] == "original" ? original : augmented;
    target[{std::stoi((*it)[2]), std::stoi((*it)[3])}] = {std::stod((*it)[4]),
                                                          std::stod((*it)[5])};
  }
  ASSERT_EQ(original.size(), 2u * 75u);
  ASSERT_EQ(augmented.size(), original.size());
  for (const auto& [key, p] : original) {
    EXPECT_EQ(augmented[key].first - p.first, 15.0);
    EXPECT_EQ(augmented[key].second - p.second, 15.0);
  }
}

TEST_F(Cli, SplitTrainEvaluatePredict) {
  const auto data = dir_ / "data";
  const auto manifest = dir_ / "resplit.tsv";
  auto r = run("split --manifest " + (data / "manifest.tsv").string() + " --out " +
               manifest.string() + " --ratios 0.6 0.2 0.2 --seed 3");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto entries = kpsign::read_manifest_file(manifest);
  EXPECT_EQ(entries.size(), 24u);

  write(dir_ / "train.ini",
        "[model]\nd_model = 8\nn_layers = 1\nn_heads = 2\nffn_dim = 16\nwindow_len = 4\n"
        "[train]\nmax_epochs = 2\nbatch_size = 8\nlearning_rate = 0.001\n"
        "[augment]\nenabled = shift,flip\n");
  const auto run_dir = dir_ / "run";
  r = run("train --config " + (dir_ / "train.ini").string() + " --data " + data.string() +
          " --out " + run_dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"model.ckpt", "config.ini", "vocab.txt", "train.log"}) {
    EXPECT_TRUE(fs::exists(run_dir / f)) << f;
  }
  const auto log = slurp(run_dir / "train.log");
  EXPECT_NE(log.find("epoch=1 train_loss="), std::string::npos) << log;
  EXPECT_NE(log.find("epoch=2 train_loss="), std::string::npos) << log;
  EXPECT_NE(slurp(run_dir / "config.ini").find("[augment]"), std::string::npos);

  const auto metrics = dir_ / "metrics.csv";
  r = run("evaluate --checkpoint " + (run_dir / "model.ckpt").string() + " --data " +
          data.string() + " --split val --out " + metrics.string() + " --per-class " +
          (dir_ / "per_class.csv").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(metrics).rfind("split,samples,top1,top5,loss\nval,", 0), 0u);

  r = run("predict --checkpoint " + (run_dir / "model.ckpt").string() + " --vocab " +
          (data / "vocab.txt").string() + " --kpsq " +
          (data / "seq" / "signer_001.kpsq").string() + " --start 4 --top-k 3");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3) << r.out;
  EXPECT_EQ(r.out.rfind("sign", 0), 0u) << r.out;

  r = run("inspect-model --checkpoint " + (run_dir / "model.ckpt").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto expected = kpsign::count_parameters(kpsign::load_checkpoint(run_dir / "model.ckpt").config);
  EXPECT_NE(r.out.find("parameters: " + std::to_string(expected)), std::string::npos);

  // Deterministic given identical inputs and seeds.
  const auto ckpt = kpsign::read_file_bytes(run_dir / "model.ckpt");
  r = run("train --config " + (dir_ / "train.ini").string() + " --data " + data.string() +
          " --out " + (dir_ / "run2").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(kpsign::read_file_bytes(dir_ / "run2" / "model.ckpt"), ckpt);

  r = run("predict --checkpoint " + (run_dir / "model.ckpt").string() + " --vocab " +
          (data / "vocab.txt").string() + " --kpsq " +
          (data / "seq" / "signer_001.kpsq").string() + " --start 100000");
  EXPECT_EQ(r.code, 1) << r.out;
}

TEST_F(Cli, NumericFailureExitsThree) {
  write(dir_ / "diverge.ini",
        "[model]\nd_model = 8\nn_layers = 1\nn_heads = 2\nffn_dim = 16\nwindow_len = 4\n"
        "[train]\nmax_epochs = 3\nbatch_size = 1\nlearning_rate = 1e30\n");
  const auto r = run("train --config " + (dir_ / "diverge.ini").string() + " --data " +
                     (dir_ / "data").string() + " --out " + (dir_ / "diverge").string());
  EXPECT_EQ(r.code, 3) << r.out;
}
