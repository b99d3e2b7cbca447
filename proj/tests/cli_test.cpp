// Copyright 2026 The sadrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "test_util.hpp"

namespace sadrec {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = 0;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Writes a small synthetic rating log and returns its path.
fs::path make_ratings(const testing::TempDir& dir) {
  const Outcome o = run({"synth", "--users", "30", "--items", "150", "--per-user", "10",
                         "--seed", "2", "--out", (dir / "synth").string()});
  EXPECT_EQ(o.code, 0) << o.err;
  return dir / "synth" / "ratings.csv";
}

TEST(Cli, SimulateIsDeterministic) {
  testing::TempDir dir("cli-sim");
  const std::vector<std::string> base{"simulate", "--kind", "sim2", "--missing", "0",
                                      "--seed", "7"};
  auto with_out = [&](const std::string& name) {
    auto args = base;
    args.push_back("--out");
    args.push_back((dir / name).string());
    return args;
  };
  ASSERT_EQ(run(with_out("a")).code, 0);
  ASSERT_EQ(run(with_out("b")).code, 0);
  for (const char* file : {"report.csv", "trajectories.csv", "truth.ckpt"}) {
    EXPECT_EQ(slurp(dir / "a" / file), slurp(dir / "b" / file)) << file;
  }
  EXPECT_TRUE(fs::exists(dir / "a" / "manifest.json"));
}

TEST(Cli, SimulateDefaultsAreTheReferenceSetting) {
  testing::TempDir dir("cli-sim-defaults");
  ASSERT_EQ(run({"simulate", "--missing", "0", "--out", dir.path().string()}).code, 0);
  const RunManifest m = RunManifest::load(dir / "manifest.json");
  EXPECT_EQ(m.resolved["n_users"], 20);
  EXPECT_EQ(m.resolved["n_items"], 50);
  EXPECT_EQ(m.resolved["true_n_factors"], 5);
  EXPECT_EQ(m.resolved["kind"], "sim2");
  EXPECT_EQ(m.resolved["train"]["learning_rate"], "0.050000000000000003");
  EXPECT_EQ(m.resolved["train"]["l1_weight"], "0.01");
  EXPECT_EQ(m.resolved["train"]["epochs"], "20");
}

TEST(Cli, SimulateHighMissingnessCompletes) {
  testing::TempDir dir("cli-sim1");
  const Outcome o = run({"simulate", "--kind", "sim1", "--missing", "0.9", "--out",
                         dir.path().string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("sparsity="), std::string::npos);
}

TEST(Cli, TrainBprWritesAllOnesT) {
  testing::TempDir dir("cli-bpr");
  const fs::path data = make_ratings(dir);
  const Outcome o = run({"train", "--data", data.string(), "--model", "bpr", "--k", "4",
                         "--epochs", "3", "--out", (dir / "run").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const FactorModel model = load_checkpoint(dir / "run" / "model.ckpt");
  EXPECT_EQ(model.right_item_factors(), Matrix::Ones(4, model.n_items()));
}

TEST(Cli, TrainAcceptsWideLatentSpace) {
  testing::TempDir dir("cli-k500");
  const fs::path data = fs::path(SADREC_SOURCE_DIR) / "data" / "sample_100.csv";
  const Outcome o = run({"train", "--data", data.string(), "--k", "500", "--epochs", "2",
                         "--out", dir.path().string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(load_checkpoint(dir / "model.ckpt").n_factors(), 500);
}

TEST(Cli, RerunReproducesOutputs) {
  testing::TempDir dir("cli-rerun");
  const fs::path data = make_ratings(dir);
  const fs::path run_dir = dir / "train";
  ASSERT_EQ(run({"train", "--data", data.string(), "--k", "6", "--epochs", "4", "--seed",
                 "5", "--out", run_dir.string()})
                .code,
            0);
  const std::string ckpt = slurp(run_dir / "model.ckpt");
  const std::string log = slurp(run_dir / "train_log.csv");
  fs::remove(run_dir / "model.ckpt");
  fs::remove(run_dir / "train_log.csv");
  const Outcome again = run({"rerun", (run_dir / "manifest.json").string()});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(slurp(run_dir / "model.ckpt"), ckpt);
  EXPECT_EQ(slurp(run_dir / "train_log.csv"), log);
}

TEST(Cli, RerunRefusesChangedInputs) {
  testing::TempDir dir("cli-changed");
  const fs::path data = make_ratings(dir);
  ASSERT_EQ(run({"train", "--data", data.string(), "--k", "2", "--epochs", "1", "--out",
                 (dir / "t").string()})
                .code,
            0);
  std::ofstream(data, std::ios::app) << "999,1,5,0\n";
  const Outcome o = run({"rerun", (dir / "t" / "manifest.json").string()});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("changed"), std::string::npos);
}

TEST(Cli, ConfigFileOverridesFlags) {
  testing::TempDir dir("cli-config");
  const fs::path data = make_ratings(dir);
  std::ofstream(dir / "c.txt") << "epochs=2\nn_factors=3\n";
  ASSERT_EQ(run({"train", "--data", data.string(), "--epochs", "9", "--k", "8", "--config",
                 (dir / "c.txt").string(), "--out", (dir / "t").string()})
                .code,
            0);
  EXPECT_EQ(load_checkpoint(dir / "t" / "model.ckpt").n_factors(), 3);
  const RunManifest m = RunManifest::load(dir / "t" / "manifest.json");
  EXPECT_EQ(m.resolved["train"]["epochs"], "2");
  ASSERT_EQ(m.inputs.size(), 2u);
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  testing::TempDir dir("cli-env");
  const fs::path data = make_ratings(dir);
  ::setenv("SADREC_OUTPUT_DIR", (dir / "runs").string().c_str(), 1);
  const Outcome o = run({"train", "--data", data.string(), "--k", "2", "--epochs", "1",
                         "--seed", "4"});
  ::unsetenv("SADREC_OUTPUT_DIR");
  ASSERT_EQ(o.code, 0) << o.err;
  std::vector<fs::path> runs;
  for (const auto& e : fs::directory_iterator(dir / "runs")) runs.push_back(e.path());
  ASSERT_EQ(runs.size(), 1u);
  EXPECT_EQ(runs[0].filename().string().rfind("train-seed4-", 0), 0u);
  EXPECT_TRUE(fs::exists(runs[0] / "model.ckpt"));
}

TEST(Cli, GibbsTinyInstance) {
  testing::TempDir dir("cli-gibbs");
  const std::vector<std::string> args{"gibbs", "--kind", "sim2", "--n", "3", "--m", "4",
                                      "--true-k", "2", "--sweeps", "500", "--seed", "1"};
  auto a = args, b = args;
  a.insert(a.end(), {"--out", (dir / "a").string()});
  b.insert(b.end(), {"--out", (dir / "b").string(), "--save-samples"});
  ASSERT_EQ(run(a).code, 0);
  ASSERT_EQ(run(b).code, 0);
  const std::string summary = slurp(dir / "a" / "posterior_summary.csv");
  EXPECT_EQ(summary, slurp(dir / "b" / "posterior_summary.csv"));
  EXPECT_EQ(summary.find("nan"), std::string::npos);
  EXPECT_EQ(summary.find("inf"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "b" / "samples" / "sample_0399.ckpt"));
}

TEST(Cli, GibbsRefusesLargeProblems) {
  testing::TempDir dir("cli-cap");
  const Outcome o = run({"gibbs", "--kind", "sim1", "--n", "2000", "--m", "1000", "--out",
                         dir.path().string()});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("cap of 1e+06"), std::string::npos) << o.err;
  EXPECT_FALSE(fs::exists(dir / "manifest.json"));
}

TEST(Cli, EvaluateTwentySplits) {
  testing::TempDir dir("cli-eval");
  const fs::path data = make_ratings(dir);
  const Outcome o = run({"evaluate", "--data", data.string(), "--splits", "20", "--k", "3",
                         "--epochs", "2", "--parallel", "4", "--out", (dir / "e").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  std::istringstream csv(slurp(dir / "e" / "eval.csv"));
  std::vector<std::string> lines;
  for (std::string line; std::getline(csv, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 22u);
  EXPECT_EQ(lines[0], kEvalRowHeader);
  EXPECT_EQ(lines[1].substr(0, 2), "0,");
  EXPECT_EQ(lines[20].substr(0, 3), "19,");
  EXPECT_EQ(lines[21].substr(0, 10), "aggregate,");
  EXPECT_NE(slurp(dir / "e" / "eval_table.txt").find("M1 (%) | M2 (%)"), std::string::npos);
}

TEST(Cli, EvaluateParallelMatchesSerial) {
  testing::TempDir dir("cli-eval-par");
  const fs::path data = make_ratings(dir);
  const std::vector<std::string> base{"evaluate", "--data", data.string(), "--splits", "3",
                                      "--k", "3", "--epochs", "2"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", (dir / "a").string()});
  b.insert(b.end(), {"--out", (dir / "b").string(), "--parallel", "3"});
  ASSERT_EQ(run(a).code, 0);
  ASSERT_EQ(run(b).code, 0);
  EXPECT_EQ(slurp(dir / "a" / "eval.csv"), slurp(dir / "b" / "eval.csv"));
}

TEST(Cli, EvaluateCheckpoint) {
  testing::TempDir dir("cli-eval-ckpt");
  const fs::path data = make_ratings(dir);
  ASSERT_EQ(run({"train", "--data", data.string(), "--k", "3", "--epochs", "2", "--out",
                 (dir / "t").string()})
                .code,
            0);
  const Outcome o = run({"evaluate", "--data", data.string(), "--checkpoint",
                         (dir / "t" / "model.ckpt").string(), "--splits", "2", "--out",
                         (dir / "e").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("checkpoint |"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  testing::TempDir dir("cli-codes");
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"train"}).code, 1);
  EXPECT_EQ(run({"simulate", "--kind", "sim3"}).code, 1);
  EXPECT_EQ(run({"simulate", "--missing", "1.5", "--out", dir.path().string()}).code, 1);
  EXPECT_EQ(run({"train", "--data", (dir / "none.csv").string()}).code, 2);
  std::ofstream(dir / "bad.csv") << "1,2,3\n1,3,x\n";
  const Outcome bad = run({"train", "--data", (dir / "bad.csv").string(), "--out",
                           (dir / "bad").string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("bad.csv:2"), std::string::npos) << bad.err;
  const Outcome diverged = run({"simulate", "--missing", "0", "--lr", "1e6", "--l2", "0",
                                "--out", (dir / "div").string()});
  EXPECT_EQ(diverged.code, 3) << diverged.err;
  EXPECT_EQ(run({"--version"}).code, 0);
}

}  // namespace
}  // namespace sadrec
