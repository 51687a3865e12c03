// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdio>
#include <fstream>

#include <gtest/gtest.h>

#include "flowzero/bundle.hpp"
#include "temp_dir.hpp"

namespace fz = flowzero;

namespace {

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(FLOWZERO_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.output.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string sample(const char* name) { return std::string(FLOWZERO_SOURCE_DIR) + "/samples/" + name; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const std::string kHorse = "\"a horse running from right to left\"";

}  // namespace

TEST(Cli, HelpListsEveryFlag) {
  const auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* flag : {"--frames", "--canvas", "--latent", "--lambda", "--max-iter", "--pixel-scale",
                           "--sigma-phi", "--seed", "--mock", "--record", "--replay", "--out", "--feedback",
                           "--config", "--dtype", "--templates", "--concurrency", "--inclusive", "--model",
                           "--temperature", "--min-disp", "--ratio-threshold", "--visibility-tolerance",
                           "--cases", "--simulated", "--error-rate", "FLOWZERO_API_KEY", "FLOWZERO_API_BASE"}) {
    EXPECT_NE(r.output.find(flag), std::string::npos) << flag;
  }
  for (const char* sub : {"generate", "refine", "verify", "shift", "emit", "bench", "render", "pipeline"}) {
    EXPECT_NE(r.output.find(sub), std::string::npos) << sub;
  }
}

TEST(Cli, MockPipelineForHorse) {
  fzt::TempDir dir;
  const auto r = run("pipeline " + kHorse + " --mock " + sample("horse_script.json") + " --out " + dir.path().string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto b = fz::load_bundle(dir.path() / "bundle");
  ASSERT_EQ(b.noises.size(), 8u);
  for (const auto& f : b.manifest.frames) EXPECT_EQ(f.direction, fz::Direction::kRight);
  EXPECT_EQ(b.manifest.frames[7].shift.offset_x, 14.0);
  EXPECT_EQ(b.dss.prompt.text, "a horse running from right to left");
  const auto trace = fz::ordered_json::parse(slurp(dir.path() / "trace" / "trace.json"));
  EXPECT_EQ(trace["terminal_reason"], "converged");
  EXPECT_EQ(trace["iterations"].size(), 2u);
  EXPECT_NE(slurp(dir.path() / "summary.txt").find("frame 7: right"), std::string::npos);
}

TEST(Cli, MissingApiKeyIsUsageError) {
  fzt::TempDir dir;
  const auto r = run("pipeline " + kHorse + " --out " + dir.path().string(), "env -u FLOWZERO_API_KEY");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("FLOWZERO_API_KEY"), std::string::npos) << r.output;
}

TEST(Cli, UnwritableOutputIsPipelineError) {
  fzt::TempDir dir;
  std::ofstream(dir.path() / "file") << "x";
  const auto r = run("pipeline " + kHorse + " --mock " + sample("horse_script.json") + " --out " +
                     (dir.path() / "file" / "out").string());
  EXPECT_EQ(r.code, 1) << r.output;
}

TEST(Cli, BadFlagValuesAreUsageErrors) {
  EXPECT_EQ(run("emit x.json --lambda 9").code, 2);
  EXPECT_EQ(run("emit x.json --feedback maybe").code, 2);
  EXPECT_EQ(run("emit " + sample("horse_dss.json") + " --latent 64x64").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST(Cli, ConfigFileLosesToFlags) {
  fzt::TempDir dir;
  const auto a = dir.path() / "a";
  const auto b = dir.path() / "b";
  ASSERT_EQ(run("emit " + sample("horse_dss.json") + " --config " + sample("config.json") + " --out " + a.string()).code, 0);
  ASSERT_EQ(run("emit " + sample("horse_dss.json") + " --config " + sample("config.json") + " --dtype f64 --out " +
                b.string()).code, 0);
  EXPECT_EQ(fz::load_bundle(a).manifest.dtype, fz::TensorDtype::kFloat32);
  EXPECT_EQ(fz::load_bundle(b).manifest.dtype, fz::TensorDtype::kFloat64);

  std::ofstream(dir.path() / "bad.json") << R"({"no-such-flag": 1})";
  EXPECT_EQ(run("emit " + sample("horse_dss.json") + " --config " + (dir.path() / "bad.json").string()).code, 2);
}

TEST(Cli, RecordThenReplayIsIdentical) {
  fzt::TempDir dir;
  const auto transcript = (dir.path() / "t.json").string();
  const auto first = run("refine " + kHorse + " --mock " + sample("horse_script.json") + " --record " + transcript +
                         " --out " + (dir.path() / "r1").string());
  ASSERT_EQ(first.code, 0) << first.output;
  const auto second = run("refine " + kHorse + " --replay " + transcript + " --out " + (dir.path() / "r2").string());
  ASSERT_EQ(second.code, 0) << second.output;
  EXPECT_EQ(first.output, second.output);
  EXPECT_EQ(slurp(dir.path() / "r1" / "dss.json"), slurp(dir.path() / "r2" / "dss.json"));
}

TEST(Cli, EmitIsDeterministic) {
  fzt::TempDir dir;
  for (const char* d : {"x", "y"}) {
    ASSERT_EQ(run("emit " + sample("horse_dss.json") + " --seed 5 --out " + (dir.path() / d).string()).code, 0);
  }
  EXPECT_EQ(slurp(dir.path() / "x" / "manifest.json"), slurp(dir.path() / "y" / "manifest.json"));
}

TEST(Cli, RenderWritesFrames) {
  fzt::TempDir dir;
  const auto r = run("render " + sample("horse_dss.json") + " --canvas 128x96 --out " + dir.path().string());
  ASSERT_EQ(r.code, 0) << r.output;
  for (int i = 0; i < 8; ++i) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / ("frame_00" + std::to_string(i) + ".png")));
  }
}

TEST(Cli, VerifyReportsConfidence) {
  const auto r = run("verify " + sample("horse_dss.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto doc = fz::ordered_json::parse(r.output);
  EXPECT_EQ(doc["feedback"]["confidence"], 5);
  EXPECT_EQ(doc["case"]["task"], "movement");
}

TEST(Cli, SimulatedBenchWritesTableAndTranscripts) {
  fzt::TempDir dir;
  const auto r = run("bench --simulated --cases 5 --error-rate 0.4 --feedback local --out " + dir.path().string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("w/ self-refine"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "bench.json"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "transcripts" / "case_019.json"));
  const auto doc = fz::ordered_json::parse(slurp(dir.path() / "bench.json"));
  ASSERT_EQ(doc["tasks"].size(), 4u);
}
