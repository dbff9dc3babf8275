// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "ssodlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = ssod::cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "ssodlab_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static std::vector<std::string> small_overrides() {
    return {"--override", "multiscale.scales=[1]", "--override", "batch_labeled=2",
            "--override", "batch_unlabeled=2",     "--override", "steps_per_epoch=2",
            "--override", "burnin_epochs=1",       "--override", "data.labeled_pct=25",
            "--override", "data.val_count=4"};
  }

  static fs::path root_;
};
fs::path CliTest::root_;

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"gen-data", "--bogus"}).code, 1);
  EXPECT_EQ(run({"gen-data"}).code, 1);
  const auto help = run({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("train"), std::string::npos);
}

TEST_F(CliTest, GenDataIsReproducible) {
  const auto a = root_ / "gen_a", b = root_ / "gen_b";
  ASSERT_EQ(run({"gen-data", "--seed", "42", "--n", "6", "--out", a.string()}).code, 0);
  ASSERT_EQ(run({"gen-data", "--seed", "42", "--n", "6", "--out", b.string()}).code, 0);
  EXPECT_EQ(slurp(a / "annotations.json"), slurp(b / "annotations.json"));
  EXPECT_TRUE(fs::exists(a / "manifest.json"));
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(manifest["num_images"], 6);
  ASSERT_EQ(run({"gen-data", "--seed", "42", "--n", "6", "--shifted", "--out",
                 (root_ / "gen_s").string()}).code, 0);
  EXPECT_NE(slurp(a / "annotations.json").size(), 0u);
}

TEST_F(CliTest, TrainEvalInspect) {
  const auto data = root_ / "data";
  ASSERT_EQ(run({"gen-data", "--seed", "1", "--n", "24", "--out", data.string()}).code, 0);
  const auto out = root_ / "run";
  auto args = std::vector<std::string>{"train", "--out", out.string(), "--override",
                                       "data.annotations=" + (data / "annotations.json").string(),
                                       "--override", "epochs=1"};
  for (const auto& s : small_overrides()) args.push_back(s);
  const auto tr = run(args);
  ASSERT_EQ(tr.code, 0) << tr.err;
  for (const char* f : {"config.json", "split.json", "metrics.jsonl", "thresholds.tsv",
                        "final.json", "checkpoints/last.ckpt", "checkpoints/epoch_2.ckpt"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  std::ifstream metrics(out / "metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) {
    const auto rec = nlohmann::json::parse(line);
    EXPECT_TRUE(rec.contains("AP50"));
    EXPECT_TRUE(rec["loss"].contains("L_u"));
    ++lines;
  }
  EXPECT_EQ(lines, 2);

  const auto ckpt = (out / "checkpoints" / "last.ckpt").string();
  const auto ev = run({"eval", "--ckpt", ckpt});
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto j = nlohmann::json::parse(ev.out);
  EXPECT_EQ(j["images"], 4);
  EXPECT_GE(j["AP50"].get<double>(), j["AP50_95"].get<double>());

  const auto ith = run({"inspect-thresholds", "--ckpt", ckpt});
  ASSERT_EQ(ith.code, 0) << ith.err;
  EXPECT_EQ(ith.out.rfind("k\tclass\ttau1\ttau2", 0), 0u);
  EXPECT_NE(ith.out.find("active"), std::string::npos);

  const auto ips = run({"inspect-pseudo", "--ckpt", ckpt, "--n", "2"});
  ASSERT_EQ(ips.code, 0) << ips.err;
  const auto pj = nlohmann::json::parse(ips.out);
  EXPECT_EQ(pj["images"].size(), 2u);
  EXPECT_TRUE(pj.contains("cells"));

  // Resuming under a different config is refused.
  auto resume = args;
  resume.push_back("--ckpt");
  resume.push_back(ckpt);
  resume.push_back("--override");
  resume.push_back("lr=0.5");
  const auto rr = run(resume);
  EXPECT_EQ(rr.code, 1);
  EXPECT_NE(rr.err.find("config"), std::string::npos);
}

TEST_F(CliTest, MissingInputs) {
  EXPECT_EQ(run({"eval", "--ckpt", (root_ / "nope.ckpt").string()}).code, 1);
  EXPECT_EQ(run({"train", "--out", (root_ / "x").string(), "--override",
                 "data.annotations=/nonexistent.json"}).code, 1);
  EXPECT_EQ(run({"train", "--out", (root_ / "x").string(), "--override", "no.such.key=1"}).code, 1);
  EXPECT_EQ(run({"train", "--out", (root_ / "x").string(), "--config",
                 (root_ / "missing.json").string()}).code, 1);
}

}  // namespace
