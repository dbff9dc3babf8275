// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "ssodlab/checkpoint.hpp"
#include "ssodlab/errors.hpp"

namespace {

namespace fs = std::filesystem;

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ssodlab_ckpt_" + std::string(
        ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    cfg_ = ssod::config_with_overrides({"multiscale.scales=[1]", "batch_labeled=2",
                                        "batch_unlabeled=2", "steps_per_epoch=2",
                                        "burnin_epochs=1", "epochs=2", "data.labeled_pct=25"});
    ssod::SyntheticSceneSpec spec;
    const auto ds = ssod::render_dataset(spec, 24, 3);
    ssod::SplitOptions so;
    so.labeled_pct = cfg_.labeled_pct;
    so.val_count = 4;
    data_ = ssod::make_train_data(ds, ssod::make_split(ds.meta, so));
    dcfg_ = cfg_.detector(data_.num_classes);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
  ssod::TrainConfig cfg_;
  ssod::DetectorConfig dcfg_;
  ssod::TrainData data_;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

TEST_F(CheckpointTest, RoundTripIsExact) {
  auto st = ssod::init_state(cfg_, dcfg_);
  ssod::run_burnin(st, cfg_, dcfg_, data_);
  const auto path = dir_ / "a.ckpt";
  ssod::save_checkpoint(path, st, cfg_);
  EXPECT_FALSE(fs::exists(dir_ / "a.ckpt.tmp"));
  const auto back = ssod::load_checkpoint(path, cfg_, dcfg_);
  EXPECT_TRUE(back == st);

  const auto meta = ssod::read_checkpoint_meta(path);
  EXPECT_EQ(meta.version, ssod::kCheckpointVersion);
  EXPECT_EQ(meta.config_hash, cfg_.hash());
  EXPECT_EQ(meta.epoch, 1);
  EXPECT_EQ(meta.phase, "ssod");
  EXPECT_TRUE(meta.has_teacher);
  EXPECT_EQ(ssod::checkpoint_config(path).hash(), cfg_.hash());
  EXPECT_TRUE(ssod::checkpoint_eval_params(path, dcfg_) == st.teacher);

  // Saving the loaded state reproduces the file byte for byte.
  ssod::save_checkpoint(dir_ / "b.ckpt", back, cfg_);
  EXPECT_EQ(slurp(path), slurp(dir_ / "b.ckpt"));
}

TEST_F(CheckpointTest, FreshStateWithoutTeacher) {
  const auto st = ssod::init_state(cfg_, dcfg_);
  ssod::save_checkpoint(dir_ / "s.ckpt", st, cfg_);
  EXPECT_TRUE(ssod::load_checkpoint(dir_ / "s.ckpt", cfg_, dcfg_) == st);
  EXPECT_FALSE(ssod::read_checkpoint_meta(dir_ / "s.ckpt").has_teacher);
  EXPECT_TRUE(ssod::checkpoint_eval_params(dir_ / "s.ckpt", dcfg_) == st.student);
}

TEST_F(CheckpointTest, HashMismatchIsConfigError) {
  const auto st = ssod::init_state(cfg_, dcfg_);
  ssod::save_checkpoint(dir_ / "h.ckpt", st, cfg_);
  auto other = cfg_;
  other.lr = 0.02;
  EXPECT_THROW(ssod::load_checkpoint(dir_ / "h.ckpt", other, dcfg_), ssod::ConfigError);
}

TEST_F(CheckpointTest, CorruptionIsIntegrityError) {
  const auto st = ssod::init_state(cfg_, dcfg_);
  const auto path = dir_ / "c.ckpt";
  ssod::save_checkpoint(path, st, cfg_);
  const std::string bytes = slurp(path);
  for (std::size_t pos : {std::size_t{0}, std::size_t{9}, bytes.size() / 2, bytes.size() - 1}) {
    std::string bad = bytes;
    bad[pos] = static_cast<char>(bad[pos] ^ 0x5a);
    std::ofstream(dir_ / "bad.ckpt", std::ios::binary) << bad;
    EXPECT_THROW(ssod::load_checkpoint(dir_ / "bad.ckpt", cfg_, dcfg_), ssod::IntegrityError) << pos;
  }
  std::ofstream(dir_ / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 10);
  EXPECT_THROW(ssod::read_checkpoint_meta(dir_ / "short.ckpt"), ssod::IntegrityError);
  std::ofstream(dir_ / "tiny.ckpt", std::ios::binary) << "SSOD";
  EXPECT_THROW(ssod::read_checkpoint_meta(dir_ / "tiny.ckpt"), ssod::IntegrityError);
}

TEST_F(CheckpointTest, WrongArchitectureIsShapeError) {
  const auto st = ssod::init_state(cfg_, dcfg_);
  ssod::save_checkpoint(dir_ / "w.ckpt", st, cfg_);
  auto narrow = dcfg_;
  narrow.neck_width = 16;
  EXPECT_THROW(ssod::load_checkpoint(dir_ / "w.ckpt", cfg_, narrow), ssod::ShapeError);
}

TEST_F(CheckpointTest, ResumeIsBitExact) {
  ssod::RunHooks hooks;
  hooks.out_dir = dir_ / "run";
  fs::create_directories(hooks.out_dir);
  auto full = ssod::init_state(cfg_, dcfg_);
  ssod::run_training(full, cfg_, dcfg_, data_, hooks);

  auto resumed = ssod::load_checkpoint(hooks.out_dir / "checkpoints" / "epoch_2.ckpt", cfg_, dcfg_);
  EXPECT_EQ(resumed.epoch, 2);
  ssod::run_training(resumed, cfg_, dcfg_, data_);
  EXPECT_TRUE(resumed == full);

  auto from_burnin = ssod::load_checkpoint(hooks.out_dir / "checkpoints" / "epoch_1.ckpt", cfg_, dcfg_);
  ssod::run_training(from_burnin, cfg_, dcfg_, data_);
  EXPECT_TRUE(from_burnin == full);
  EXPECT_TRUE(ssod::load_checkpoint(hooks.out_dir / "checkpoints" / "last.ckpt", cfg_, dcfg_) == full);
}

}  // namespace
