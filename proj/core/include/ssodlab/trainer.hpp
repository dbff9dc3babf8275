// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssodlab/config.hpp"
#include "ssodlab/detector.hpp"
#include "ssodlab/epoch_corresponding.hpp"
#include "ssodlab/eval.hpp"
#include "ssodlab/image.hpp"
#include "ssodlab/losses.hpp"
#include "ssodlab/pseudo_label.hpp"
#include "ssodlab/split.hpp"
#include "ssodlab/synthetic.hpp"

namespace ssod {

/// Images and annotations the trainer reads; all images share one size.
struct TrainData {
  int num_classes = 0;
  std::vector<Image> labeled;
  std::vector<DetectionSet> labeled_gt;
  std::vector<Image> unlabeled;
  std::vector<Image> val;
  std::vector<DetectionSet> val_gt;
};

enum class Phase { kBurnin, kSsod };
const char* phase_name(Phase p);

struct TrainerState {
  DetectorParams student;
  DetectorParams teacher;
  std::vector<Tensor> velocity;  ///< SGD momentum buffers, one per parameter
  int epoch = 0;                 ///< completed epochs (burn-in + ssod)
  std::int64_t step = 0;         ///< completed optimizer steps
  Phase phase = Phase::kBurnin;
  bool has_teacher = false;
  EpochStats stats;              ///< scores collected for the next schedule
  ThresholdSchedule schedule;    ///< thresholds in force this epoch
  bool schedule_sealed = false;
  std::string rng_state;
  std::vector<nlohmann::json> metrics;

  bool operator==(const TrainerState&) const = default;
};

/// teacher <- m * teacher + (1 - m) * student, element-wise. Throws
/// ShapeError unless the sets are structurally identical.
void ema_update(DetectorParams& teacher, const DetectorParams& student, double m);

/// One labeled batch: weakly augmented images and their boxes.
struct LabeledBatch {
  std::vector<Image> images;
  std::vector<DetectionSet> gt;
};

/// One unlabeled batch: the weak (teacher) views and the seeds of the strong
/// and MixPL draws.
struct UnlabeledBatch {
  std::vector<Image> weak;
  std::uint64_t seed = 0;
};

/// Batch sampler shared by both phases. Everything is a pure function of
/// (config seed, epoch, step).
class BatchSource {
 public:
  BatchSource(const TrainConfig& cfg, const TrainData& data);
  int steps_per_epoch() const { return steps_; }
  LabeledBatch labeled(int epoch, int step) const;
  UnlabeledBatch unlabeled(int epoch, int step) const;

 private:
  const TrainConfig& cfg_;
  const TrainData& data_;
  int steps_ = 0;
};

struct StepResult {
  LossBreakdown loss;
  std::size_t num_pseudo_labels = 0;
  std::vector<std::int64_t> presented_gt;
};

/// Student update on a labeled batch only (supervised loss, no domain term).
StepResult supervised_step(TrainerState& state, const TrainConfig& cfg,
                           const DetectorConfig& dcfg, const LabeledBatch& lb);

/// One burn-in step: supervised loss plus lambda_da times the domain loss on
/// the labeled (D=0) and unlabeled (D=1) features.
StepResult burnin_step(TrainerState& state, const TrainConfig& cfg,
                       const DetectorConfig& dcfg, const LabeledBatch& lb,
                       const UnlabeledBatch& ub);

/// One semi-supervised step: teacher pseudo-labels the weak views, scores go
/// to state.stats, strong augmentation and MixPL build the student inputs,
/// L_s + lambda_u * L_u is minimized with one SGD step and the teacher
/// follows by EMA. Throws StateError unless the schedule is sealed.
StepResult train_step(TrainerState& state, const TrainConfig& cfg,
                      const DetectorConfig& dcfg, const LabeledBatch& lb,
                      const UnlabeledBatch& ub);

/// Fresh state with student initialised from the config seed.
TrainerState init_state(const TrainConfig& cfg, const DetectorConfig& dcfg);

/// Evaluates params on a set of images.
EvalResult evaluate_params(const DetectorParams& params, const DetectorConfig& dcfg,
                           const TrainConfig& cfg, const std::vector<Image>& images,
                           const std::vector<DetectionSet>& gt);

/// Accuracy of the domain classifier on source (D=0) and target (D=1)
/// images.
double domain_classifier_accuracy(const DetectorParams& params,
                                  const DetectorConfig& dcfg,
                                  const std::vector<Image>& source,
                                  const std::vector<Image>& target);

/// Detection sets for a list of images (decode + class-wise NMS).
std::vector<DetectionSet> detect(const DetectorParams& params, const DetectorConfig& dcfg,
                                 const TrainConfig& cfg, const std::vector<Image>& images);

/// Hooks for observing a run.
struct RunHooks {
  std::function<void(const TrainerState&)> on_epoch_end;
  std::function<void(const TrainerState&, const StepResult&)> on_step;
  std::function<void(const std::string&)> log;
  /// Directory for metrics.jsonl, thresholds.tsv, checkpoints and score
  /// dumps; empty disables file output.
  std::filesystem::path out_dir;
};

/// Burn-in epochs (from state.epoch to cfg.resolved_burnin_epochs()). At the
/// end the teacher becomes an exact copy of the student, the teacher scores
/// one epoch of unlabeled weak views to prime the statistics, and a burn-in
/// metrics record is appended.
void run_burnin(TrainerState& state, const TrainConfig& cfg, const DetectorConfig& dcfg,
                const TrainData& data, const RunHooks& hooks = {});

/// Semi-supervised epochs until cfg.epochs have completed. Each epoch seals
/// the previous statistics, computes thresholds, trains, evaluates the
/// teacher, appends a metrics record and checkpoints.
void run_ssod(TrainerState& state, const TrainConfig& cfg, const DetectorConfig& dcfg,
              const TrainData& data, const RunHooks& hooks = {});

/// run_burnin followed by run_ssod, resuming from whatever state holds.
void run_training(TrainerState& state, const TrainConfig& cfg, const DetectorConfig& dcfg,
                  const TrainData& data, const RunHooks& hooks = {});

/// Builds TrainData from a dataset and a split.
TrainData make_train_data(const InMemoryDataset& ds, const SplitManifest& split);

/// Domain-adaptation variant: labeled images from the source split, every
/// non-validation target image as unlabeled, validation from the target.
TrainData make_adaptation_data(const InMemoryDataset& source, const SplitManifest& source_split,
                               const InMemoryDataset& target, const SplitManifest& target_split);

/// Metrics record as written to metrics.jsonl.
nlohmann::json metrics_record(int epoch, Phase phase, const LossBreakdown& mean_loss,
                              const EvalResult& eval);

}  // namespace ssod
