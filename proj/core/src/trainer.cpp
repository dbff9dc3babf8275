// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "ssodlab/augment.hpp"
#include "ssodlab/checkpoint.hpp"
#include "ssodlab/errors.hpp"
#include "ssodlab/rng.hpp"

namespace ssod {

namespace {

// Purpose tags mixed into derive_seed.
enum Purpose : std::uint64_t {
  kInit = 1,
  kLabeledOrder,
  kMosaicPartners,
  kWeakAug,
  kUnlabeledOrder,
  kWeakFlip,
  kStrongSeed,
  kStrongAug,
  kMixChoice,
  kReservoir,
};

int num_workers() {
  if (const char* env = std::getenv("SSODLAB_NUM_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return std::min(n, 64);
  }
  return 1;
}

// Runs fn(i) for i in [0, n). Each index writes only its own output, so the
// result does not depend on the worker count.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  const int workers = std::min(num_workers(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

// Index of slot s in an endless sequence of independent shuffles.
std::size_t shuffled_slot(std::size_t n, std::uint64_t seed, int epoch, std::size_t slot,
                          Purpose purpose) {
  const std::size_t round = slot / n;
  const auto perm = permutation(
      n, derive_seed({seed, purpose, static_cast<std::uint64_t>(epoch), round}));
  return perm[slot % n];
}

void add_head_grads(Graph& g, const TapedForward& out,
                    std::initializer_list<const LossValue*> parts, double scale) {
  for (std::size_t l = 0; l < out.heads.size(); ++l) {
    Tensor sum;
    for (const LossValue* lv : parts) {
      if (lv->grads.empty()) continue;
      if (sum.empty()) {
        sum = lv->grads[l];
      } else {
        sum.add_(lv->grads[l]);
      }
    }
    if (sum.empty()) continue;
    if (scale != 1.0) sum.scale_(scale);
    g.accumulate_grad(out.heads[l], sum);
  }
}

void collect_grads(const Graph& g, const DetectorParams& params, std::vector<Tensor>& acc) {
  const Parameter* base = params.items().data();
  for (const auto& [p, t] : g.param_grads()) {
    const auto idx = static_cast<std::size_t>(p - base);
    if (idx >= acc.size()) throw StateError("gradient for a foreign parameter");
    if (acc[idx].empty()) {
      acc[idx] = *t;
    } else {
      acc[idx].add_(*t);
    }
  }
}

// SGD with momentum; parameters without a gradient are left untouched.
void sgd_update(TrainerState& state, const TrainConfig& cfg, const std::vector<Tensor>& grads) {
  auto& items = state.student.items();
  if (state.velocity.size() != items.size()) {
    throw StateError("optimizer state does not match the parameter set");
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (grads[i].empty()) continue;
    Tensor& w = items[i].value;
    Tensor& v = state.velocity[i];
    if (v.empty()) v = Tensor(w.shape());
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = grads[i][k] + cfg.weight_decay * w[k];
      v[k] = cfg.momentum * v[k] + gk;
      w[k] -= cfg.lr * v[k];
    }
  }
}

struct SupervisedPass {
  SupervisedLoss loss;
  std::vector<std::int64_t> presented;
};

// Forward + backward of the supervised loss on the labeled batch. When
// domain_out is given the graph also carries the domain branch.
SupervisedPass supervised_pass(Graph& g, const DetectorParams& params,
                               const DetectorConfig& dcfg, const LabeledBatch& lb,
                               DomainBranch branch, TapedForward& out) {
  if (lb.images.empty()) throw ConfigError("empty labeled batch");
  Var x = g.input(images_to_tensor(lb.images));
  out = forward_taped(g, params, dcfg, x, branch);
  const DensePredictions preds = to_dense_predictions(g, out, dcfg.anchors);
  const DenseTargets targets =
      build_supervised_targets(lb.gt, dcfg.anchors, dcfg.image_size());
  SupervisedPass r;
  r.loss = supervised_loss(preds, targets, dcfg.anchors);
  add_head_grads(g, out, {&r.loss.cls, &r.loss.reg, &r.loss.obj}, 1.0);
  r.presented.assign(static_cast<std::size_t>(dcfg.anchors.num_classes), 0);
  for (const auto& set : lb.gt) {
    const auto counts = class_counts(set, dcfg.anchors.num_classes);
    for (std::size_t c = 0; c < counts.size(); ++c) r.presented[c] += counts[c];
  }
  return r;
}

std::vector<Tensor> empty_grads(const DetectorParams& params) {
  return std::vector<Tensor>(params.items().size());
}

LossBreakdown& operator+=(LossBreakdown& a, const LossBreakdown& b) {
  a.L_s += b.L_s;
  a.L_u_cls += b.L_u_cls;
  a.L_u_reg += b.L_u_reg;
  a.L_u_obj += b.L_u_obj;
  a.L_u += b.L_u;
  a.L_da += b.L_da;
  a.total += b.total;
  a.lambda_u = b.lambda_u;
  a.lambda_da = b.lambda_da;
  return a;
}

LossBreakdown mean_of(LossBreakdown sum, int steps) {
  const double s = 1.0 / std::max(1, steps);
  sum.L_s *= s;
  sum.L_u_cls *= s;
  sum.L_u_reg *= s;
  sum.L_u_obj *= s;
  sum.L_u *= s;
  sum.L_da *= s;
  sum.total *= s;
  return sum;
}

void append_line(const std::filesystem::path& path, const std::string& line) {
  std::ofstream f(path, std::ios::app);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << line << '\n';
}

void write_outputs_record(const RunHooks& hooks, const nlohmann::json& rec) {
  if (hooks.out_dir.empty()) return;
  append_line(hooks.out_dir / "metrics.jsonl", rec.dump());
}

void write_thresholds(const RunHooks& hooks, const TrainConfig& cfg,
                      const EpochStats& stats, const ThresholdSchedule& th) {
  if (hooks.out_dir.empty()) return;
  const auto path = hooks.out_dir / "thresholds.tsv";
  if (!std::filesystem::exists(path)) {
    append_line(path, "epoch\tclass\ttau1\ttau2\tnum_scores\tn_c\tN_l\tN_u");
  }
  for (std::size_t c = 0; c < th.tau1.size(); ++c) {
    std::ostringstream os;
    os.precision(17);
    os << th.epoch << '\t' << c << '\t' << th.tau1[c] << '\t' << th.tau2[c] << '\t'
       << stats.score_lists[c].size() << '\t' << stats.gt_counts[c] << '\t' << stats.N_l
       << '\t' << stats.N_u;
    append_line(path, os.str());
  }
  if (cfg.dump_scores) {
    const auto dir = hooks.out_dir / "scores";
    std::filesystem::create_directories(dir);
    std::ofstream f(dir / ("epoch_" + std::to_string(stats.k) + ".json"));
    if (!f) throw std::runtime_error("cannot write score dump in " + dir.string());
    f << nlohmann::json(stats).dump();
  }
}

void save_epoch_checkpoint(const RunHooks& hooks, const TrainConfig& cfg,
                           const TrainerState& state) {
  if (hooks.out_dir.empty() || !cfg.save_checkpoints) return;
  const auto dir = hooks.out_dir / "checkpoints";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / ("epoch_" + std::to_string(state.epoch) + ".ckpt"), state, cfg);
  save_checkpoint(dir / "last.ckpt", state, cfg);
}

void log(const RunHooks& hooks, const std::string& msg) {
  if (hooks.log) hooks.log(msg);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << v;
  return os.str();
}

EpochStats fresh_stats(const TrainConfig& cfg, int num_classes, int epoch) {
  return EpochStats::make(num_classes, epoch, cfg.reservoir_cap,
                          derive_seed({cfg.seed, kReservoir}));
}

}  // namespace

const char* phase_name(Phase p) { return p == Phase::kBurnin ? "burnin" : "ssod"; }

void ema_update(DetectorParams& teacher, const DetectorParams& student, double m) {
  if (!teacher.same_structure(student)) {
    throw ShapeError("ema_update: teacher and student differ in structure");
  }
  if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("ema momentum must lie in [0, 1]");
  auto& t = teacher.items();
  const auto& s = student.items();
  for (std::size_t i = 0; i < t.size(); ++i) {
    Tensor& tv = t[i].value;
    const Tensor& sv = s[i].value;
    for (std::size_t k = 0; k < tv.size(); ++k) tv[k] = m * tv[k] + (1.0 - m) * sv[k];
  }
}

// ---------------------------------------------------------------------------
// Batches

BatchSource::BatchSource(const TrainConfig& cfg, const TrainData& data)
    : cfg_(cfg), data_(data) {
  if (data.labeled.empty()) throw ConfigError("no labeled images");
  if (data.labeled.size() != data.labeled_gt.size()) {
    throw ShapeError("labeled images and annotations differ in count");
  }
  if (cfg.batch_labeled != cfg.batch_unlabeled && !cfg.allow_unbalanced_batches) {
    throw ConfigError("batch_labeled != batch_unlabeled; set allow_unbalanced_batches");
  }
  if (cfg.steps_per_epoch > 0) {
    steps_ = cfg.steps_per_epoch;
  } else {
    const std::size_t pool = data.unlabeled.empty() ? data.labeled.size() : data.unlabeled.size();
    const std::size_t b = static_cast<std::size_t>(
        data.unlabeled.empty() ? cfg.batch_labeled : cfg.batch_unlabeled);
    steps_ = static_cast<int>((pool + b - 1) / b);
  }
  steps_ = std::max(1, steps_);
}

LabeledBatch BatchSource::labeled(int epoch, int step) const {
  const std::size_t n = data_.labeled.size();
  const int canvas = cfg_.image_size;
  LabeledBatch lb;
  lb.images.resize(static_cast<std::size_t>(cfg_.batch_labeled));
  lb.gt.resize(lb.images.size());
  parallel_for(cfg_.batch_labeled, [&](int i) {
    const std::size_t slot =
        static_cast<std::size_t>(step) * static_cast<std::size_t>(cfg_.batch_labeled) +
        static_cast<std::size_t>(i);
    const std::uint64_t e = static_cast<std::uint64_t>(epoch);
    const std::uint64_t st = static_cast<std::uint64_t>(step);
    const std::uint64_t ii = static_cast<std::uint64_t>(i);
    std::size_t picks[4];
    picks[0] = shuffled_slot(n, cfg_.seed, epoch, slot, kLabeledOrder);
    Rng partners(derive_seed({cfg_.seed, kMosaicPartners, e, st, ii}));
    for (int k = 1; k < 4; ++k) {
      picks[k] = static_cast<std::size_t>(partners.uniform_int(0, static_cast<int>(n) - 1));
    }
    std::vector<AugmentedSample> four;
    for (std::size_t p : picks) four.push_back(make_sample(data_.labeled[p], data_.labeled_gt[p]));
    AugmentedSample out =
        weak_augment(four, canvas, derive_seed({cfg_.seed, kWeakAug, e, st, ii}), cfg_.aug);
    out.boxes.image_id = static_cast<std::int64_t>(picks[0]);
    lb.images[static_cast<std::size_t>(i)] = std::move(out.image);
    lb.gt[static_cast<std::size_t>(i)] = std::move(out.boxes);
  });
  return lb;
}

UnlabeledBatch BatchSource::unlabeled(int epoch, int step) const {
  UnlabeledBatch ub;
  const std::uint64_t e = static_cast<std::uint64_t>(epoch);
  const std::uint64_t st = static_cast<std::uint64_t>(step);
  ub.seed = derive_seed({cfg_.seed, kStrongSeed, e, st});
  const std::size_t n = data_.unlabeled.size();
  if (n == 0) return ub;
  ub.weak.resize(static_cast<std::size_t>(cfg_.batch_unlabeled));
  parallel_for(cfg_.batch_unlabeled, [&](int i) {
    const std::size_t slot =
        static_cast<std::size_t>(step) * static_cast<std::size_t>(cfg_.batch_unlabeled) +
        static_cast<std::size_t>(i);
    const std::size_t idx = shuffled_slot(n, cfg_.seed, epoch, slot, kUnlabeledOrder);
    AugmentedSample s = weak_flip(
        make_sample(data_.unlabeled[idx], DetectionSet{}),
        derive_seed({cfg_.seed, kWeakFlip, e, st, static_cast<std::uint64_t>(i)}), cfg_.aug);
    ub.weak[static_cast<std::size_t>(i)] = std::move(s.image);
  });
  return ub;
}

// ---------------------------------------------------------------------------
// Steps

StepResult supervised_step(TrainerState& state, const TrainConfig& cfg,
                           const DetectorConfig& dcfg, const LabeledBatch& lb) {
  Graph g;
  TapedForward out;
  SupervisedPass sp = supervised_pass(g, state.student, dcfg, lb, DomainBranch::kOff, out);
  g.backward();
  auto grads = empty_grads(state.student);
  collect_grads(g, state.student, grads);
  sgd_update(state, cfg, grads);
  ++state.step;

  StepResult r;
  r.loss.L_s = sp.loss.value();
  r.loss.lambda_u = 0.0;
  r.loss.lambda_da = 0.0;
  r.loss.total = r.loss.L_s;
  r.presented_gt = std::move(sp.presented);
  return r;
}

StepResult burnin_step(TrainerState& state, const TrainConfig& cfg,
                       const DetectorConfig& dcfg, const LabeledBatch& lb,
                       const UnlabeledBatch& ub) {
  const DomainBranch branch = cfg.domain_branch();
  if (cfg.lambda_da < 0.0) throw ConfigError("loss.lambda_da must be non-negative");
  if (cfg.lambda_da == 0.0 || branch == DomainBranch::kOff || ub.weak.empty()) {
    return supervised_step(state, cfg, dcfg, lb);
  }
  Graph gl;
  TapedForward out_l;
  SupervisedPass sp = supervised_pass(gl, state.student, dcfg, lb, branch, out_l);

  Graph gu;
  Var xu = gu.input(images_to_tensor(ub.weak));
  TapedForward out_u = forward_taped(gu, state.student, dcfg, xu, branch);

  const Tensor& zl = gl.value(out_l.domain_logits);
  const Tensor& zu = gu.value(out_u.domain_logits);
  DomainPrediction dp;
  const Tensor parts[] = {zl, zu};
  dp.logits = Tensor::stack_batch(parts);
  dp.domain.assign(static_cast<std::size_t>(zl.n()), 0);
  dp.domain.resize(static_cast<std::size_t>(zl.n() + zu.n()), 1);
  DomainLoss dl = domain_loss(dp);
  dl.grad.scale_(cfg.lambda_da);
  gl.accumulate_grad(out_l.domain_logits, dl.grad.slice_batch(0, zl.n()));
  gu.accumulate_grad(out_u.domain_logits, dl.grad.slice_batch(zl.n(), zu.n()));

  gl.backward();
  gu.backward();
  auto grads = empty_grads(state.student);
  collect_grads(gl, state.student, grads);
  collect_grads(gu, state.student, grads);
  sgd_update(state, cfg, grads);
  ++state.step;

  StepResult r;
  r.loss.L_s = sp.loss.value();
  r.loss.L_da = dl.value;
  r.loss.lambda_u = 0.0;
  r.loss.lambda_da = cfg.lambda_da;
  r.loss.total = burnin_loss(r.loss.L_s, r.loss.L_da, cfg.lambda_da);
  r.presented_gt = std::move(sp.presented);
  return r;
}

StepResult train_step(TrainerState& state, const TrainConfig& cfg,
                      const DetectorConfig& dcfg, const LabeledBatch& lb,
                      const UnlabeledBatch& ub) {
  if (!state.schedule_sealed) throw StateError("train_step: threshold schedule not sealed");
  if (!state.has_teacher) throw StateError("train_step: no teacher (burn-in not finished)");
  if (state.stats.sealed) throw StateError("train_step: epoch statistics are sealed");
  if (cfg.lambda_u < 0.0) throw ConfigError("loss.lambda_u must be non-negative");
  const int C = dcfg.anchors.num_classes;
  if (state.schedule.num_classes() != C) {
    throw ShapeError("threshold schedule has " + std::to_string(state.schedule.num_classes()) +
                     " classes, detector has " + std::to_string(C));
  }
  const int nu = static_cast<int>(ub.weak.size());
  const int canvas = dcfg.image_size();

  // Teacher pseudo-labels on the weak views.
  std::vector<PseudoLabelList> labels;
  if (nu > 0) {
    labels = generate_pseudo_labels(state.teacher, dcfg, images_to_tensor(ub.weak), cfg.pseudo);
  }
  StepResult r;
  for (const auto& list : labels) {
    record_scores(state.stats, list);
    r.num_pseudo_labels += list.size();
  }

  // Supervised branch.
  Graph gl;
  TapedForward out_l;
  SupervisedPass sp = supervised_pass(gl, state.student, dcfg, lb, DomainBranch::kOff, out_l);
  gl.backward();
  auto grads = empty_grads(state.student);
  collect_grads(gl, state.student, grads);
  update_gt_counts(state.stats, sp.presented);
  add_images(state.stats, static_cast<std::int64_t>(lb.images.size()), nu);
  r.loss.L_s = sp.loss.value();
  r.loss.lambda_u = cfg.lambda_u;
  r.loss.lambda_da = 0.0;

  // Unsupervised branch.
  if (cfg.lambda_u > 0.0 && nu > 0) {
    std::vector<PseudoLabel> table;
    std::vector<AugmentedSample> strong(static_cast<std::size_t>(nu));
    std::vector<int> offsets;
    for (int i = 0; i < nu; ++i) {
      offsets.push_back(static_cast<int>(table.size()));
      for (const auto& pl : labels[static_cast<std::size_t>(i)]) table.push_back(pl);
    }
    parallel_for(nu, [&](int i) {
      const auto& list = labels[static_cast<std::size_t>(i)];
      DetectionSet boxes;
      for (const auto& pl : list) boxes.boxes.push_back(pl.box);
      strong[static_cast<std::size_t>(i)] = strong_augment(
          make_sample(ub.weak[static_cast<std::size_t>(i)], boxes, offsets[static_cast<std::size_t>(i)]),
          derive_seed({ub.seed, kStrongAug, static_cast<std::uint64_t>(i)}), cfg.aug);
    });
    std::vector<AugmentedSample> mixed(static_cast<std::size_t>(nu));
    parallel_for(nu, [&](int i) {
      Rng rng(derive_seed({ub.seed, kMixChoice, static_cast<std::uint64_t>(i)}));
      const double u = rng.uniform();
      auto other = [&] {
        if (nu == 1) return 0;
        int j = rng.uniform_int(0, nu - 2);
        return j >= i ? j + 1 : j;
      };
      const auto& self = strong[static_cast<std::size_t>(i)];
      if (u < cfg.aug.pseudo_mixup_prob) {
        mixed[static_cast<std::size_t>(i)] =
            pseudo_mixup(self, strong[static_cast<std::size_t>(other())], cfg.aug.mixup_ratio);
      } else if (u < cfg.aug.pseudo_mixup_prob + cfg.aug.pseudo_mosaic_prob) {
        std::vector<AugmentedSample> four{self};
        for (int k = 0; k < 3; ++k) four.push_back(strong[static_cast<std::size_t>(other())]);
        mixed[static_cast<std::size_t>(i)] = pseudo_mosaic(four, canvas, rng.engine()(), cfg.aug);
      } else {
        mixed[static_cast<std::size_t>(i)] = self;
      }
    });

    std::vector<Image> student_images;
    std::vector<PseudoLabelList> student_labels;
    for (auto& s : mixed) {
      PseudoLabelList list;
      for (std::size_t b = 0; b < s.boxes.boxes.size(); ++b) {
        PseudoLabel pl = table.at(static_cast<std::size_t>(s.origin.at(b)));
        pl.box = s.boxes.boxes[b];
        pl.box.class_id = table[static_cast<std::size_t>(s.origin[b])].box.class_id;
        pl.box.score = pl.score;
        list.push_back(std::move(pl));
      }
      student_labels.push_back(std::move(list));
      student_images.push_back(std::move(s.image));
    }
    const PseudoTargets pt = assign_pseudo_targets(student_labels, dcfg.anchors, canvas);

    Graph gu;
    Var xu = gu.input(images_to_tensor(student_images));
    TapedForward out_u = forward_taped(gu, state.student, dcfg, xu, DomainBranch::kOff);
    const DensePredictions preds = to_dense_predictions(gu, out_u, dcfg.anchors);
    const UnsupervisedLoss ul = unsupervised_loss(
        preds, pt, state.schedule, dcfg.anchors, UnsupOptions{cfg.obj_gate, cfg.unreliable_branch});
    add_head_grads(gu, out_u, {&ul.cls, &ul.reg, &ul.obj}, cfg.lambda_u);
    gu.backward();
    collect_grads(gu, state.student, grads);
    r.loss.L_u_cls = ul.cls.value;
    r.loss.L_u_reg = ul.reg.value;
    r.loss.L_u_obj = ul.obj.value;
    r.loss.L_u = ul.value();
  }
  r.loss.total = total_loss(r.loss.L_s, r.loss.L_u, cfg.lambda_u);
  r.presented_gt = std::move(sp.presented);

  sgd_update(state, cfg, grads);
  ema_update(state.teacher, state.student, cfg.ema_momentum);
  ++state.step;
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<DetectionSet> detect(const DetectorParams& params, const DetectorConfig& dcfg,
                                 const TrainConfig& cfg, const std::vector<Image>& images) {
  constexpr int kChunk = 16;
  std::vector<DetectionSet> out;
  out.reserve(images.size());
  for (std::size_t begin = 0; begin < images.size(); begin += kChunk) {
    const std::size_t count = std::min<std::size_t>(kChunk, images.size() - begin);
    const Tensor x = images_to_tensor(std::span<const Image>(images.data() + begin, count));
    const ForwardResult fr = forward(params, dcfg, x);
    auto sets = decode_predictions(fr.preds, dcfg.anchors, cfg.eval_conf_threshold);
    for (std::size_t i = 0; i < sets.size(); ++i) {
      DetectionSet kept = nms(sets[i], cfg.eval_nms_iou, 0.0);
      if (kept.boxes.size() > cfg.eval.max_dets_per_image) {
        kept.boxes.resize(cfg.eval.max_dets_per_image);
      }
      kept.image_id = static_cast<std::int64_t>(begin + i);
      out.push_back(std::move(kept));
    }
  }
  return out;
}

EvalResult evaluate_params(const DetectorParams& params, const DetectorConfig& dcfg,
                           const TrainConfig& cfg, const std::vector<Image>& images,
                           const std::vector<DetectionSet>& gt) {
  return evaluate_map(detect(params, dcfg, cfg, images), gt, dcfg.anchors.num_classes,
                      cfg.eval);
}

double domain_classifier_accuracy(const DetectorParams& params, const DetectorConfig& dcfg,
                                  const std::vector<Image>& source,
                                  const std::vector<Image>& target) {
  constexpr std::size_t kChunk = 16;
  std::size_t correct = 0, total = 0;
  auto run = [&](const std::vector<Image>& imgs, int d) {
    for (std::size_t begin = 0; begin < imgs.size(); begin += kChunk) {
      const std::size_t count = std::min(kChunk, imgs.size() - begin);
      Graph g(false);
      Var x = g.input(images_to_tensor(std::span<const Image>(imgs.data() + begin, count)));
      TapedForward out = forward_taped(g, params, dcfg, x, DomainBranch::kPlain);
      DomainPrediction dp;
      dp.logits = g.value(out.domain_logits);
      dp.domain.assign(count, d);
      const double acc = domain_accuracy(dp);
      correct += static_cast<std::size_t>(std::llround(acc * static_cast<double>(dp.logits.size())));
      total += dp.logits.size();
    }
  };
  run(source, 0);
  run(target, 1);
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Runs

TrainerState init_state(const TrainConfig& cfg, const DetectorConfig& dcfg) {
  TrainerState s;
  s.student = make_detector_params(dcfg, derive_seed({cfg.seed, kInit}));
  for (const auto& p : s.student.items()) s.velocity.emplace_back(p.value.shape());
  return s;
}

nlohmann::json metrics_record(int epoch, Phase phase, const LossBreakdown& l,
                              const EvalResult& eval) {
  nlohmann::json rec;
  rec["epoch"] = epoch;
  rec["phase"] = phase_name(phase);
  rec["loss"] = {{"L_s", l.L_s},         {"L_u_cls", l.L_u_cls}, {"L_u_reg", l.L_u_reg},
                 {"L_u_obj", l.L_u_obj}, {"L_u", l.L_u},         {"L_da", l.L_da},
                 {"total", l.total}};
  nlohmann::json ev = eval;
  for (auto it = ev.begin(); it != ev.end(); ++it) rec[it.key()] = it.value();
  return rec;
}

void run_burnin(TrainerState& state, const TrainConfig& cfg, const DetectorConfig& dcfg,
                const TrainData& data, const RunHooks& hooks) {
  if (state.phase != Phase::kBurnin) return;
  const int B = cfg.resolved_burnin_epochs();
  const int C = dcfg.anchors.num_classes;
  BatchSource src(cfg, data);
  const int steps = src.steps_per_epoch();
  while (state.epoch < B) {
    const int e = state.epoch;
    const bool last = e == B - 1;
    if (last) state.stats = fresh_stats(cfg, C, e);
    LossBreakdown sum;
    for (int s = 0; s < steps; ++s) {
      const LabeledBatch lb = src.labeled(e, s);
      StepResult r;
      if (cfg.lambda_da > 0.0 && cfg.domain_branch() != DomainBranch::kOff &&
          !data.unlabeled.empty()) {
        r = burnin_step(state, cfg, dcfg, lb, src.unlabeled(e, s));
      } else {
        r = supervised_step(state, cfg, dcfg, lb);
      }
      if (last) {
        update_gt_counts(state.stats, r.presented_gt);
        add_images(state.stats, static_cast<std::int64_t>(lb.images.size()), 0);
      }
      sum += r.loss;
      if (hooks.on_step) hooks.on_step(state, r);
    }
    const LossBreakdown mean = mean_of(sum, steps);
    ++state.epoch;
    log(hooks, "burn-in epoch " + std::to_string(e) + " L_s=" + fmt(mean.L_s) +
                   " L_da=" + fmt(mean.L_da));
    if (last) {
      state.teacher = state.student;
      state.has_teacher = true;
      for (int s = 0; s < steps && !data.unlabeled.empty(); ++s) {
        const UnlabeledBatch ub = src.unlabeled(e, s);
        const auto labels = generate_pseudo_labels(state.teacher, dcfg,
                                                   images_to_tensor(ub.weak), cfg.pseudo);
        for (const auto& list : labels) record_scores(state.stats, list);
        add_images(state.stats, 0, static_cast<std::int64_t>(ub.weak.size()));
      }
      state.phase = Phase::kSsod;
      const EvalResult ev = evaluate_params(state.teacher, dcfg, cfg, data.val, data.val_gt);
      nlohmann::json rec = metrics_record(e, Phase::kBurnin, mean, ev);
      state.metrics.push_back(rec);
      write_outputs_record(hooks, rec);
      log(hooks, "burn-in done AP50_95=" + fmt(ev.AP50_95) + " AP50=" + fmt(ev.AP50));
    }
    save_epoch_checkpoint(hooks, cfg, state);
    if (hooks.on_epoch_end) hooks.on_epoch_end(state);
  }
}

void run_ssod(TrainerState& state, const TrainConfig& cfg, const DetectorConfig& dcfg,
              const TrainData& data, const RunHooks& hooks) {
  if (state.phase != Phase::kSsod) throw StateError("run_ssod before burn-in finished");
  const int total = cfg.resolved_burnin_epochs() + cfg.epochs;
  const int C = dcfg.anchors.num_classes;
  BatchSource src(cfg, data);
  const int steps = src.steps_per_epoch();
  while (state.epoch < total) {
    const int e = state.epoch;
    seal(state.stats);
    state.schedule =
        compute_thresholds(state.stats, cfg.alpha, cfg.fallback_tau1, cfg.fallback_tau2);
    state.schedule_sealed = true;
    write_thresholds(hooks, cfg, state.stats, state.schedule);
    state.stats = fresh_stats(cfg, C, e);

    LossBreakdown sum;
    std::size_t pseudo = 0;
    for (int s = 0; s < steps; ++s) {
      const StepResult r =
          train_step(state, cfg, dcfg, src.labeled(e, s), src.unlabeled(e, s));
      sum += r.loss;
      pseudo += r.num_pseudo_labels;
      if (hooks.on_step) hooks.on_step(state, r);
    }
    const LossBreakdown mean = mean_of(sum, steps);
    ++state.epoch;
    const EvalResult ev = evaluate_params(state.teacher, dcfg, cfg, data.val, data.val_gt);
    nlohmann::json rec = metrics_record(e, Phase::kSsod, mean, ev);
    rec["pseudo_labels"] = pseudo;
    state.metrics.push_back(rec);
    write_outputs_record(hooks, rec);
    log(hooks, "epoch " + std::to_string(e) + " L_s=" + fmt(mean.L_s) + " L_u=" +
                   fmt(mean.L_u) + " AP50_95=" + fmt(ev.AP50_95) + " AP50=" + fmt(ev.AP50));
    save_epoch_checkpoint(hooks, cfg, state);
    if (hooks.on_epoch_end) hooks.on_epoch_end(state);
  }
}

void run_training(TrainerState& state, const TrainConfig& cfg, const DetectorConfig& dcfg,
                  const TrainData& data, const RunHooks& hooks) {
  run_burnin(state, cfg, dcfg, data, hooks);
  run_ssod(state, cfg, dcfg, data, hooks);
}

TrainData make_train_data(const InMemoryDataset& ds, const SplitManifest& split) {
  TrainData d;
  d.num_classes = ds.meta.num_classes();
  for (std::int64_t id : split.labeled) {
    const std::size_t i = ds.meta.index_of(id);
    d.labeled.push_back(ds.images.at(i));
    d.labeled_gt.push_back(ds.meta.ground_truth(i));
  }
  for (std::int64_t id : split.unlabeled) {
    d.unlabeled.push_back(ds.images.at(ds.meta.index_of(id)));
  }
  for (std::int64_t id : split.validation) {
    const std::size_t i = ds.meta.index_of(id);
    d.val.push_back(ds.images.at(i));
    DetectionSet gt = ds.meta.ground_truth(i);
    gt.image_id = static_cast<std::int64_t>(d.val_gt.size());
    d.val_gt.push_back(std::move(gt));
  }
  return d;
}

TrainData make_adaptation_data(const InMemoryDataset& source, const SplitManifest& source_split,
                               const InMemoryDataset& target, const SplitManifest& target_split) {
  if (source.meta.num_classes() != target.meta.num_classes()) {
    throw ConfigError("source and target datasets differ in class count");
  }
  SplitManifest s = source_split;
  s.unlabeled.clear();
  s.validation.clear();
  TrainData d = make_train_data(source, s);
  SplitManifest t = target_split;
  t.unlabeled.insert(t.unlabeled.end(), t.labeled.begin(), t.labeled.end());
  std::sort(t.unlabeled.begin(), t.unlabeled.end());
  t.labeled.clear();
  TrainData td = make_train_data(target, t);
  d.unlabeled = std::move(td.unlabeled);
  d.val = std::move(td.val);
  d.val_gt = std::move(td.val_gt);
  return d;
}

}  // namespace ssod
