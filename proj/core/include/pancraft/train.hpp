#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pancraft/autograd.hpp"
#include "pancraft/data.hpp"
#include "pancraft/metrics.hpp"
#include "pancraft/model.hpp"

namespace pancraft {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 0.01;
  int iters = 2000;
  int warmup = 100;
  int batch = 4;
  double lambda = 1.0;
  uint64_t seed = 2025;
  /// Dual-mode (MS + PAN) training; off trains in MS mode only.
  bool mars = true;
  /// PAN-only pretraining for `pretrain_fraction` of the iterations, then
  /// MS-only finetuning.
  bool two_stage = false;
  double pretrain_fraction = 0.5;
  bool augment = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Checkpoint period in iterations; 0 writes only the final checkpoint.
  int checkpoint_every = 0;

  /// 2,000 iterations at batch 4.
  static TrainConfig desk();
  /// 50,000 iterations at batch 48.
  static TrainConfig paper();

  /// Throws ConfigError.
  void validate() const;
  std::string to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const std::string& text, const TrainConfig& defaults = desk());

  bool operator==(const TrainConfig&) const = default;
};

struct StepRecord {
  int iter = 0;
  double loss_ms = 0.0;
  double loss_pan = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;

  std::string to_json() const;
};

/// Learning rate at 1-based step s: linear warmup to the peak over `warmup`
/// steps, then cosine annealing reaching 0 at step `iters`.
double lr_at(const TrainConfig& cfg, int step);

/// mean|pred_ms - gt_ms| + lambda * mean|pred_pan - gt_pan|.
template <typename T>
Var<T> mars_loss(const Var<T>& pred_ms, const Tensor<T>& gt_ms, const Var<T>& pred_pan, const Tensor<T>& gt_pan,
                 T lambda);

/// Plain-tensor evaluation of the same loss.
template <typename T>
double mars_loss_value(const Tensor<T>& pred_ms, const Tensor<T>& gt_ms, const Tensor<T>& pred_pan,
                       const Tensor<T>& gt_pan, double lambda);

/// True for the modulation/selection parameters used only in `mode`
/// (gamma_<mode>, beta_<mode>, alpha_<mode>_1/2).
bool is_mode_param(const std::string& name, MarsMode mode);

/// Sum of |grad| over the parameters used only in `mode`.
template <typename T>
double mode_grad_abs_sum(const ParamStore<T>& store, MarsMode mode);

/// AdamW with bias correction and decoupled weight decay applied as
/// p *= 1 - lr * weight_decay before the Adam update.
template <typename T>
class AdamW {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW(ParamStore<T>& store, Options options);
  void step(double lr);
  int64_t steps() const { return t_; }

  /// Moments under "adam/m/<name>" and "adam/v/<name>" (f32) plus the step count.
  void save(Archive& archive) const;
  void load(const Archive& archive);

 private:
  ParamStore<T>* store_;
  Options opt_;
  int64_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

/// Mode(s) trained at a given 1-based step.
struct StepModes {
  bool ms = true;
  bool pan = true;
};
StepModes modes_at(const TrainConfig& cfg, int step);

/// Dual-mode training loop over a fixed pool of triplets. Batch composition
/// and augmentation are pure functions of (seed, step), so resumed runs
/// follow the same sequence.
class Trainer {
 public:
  Trainer(PanCrafter<float>& model, TrainConfig cfg, std::vector<Triplet> data);

  /// Runs the next iteration. Throws NumericError on a non-finite loss after
  /// writing the offending batch to `dump_dir` (when set).
  StepRecord step();
  int iteration() const { return iter_; }
  bool done() const { return iter_ >= cfg_.iters; }

  /// Runs to cfg.iters, calling `on_step` after every iteration.
  void run(const std::function<void(const StepRecord&)>& on_step = {});

  /// Model archive plus optimizer state and "train/state.json".
  Archive checkpoint() const;
  void resume(const Archive& archive);

  /// Largest tape footprint seen so far, in bytes.
  size_t peak_tape_bytes() const { return peak_tape_bytes_; }
  const TrainConfig& config() const { return cfg_; }
  PanCrafter<float>& model() { return *model_; }

  std::filesystem::path dump_dir;

 private:
  std::vector<size_t> batch_indices(int step) const;
  Batch next_batch(int step) const;

  PanCrafter<float>* model_;
  TrainConfig cfg_;
  std::vector<Triplet> data_;
  AdamW<float> opt_;
  int iter_ = 0;
  size_t peak_tape_bytes_ = 0;
};

/// Runs the model over triplets (MS mode) and scores each one: reduced
/// metrics against ms_hr when present, plus the full-resolution metrics.
std::vector<MetricReport> evaluate(const PanCrafter<float>& model, const std::vector<Triplet>& data);

struct AblationCell {
  bool mars = true;
  bool cm3a = true;
};

struct AblationSpec {
  ModelConfig model;
  TrainConfig train;
  std::vector<AblationCell> cells = {{true, true}, {true, false}, {false, true}, {false, false}};
  std::vector<uint64_t> seeds = {2025};
  /// Attention used when CM3A is off.
  AttentionKind cm3a_off = AttentionKind::Local;
  std::vector<Triplet> train_data;
  std::vector<Triplet> eval_data;
};

struct AblationRow {
  AblationCell cell;
  uint64_t seed = 0;
  MetricSummary metrics;
  double time_s = 0.0;
  double memory_mb = 0.0;
  /// Sum of |grad| over PAN-mode-only parameters after the last step.
  double pan_grad_abs = 0.0;
  double final_loss_ms = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;

  /// Columns: mars, cm3a, seed, HQNR, D_lambda, D_s, ERGAS, SAM, PSNR, SSIM,
  /// Q2n, SCC, time_s, memory_mb, pan_grad_abs.
  std::string csv() const;
  std::string table() const;
};

AblationReport run_ablation(const AblationSpec& spec,
                            const std::function<void(const AblationRow&)>& on_row = {});

}  // namespace pancraft
