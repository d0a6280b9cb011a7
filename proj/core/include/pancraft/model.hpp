#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "pancraft/io.hpp"
#include "pancraft/layers.hpp"

namespace pancraft {

/// One resolution level of the U-Net. `downscale` is relative to the input
/// (1, 2, 4, ...). A level with attention runs (ResBlock, AttnBlock) x blocks,
/// otherwise `blocks` ResBlocks.
struct LevelSpec {
  int downscale = 1;
  int blocks = 2;
  bool attn = false;

  bool operator==(const LevelSpec&) const = default;
};

struct ModelConfig {
  int64_t channels = 128;
  int64_t ms_bands = 8;
  int window = 3;
  int heads = 4;
  std::vector<LevelSpec> levels;
  uint64_t seed = 2025;
  AttentionKind attention = AttentionKind::Cm3a;

  /// C=128, four levels at scales 1, 1/2, 1/4, 1/8; the top level has two
  /// ResBlocks, the others two (ResBlock, AttnBlock) pairs.
  static ModelConfig paper(int64_t ms_bands = 8);
  /// Desk-scale default: C=16, two levels.
  static ModelConfig desk(int64_t ms_bands = 4);
  /// Smallest configuration exercising every layer: C=8, two levels.
  static ModelConfig toy(int64_t ms_bands = 4);

  /// Throws ConfigError on an invalid layout.
  void validate() const;
  /// Spatial extents must be divisible by this.
  int64_t size_multiple() const;

  std::string to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static ModelConfig from_json(const std::string& text, const ModelConfig& defaults = ModelConfig::paper());

  bool operator==(const ModelConfig&) const = default;
};

/// Network inputs at PAN resolution, batched as [B, C, 4H, 4W].
template <typename T>
struct ModelInputs {
  Tensor<T> pan;         // [B,1,4H,4W]
  Tensor<T> ms_lr;       // MS up-sampled x4 (bicubic)
  Tensor<T> pan_rep;     // pan replicated over the MS bands
  Tensor<T> pan_lr_rep;  // replicate(up4(down4(pan))), residual base in PAN mode

  /// pan: [B,1,4H,4W]; ms: raw low-resolution [B,C_ms,H,W].
  static ModelInputs build(const Tensor<T>& pan, const Tensor<T>& ms);
  int64_t batch() const { return pan.dim(0); }
};

template <typename T>
class PanCrafter {
 public:
  explicit PanCrafter(const ModelConfig& cfg);
  PanCrafter(const PanCrafter&) = delete;
  PanCrafter& operator=(const PanCrafter&) = delete;
  PanCrafter(PanCrafter&&) noexcept = default;
  PanCrafter& operator=(PanCrafter&&) noexcept = default;

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return *store_; }
  const ParamStore<T>& params() const { return *store_; }
  int64_t parameter_count() const { return store_->element_count(); }

  /// Network output plus the mode's residual base (ms_lr in MS mode,
  /// pan_lr_rep in PAN mode).
  Var<T> forward(Tape<T>& tape, const ModelInputs<T>& in, MarsMode mode) const;

  /// MS-mode prediction from raw inputs, clamped to [0,1].
  /// pan: [B,1,4H,4W] or [1,4H,4W]; ms: [B,C,H,W] or [C,H,W]. Unbatched
  /// inputs give an unbatched [C,4H,4W] result.
  Tensor<T> infer(const Tensor<T>& pan, const Tensor<T>& ms) const;

  /// manifest.json (config) plus every parameter as f32 PCT1 under "param/<name>".
  Archive to_archive() const;
  static PanCrafter from_archive(const Archive& archive);
  /// Overwrites parameters from an archive; names and shapes must match.
  void load_params(const Archive& archive);

 private:
  using Block = std::variant<ResBlock<T>, AttnBlock<T>>;
  using Stage = std::vector<Block>;

  Var<T> run_stage(Tape<T>& tape, const Stage& stage, Var<T> x, const Var<T>& ms_ds, const Var<T>& pan_ds,
                   MarsMode mode) const;

  ModelConfig cfg_;
  std::unique_ptr<ParamStore<T>> store_;
  Conv2d<T> embed_;
  std::vector<Stage> encoder_;
  std::vector<Conv2d<T>> down_;
  Stage mid_;
  std::vector<Conv2d<T>> up_;
  std::vector<Conv2d<T>> fuse_;
  std::vector<Stage> decoder_;
  LayerNorm<T> head_norm_;
  Conv2d<T> head_;
};

extern template class PanCrafter<float>;
extern template class PanCrafter<double>;

}  // namespace pancraft
