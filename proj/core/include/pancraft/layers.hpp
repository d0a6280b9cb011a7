#pragma once

#include <string>
#include <utility>

#include "pancraft/autograd.hpp"
#include "pancraft/rng.hpp"

namespace pancraft {

/// Which reconstruction the network performs: HRMS (MS) or the replicated
/// PAN back-reconstruction (PAN). Inference always runs in MS mode.
enum class MarsMode { Ms, Pan };

const char* to_string(MarsMode m);

/// Attention flavour inside AttnBlock.
///  - Cm3a:  queries/keys/values conditioned on the down-sampled MS and PAN images.
///  - Local: same two-branch local attention without the conditioning images.
///  - Conv:  the attention layer replaced by a 3x3 convolution.
enum class AttentionKind { Cm3a, Local, Conv };

const char* to_string(AttentionKind k);
AttentionKind parse_attention_kind(const std::string& s);

inline constexpr double kLayerNormEps = 1e-6;

/// Parameter factory shared by all layers of one model.
template <typename T>
struct Init {
  ParamStore<T>& store;
  Rng& rng;

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Param<T>& uniform(const std::string& name, Shape shape, int64_t fan_in);
  Param<T>& constant(const std::string& name, Shape shape, T value);
};

template <typename T>
struct Conv2d {
  Param<T>* weight = nullptr;
  Param<T>* bias = nullptr;
  int stride = 1;
  int pad = 0;

  /// Same-padding convolution (pad = kernel/2). `zero` gives all-zero weights.
  static Conv2d make(Init<T>& init, const std::string& name, int64_t cin, int64_t cout, int kernel, int stride = 1,
                     bool zero = false);
  Var<T> operator()(Tape<T>& tape, const Var<T>& x) const;
};

template <typename T>
struct LayerNorm {
  Param<T>* gamma = nullptr;
  Param<T>* beta = nullptr;

  static LayerNorm make(Init<T>& init, const std::string& name, int64_t channels);
  Var<T> operator()(Tape<T>& tape, const Var<T>& x) const;
};

/// Per-mode channel-wise (gamma, beta); zero-initialized so modulation starts
/// as the identity.
template <typename T>
struct ModulateParams {
  Param<T>* gamma_ms = nullptr;
  Param<T>* beta_ms = nullptr;
  Param<T>* gamma_pan = nullptr;
  Param<T>* beta_pan = nullptr;

  static ModulateParams make(Init<T>& init, const std::string& name, int64_t channels);
  Var<T> operator()(Tape<T>& tape, const Var<T>& x, MarsMode mode) const;
};

/// Per-mode weights of the two attention branches; initialized to 0.5.
template <typename T>
struct SelectParams {
  Param<T>* alpha_ms_1 = nullptr;
  Param<T>* alpha_ms_2 = nullptr;
  Param<T>* alpha_pan_1 = nullptr;
  Param<T>* alpha_pan_2 = nullptr;

  static SelectParams make(Init<T>& init, const std::string& name, int64_t channels);
  Var<T> operator()(Tape<T>& tape, const Var<T>& x_ms, const Var<T>& x_pan, MarsMode mode) const;
};

struct AttnConfig {
  int window = 3;      // odd
  int heads = 4;
  int64_t channels = 128;
  int64_t cond_channels = 8;  // bands of the conditioning images
  AttentionKind kind = AttentionKind::Cm3a;

  void validate() const;
};

/// x <- Conv(SiLU(LN(x)));  x <- x + Conv(SiLU(Modulate(LN(x); mode))).
template <typename T>
class ResBlock {
 public:
  ResBlock(Init<T>& init, const std::string& name, int64_t channels);
  Var<T> operator()(Tape<T>& tape, const Var<T>& x, MarsMode mode) const;

  LayerNorm<T> ln1, ln2;
  Conv2d<T> conv1, conv2;
  ModulateParams<T> mod;
};

/// Cross-modality alignment-aware attention. Returns (x_ms, x_pan): local
/// attention of one shared query against keys/values built from the MS
/// conditioning image and from the PAN conditioning image respectively. The
/// query is built from the MS image in MS mode and from the PAN image in
/// PAN mode.
template <typename T>
class Cm3a {
 public:
  Cm3a(Init<T>& init, const std::string& name, const AttnConfig& cfg);
  std::pair<Var<T>, Var<T>> operator()(Tape<T>& tape, const Var<T>& x, const Var<T>& ms_ds, const Var<T>& pan_ds,
                                       MarsMode mode) const;

  AttnConfig cfg;
  Conv2d<T> query, kv_ms, kv_pan;
  Conv2d<T> replacement;  // AttentionKind::Conv only
};

/// x <- x + Select(CM3A(LN(x))); x <- x + FFN(LN(x)), FFN = 1x1 -> SiLU -> 1x1 (x2 expansion).
template <typename T>
class AttnBlock {
 public:
  static constexpr int kFfnExpansion = 2;

  AttnBlock(Init<T>& init, const std::string& name, const AttnConfig& cfg);
  Var<T> operator()(Tape<T>& tape, const Var<T>& x, const Var<T>& ms_ds, const Var<T>& pan_ds, MarsMode mode) const;

  LayerNorm<T> ln1, ln2;
  Cm3a<T> attn;
  SelectParams<T> select;
  Conv2d<T> ffn1, ffn2;
};

}  // namespace pancraft
