#include "pancraft/layers.hpp"

#include <array>
#include <cmath>

#include "pancraft/attention.hpp"
#include "pancraft/error.hpp"
#include "pancraft/ops.hpp"

namespace pancraft {

const char* to_string(MarsMode m) { return m == MarsMode::Ms ? "MS" : "PAN"; }

const char* to_string(AttentionKind k) {
  switch (k) {
    case AttentionKind::Cm3a: return "cm3a";
    case AttentionKind::Local: return "local";
    case AttentionKind::Conv: return "conv";
  }
  return "?";
}

AttentionKind parse_attention_kind(const std::string& s) {
  if (s == "cm3a") return AttentionKind::Cm3a;
  if (s == "local") return AttentionKind::Local;
  if (s == "conv") return AttentionKind::Conv;
  throw ConfigError("unknown attention kind '" + s + "' (expected cm3a, local or conv)");
}

template <typename T>
Param<T>& Init<T>::uniform(const std::string& name, Shape shape, int64_t fan_in) {
  Tensor<T> t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
  return store.add(name, std::move(t));
}

template <typename T>
Param<T>& Init<T>::constant(const std::string& name, Shape shape, T value) {
  return store.add(name, Tensor<T>(std::move(shape), value));
}

template <typename T>
Conv2d<T> Conv2d<T>::make(Init<T>& init, const std::string& name, int64_t cin, int64_t cout, int kernel, int stride,
                          bool zero) {
  Conv2d c;
  const int64_t fan_in = cin * kernel * kernel;
  if (zero) {
    c.weight = &init.constant(name + ".weight", Shape{cout, cin, kernel, kernel}, T(0));
    c.bias = &init.constant(name + ".bias", Shape{cout}, T(0));
  } else {
    c.weight = &init.uniform(name + ".weight", Shape{cout, cin, kernel, kernel}, fan_in);
    c.bias = &init.uniform(name + ".bias", Shape{cout}, fan_in);
  }
  c.stride = stride;
  c.pad = kernel / 2;
  return c;
}

template <typename T>
Var<T> Conv2d<T>::operator()(Tape<T>& tape, const Var<T>& x) const {
  return conv2d(x, tape.param(*weight), tape.param(*bias), stride, pad);
}

template <typename T>
LayerNorm<T> LayerNorm<T>::make(Init<T>& init, const std::string& name, int64_t channels) {
  return {&init.constant(name + ".gamma", Shape{channels}, T(1)), &init.constant(name + ".beta", Shape{channels}, T(0))};
}

template <typename T>
Var<T> LayerNorm<T>::operator()(Tape<T>& tape, const Var<T>& x) const {
  return layer_norm(x, tape.param(*gamma), tape.param(*beta), static_cast<T>(kLayerNormEps));
}

template <typename T>
ModulateParams<T> ModulateParams<T>::make(Init<T>& init, const std::string& name, int64_t channels) {
  return {&init.constant(name + ".gamma_ms", Shape{channels}, T(0)),
          &init.constant(name + ".beta_ms", Shape{channels}, T(0)),
          &init.constant(name + ".gamma_pan", Shape{channels}, T(0)),
          &init.constant(name + ".beta_pan", Shape{channels}, T(0))};
}

template <typename T>
Var<T> ModulateParams<T>::operator()(Tape<T>& tape, const Var<T>& x, MarsMode mode) const {
  if (mode == MarsMode::Ms) return modulate(x, tape.param(*gamma_ms), tape.param(*beta_ms));
  return modulate(x, tape.param(*gamma_pan), tape.param(*beta_pan));
}

template <typename T>
SelectParams<T> SelectParams<T>::make(Init<T>& init, const std::string& name, int64_t channels) {
  return {&init.constant(name + ".alpha_ms_1", Shape{channels}, T(0.5)),
          &init.constant(name + ".alpha_ms_2", Shape{channels}, T(0.5)),
          &init.constant(name + ".alpha_pan_1", Shape{channels}, T(0.5)),
          &init.constant(name + ".alpha_pan_2", Shape{channels}, T(0.5))};
}

template <typename T>
Var<T> SelectParams<T>::operator()(Tape<T>& tape, const Var<T>& x_ms, const Var<T>& x_pan, MarsMode mode) const {
  Param<T>& a1 = mode == MarsMode::Ms ? *alpha_ms_1 : *alpha_pan_1;
  Param<T>& a2 = mode == MarsMode::Ms ? *alpha_ms_2 : *alpha_pan_2;
  return add(channel_scale(x_ms, tape.param(a1)), channel_scale(x_pan, tape.param(a2)));
}

void AttnConfig::validate() const {
  if (window < 1 || window % 2 == 0) throw ConfigError("attention window must be odd and >= 1");
  if (heads < 1 || channels % heads != 0) throw ConfigError("channels must be divisible by heads");
  if (cond_channels < 1) throw ConfigError("conditioning images need at least one band");
}

template <typename T>
ResBlock<T>::ResBlock(Init<T>& init, const std::string& name, int64_t channels)
    : ln1(LayerNorm<T>::make(init, name + ".ln1", channels)),
      ln2(LayerNorm<T>::make(init, name + ".ln2", channels)),
      conv1(Conv2d<T>::make(init, name + ".conv1", channels, channels, 3)),
      conv2(Conv2d<T>::make(init, name + ".conv2", channels, channels, 3)),
      mod(ModulateParams<T>::make(init, name + ".mod", channels)) {}

template <typename T>
Var<T> ResBlock<T>::operator()(Tape<T>& tape, const Var<T>& x, MarsMode mode) const {
  Var<T> h = conv1(tape, silu(ln1(tape, x)));
  return add(h, conv2(tape, silu(mod(tape, ln2(tape, h), mode))));
}

template <typename T>
Cm3a<T>::Cm3a(Init<T>& init, const std::string& name, const AttnConfig& c) : cfg(c) {
  cfg.validate();
  const int64_t C = cfg.channels;
  if (cfg.kind == AttentionKind::Conv) {
    replacement = Conv2d<T>::make(init, name + ".conv", C, C, 3);
    return;
  }
  const int64_t cin = cfg.kind == AttentionKind::Cm3a ? C + cfg.cond_channels : C;
  query = Conv2d<T>::make(init, name + ".q", cin, C, 1);
  kv_ms = Conv2d<T>::make(init, name + ".kv_ms", cin, 2 * C, 1);
  kv_pan = Conv2d<T>::make(init, name + ".kv_pan", cin, 2 * C, 1);
}

template <typename T>
std::pair<Var<T>, Var<T>> Cm3a<T>::operator()(Tape<T>& tape, const Var<T>& x, const Var<T>& ms_ds,
                                              const Var<T>& pan_ds, MarsMode mode) const {
  if (cfg.kind == AttentionKind::Conv) {
    Var<T> y = replacement(tape, x);
    return {y, y};
  }
  Var<T> ms_in = x, pan_in = x;
  if (cfg.kind == AttentionKind::Cm3a) {
    for (const Var<T>* img : {&ms_ds, &pan_ds}) {
      if (img->shape().rank() != 4 || img->dim(0) != x.dim(0) || img->dim(2) != x.dim(2) ||
          img->dim(3) != x.dim(3) || img->dim(1) != cfg.cond_channels) {
        throw ShapeError("cm3a: conditioning image " + img->shape().str() + " does not match feature " +
                         x.shape().str());
      }
    }
    const std::array<Var<T>, 2> ms_parts{ms_ds, x};
    const std::array<Var<T>, 2> pan_parts{pan_ds, x};
    ms_in = concat_channels<T>(ms_parts);
    pan_in = concat_channels<T>(pan_parts);
  }
  const int64_t C = cfg.channels;
  Var<T> q = query(tape, mode == MarsMode::Ms ? ms_in : pan_in);
  Var<T> kvm = kv_ms(tape, ms_in);
  Var<T> kvp = kv_pan(tape, pan_in);
  Var<T> x_ms = local_attn(q, slice_channels(kvm, 0, C), slice_channels(kvm, C, C), cfg.window, cfg.heads);
  Var<T> x_pan = local_attn(q, slice_channels(kvp, 0, C), slice_channels(kvp, C, C), cfg.window, cfg.heads);
  return {x_ms, x_pan};
}

template <typename T>
AttnBlock<T>::AttnBlock(Init<T>& init, const std::string& name, const AttnConfig& cfg)
    : ln1(LayerNorm<T>::make(init, name + ".ln1", cfg.channels)),
      ln2(LayerNorm<T>::make(init, name + ".ln2", cfg.channels)),
      attn(init, name + ".attn", cfg),
      select(SelectParams<T>::make(init, name + ".select", cfg.channels)),
      ffn1(Conv2d<T>::make(init, name + ".ffn1", cfg.channels, kFfnExpansion * cfg.channels, 1)),
      ffn2(Conv2d<T>::make(init, name + ".ffn2", kFfnExpansion * cfg.channels, cfg.channels, 1)) {}

template <typename T>
Var<T> AttnBlock<T>::operator()(Tape<T>& tape, const Var<T>& x, const Var<T>& ms_ds, const Var<T>& pan_ds,
                                MarsMode mode) const {
  auto [x_ms, x_pan] = attn(tape, ln1(tape, x), ms_ds, pan_ds, mode);
  Var<T> y = add(x, select(tape, x_ms, x_pan, mode));
  return add(y, ffn2(tape, silu(ffn1(tape, ln2(tape, y)))));
}

template struct Init<float>;
template struct Init<double>;
template struct Conv2d<float>;
template struct Conv2d<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct ModulateParams<float>;
template struct ModulateParams<double>;
template struct SelectParams<float>;
template struct SelectParams<double>;
template class ResBlock<float>;
template class ResBlock<double>;
template class Cm3a<float>;
template class Cm3a<double>;
template class AttnBlock<float>;
template class AttnBlock<double>;

}  // namespace pancraft
