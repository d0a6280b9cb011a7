#include "pancraft/model.hpp"

#include <array>
#include <json.hpp>

#include "pancraft/error.hpp"
#include "pancraft/kernels.hpp"
#include "pancraft/ops.hpp"

namespace pancraft {

using nlohmann::json;

ModelConfig ModelConfig::paper(int64_t ms_bands) {
  ModelConfig c;
  c.channels = 128;
  c.ms_bands = ms_bands;
  c.heads = 4;
  c.levels = {{1, 2, false}, {2, 2, true}, {4, 2, true}, {8, 2, true}};
  return c;
}

ModelConfig ModelConfig::desk(int64_t ms_bands) {
  ModelConfig c;
  c.channels = 16;
  c.ms_bands = ms_bands;
  c.heads = 2;
  c.levels = {{1, 1, false}, {2, 1, true}};
  return c;
}

ModelConfig ModelConfig::toy(int64_t ms_bands) {
  ModelConfig c;
  c.channels = 8;
  c.ms_bands = ms_bands;
  c.heads = 2;
  c.levels = {{1, 1, false}, {2, 1, true}};
  return c;
}

void ModelConfig::validate() const {
  if (channels < 1) throw ConfigError("channels must be >= 1");
  if (ms_bands < 1) throw ConfigError("ms_bands must be >= 1");
  if (window < 1 || window % 2 == 0) throw ConfigError("window must be odd and >= 1");
  if (heads < 1 || channels % heads != 0) throw ConfigError("channels must be divisible by heads");
  if (levels.empty()) throw ConfigError("at least one level is required");
  if (levels[0].attn) throw ConfigError("the full-resolution level cannot use attention");
  for (size_t i = 0; i < levels.size(); ++i) {
    if (levels[i].downscale != (1 << i)) throw ConfigError("level scales must be successive halvings (1, 2, 4, ...)");
    if (levels[i].blocks < 1) throw ConfigError("every level needs at least one block");
  }
}

int64_t ModelConfig::size_multiple() const { return int64_t{1} << (levels.size() - 1); }

std::string ModelConfig::to_json() const {
  json levels_json = json::array();
  for (const auto& l : levels) levels_json.push_back({{"downscale", l.downscale}, {"blocks", l.blocks}, {"attn", l.attn}});
  json j = {{"channels", channels}, {"ms_bands", ms_bands}, {"window", window}, {"heads", heads},
            {"levels", levels_json}, {"seed", seed},       {"attention", to_string(attention)}};
  return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text, const ModelConfig& defaults) {
  ModelConfig c = defaults;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "channels") c.channels = v.get<int64_t>();
      else if (key == "ms_bands") c.ms_bands = v.get<int64_t>();
      else if (key == "window") c.window = v.get<int>();
      else if (key == "heads") c.heads = v.get<int>();
      else if (key == "seed") c.seed = v.get<uint64_t>();
      else if (key == "attention") c.attention = parse_attention_kind(v.get<std::string>());
      else if (key == "levels") {
        c.levels.clear();
        for (const auto& lj : v) {
          LevelSpec l;
          for (const auto& [lk, lv] : lj.items()) {
            if (lk == "downscale") l.downscale = lv.get<int>();
            else if (lk == "blocks") l.blocks = lv.get<int>();
            else if (lk == "attn") l.attn = lv.get<bool>();
            else throw ConfigError("unknown level key '" + lk + "'");
          }
          c.levels.push_back(l);
        }
      } else {
        throw ConfigError("unknown model config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename T>
ModelInputs<T> ModelInputs<T>::build(const Tensor<T>& pan, const Tensor<T>& ms) {
  if (pan.rank() != 4 || pan.dim(1) != 1) throw ShapeError("model inputs: pan must be [B,1,4H,4W], got " + pan.shape().str());
  if (ms.rank() != 4 || ms.dim(0) != pan.dim(0) || 4 * ms.dim(2) != pan.dim(2) || 4 * ms.dim(3) != pan.dim(3)) {
    throw ShapeError("model inputs: ms " + ms.shape().str() + " is not the x1/4 counterpart of pan " + pan.shape().str());
  }
  const int64_t bands = ms.dim(1);
  ModelInputs in;
  in.pan = pan;
  in.ms_lr = upsample4(ms);
  in.pan_rep = replicate_channels(pan, bands);
  in.pan_lr_rep = replicate_channels(upsample4(avg_pool(pan, 4)), bands);
  return in;
}

template <typename T>
PanCrafter<T>::PanCrafter(const ModelConfig& cfg) : cfg_(cfg), store_(std::make_unique<ParamStore<T>>()) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  Init<T> init{*store_, rng};
  const int64_t C = cfg_.channels;
  const AttnConfig acfg{cfg_.window, cfg_.heads, C, cfg_.ms_bands, cfg_.attention};

  auto make_stage = [&](const std::string& prefix, const LevelSpec& spec) {
    Stage s;
    for (int i = 0; i < spec.blocks; ++i) {
      if (spec.attn) {
        s.emplace_back(std::in_place_type<ResBlock<T>>, init, prefix + "." + std::to_string(2 * i) + ".res", C);
        s.emplace_back(std::in_place_type<AttnBlock<T>>, init, prefix + "." + std::to_string(2 * i + 1) + ".attn", acfg);
      } else {
        s.emplace_back(std::in_place_type<ResBlock<T>>, init, prefix + "." + std::to_string(i) + ".res", C);
      }
    }
    return s;
  };

  const auto L = cfg_.levels.size();
  embed_ = Conv2d<T>::make(init, "embed", 1 + cfg_.ms_bands, C, 3);
  for (size_t l = 0; l < L; ++l) {
    if (l > 0) down_.push_back(Conv2d<T>::make(init, "down." + std::to_string(l), C, C, 3, 2));
    encoder_.push_back(make_stage("enc." + std::to_string(l), cfg_.levels[l]));
  }
  mid_ = make_stage("mid", LevelSpec{cfg_.levels.back().downscale, 1, cfg_.levels.back().attn});
  for (size_t i = 0; i + 1 < L; ++i) {
    const size_t l = L - 2 - i;
    up_.push_back(Conv2d<T>::make(init, "up." + std::to_string(l), C, C, 3));
    fuse_.push_back(Conv2d<T>::make(init, "fuse." + std::to_string(l), 2 * C, C, 1));
    decoder_.push_back(make_stage("dec." + std::to_string(l), cfg_.levels[l]));
  }
  head_norm_ = LayerNorm<T>::make(init, "head.norm", C);
  head_ = Conv2d<T>::make(init, "head.conv", C, cfg_.ms_bands, 3, 1, /*zero=*/true);
}

template <typename T>
Var<T> PanCrafter<T>::run_stage(Tape<T>& tape, const Stage& stage, Var<T> x, const Var<T>& ms_ds,
                                const Var<T>& pan_ds, MarsMode mode) const {
  for (const Block& b : stage) {
    if (const auto* rb = std::get_if<ResBlock<T>>(&b)) x = (*rb)(tape, x, mode);
    else x = std::get<AttnBlock<T>>(b)(tape, x, ms_ds, pan_ds, mode);
  }
  return x;
}

template <typename T>
Var<T> PanCrafter<T>::forward(Tape<T>& tape, const ModelInputs<T>& in, MarsMode mode) const {
  const Shape& ps = in.pan.shape();
  if (ps.rank() != 4 || ps[1] != 1) throw ShapeError("forward: pan must be [B,1,H,W], got " + ps.str());
  const Shape expect{ps[0], cfg_.ms_bands, ps[2], ps[3]};
  for (const Tensor<T>* t : {&in.ms_lr, &in.pan_rep, &in.pan_lr_rep}) require_same_shape(t->shape(), expect, "forward");
  const int64_t m = cfg_.size_multiple();
  if (ps[2] % m != 0 || ps[3] % m != 0) {
    throw ShapeError("forward: spatial extents " + ps.str() + " must be divisible by " + std::to_string(m));
  }

  const auto L = cfg_.levels.size();
  // Conditioning images per level, pooled once.
  std::vector<Var<T>> ms_ds(L), pan_ds(L);
  for (size_t l = 0; l < L; ++l) {
    if (!cfg_.levels[l].attn || cfg_.attention != AttentionKind::Cm3a) continue;
    const int f = cfg_.levels[l].downscale;
    ms_ds[l] = tape.constant(f == 1 ? in.ms_lr : avg_pool(in.ms_lr, f));
    pan_ds[l] = tape.constant(f == 1 ? in.pan_rep : avg_pool(in.pan_rep, f));
  }

  const std::array<Var<T>, 2> stem{tape.constant(in.pan), tape.constant(in.ms_lr)};
  Var<T> h = embed_(tape, concat_channels<T>(stem));
  std::vector<Var<T>> skips;
  for (size_t l = 0; l < L; ++l) {
    if (l > 0) h = down_[l - 1](tape, h);
    h = run_stage(tape, encoder_[l], h, ms_ds[l], pan_ds[l], mode);
    skips.push_back(h);
  }
  h = run_stage(tape, mid_, h, ms_ds[L - 1], pan_ds[L - 1], mode);
  for (size_t i = 0; i + 1 < L; ++i) {
    const size_t l = L - 2 - i;
    h = up_[i](tape, upsample_nearest2(h));
    const std::array<Var<T>, 2> parts{h, skips[l]};
    h = fuse_[i](tape, concat_channels<T>(parts));
    h = run_stage(tape, decoder_[i], h, ms_ds[l], pan_ds[l], mode);
  }
  Var<T> residual = head_(tape, silu(head_norm_(tape, h)));
  return add(residual, tape.constant(mode == MarsMode::Ms ? in.ms_lr : in.pan_lr_rep));
}

template <typename T>
Tensor<T> PanCrafter<T>::infer(const Tensor<T>& pan, const Tensor<T>& ms) const {
  const bool single = pan.rank() == 3;
  const Tensor<T> pb = single ? pan.reshaped(Shape{1, pan.dim(0), pan.dim(1), pan.dim(2)}) : pan;
  const Tensor<T> mb = ms.rank() == 3 ? ms.reshaped(Shape{1, ms.dim(0), ms.dim(1), ms.dim(2)}) : ms;
  if (mb.dim(1) != cfg_.ms_bands) {
    throw ShapeError("infer: model expects " + std::to_string(cfg_.ms_bands) + " bands, got " + ms.shape().str());
  }
  Tape<T> tape(/*recording=*/false);
  Tensor<T> out = clamp(forward(tape, ModelInputs<T>::build(pb, mb), MarsMode::Ms).value(), T(0), T(1));
  if (single) out = out.reshaped(Shape{out.dim(1), out.dim(2), out.dim(3)});
  return out;
}

template <typename T>
Archive PanCrafter<T>::to_archive() const {
  Archive a;
  a.put_text("manifest.json", cfg_.to_json());
  for (const auto& p : *store_) a.put_tensor("param/" + p->name, p->value.template cast<float>());
  return a;
}

template <typename T>
PanCrafter<T> PanCrafter<T>::from_archive(const Archive& archive) {
  PanCrafter m(ModelConfig::from_json(archive.get_text("manifest.json")));
  m.load_params(archive);
  return m;
}

template <typename T>
void PanCrafter<T>::load_params(const Archive& archive) {
  for (auto& p : *store_) {
    const std::string key = "param/" + p->name;
    if (!archive.contains(key)) throw DataError("checkpoint is missing parameter '" + p->name + "'");
    Tensor<T> v = archive.get_tensor<T>(key);
    if (!(v.shape() == p->value.shape())) {
      throw DataError("checkpoint parameter '" + p->name + "' has shape " + v.shape().str() + ", expected " +
                      p->value.shape().str());
    }
    p->value = std::move(v);
  }
}

template struct ModelInputs<float>;
template struct ModelInputs<double>;
template class PanCrafter<float>;
template class PanCrafter<double>;

}  // namespace pancraft
