#include "pancraft/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>

#include "pancraft/error.hpp"
#include "pancraft/kernels.hpp"
#include "pancraft/ops.hpp"
#include "pancraft/rng.hpp"

namespace pancraft {

using nlohmann::json;

namespace {

constexpr uint64_t kAugmentSalt = 0xA5A5A5A5ULL;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.iters = 50000;
  c.batch = 48;
  return c;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
  if (!(lr >= 0.0)) fail("lr must be >= 0");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (iters < 1) fail("iters must be >= 1");
  if (warmup < 0 || warmup > iters) fail("warmup must lie in [0, iters]");
  if (batch < 1) fail("batch must be >= 1");
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if (!(pretrain_fraction >= 0.0 && pretrain_fraction <= 1.0)) fail("pretrain_fraction must lie in [0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must lie in [0, 1)");
  if (!(eps > 0.0)) fail("eps must be > 0");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
}

std::string TrainConfig::to_json() const {
  json j = {{"lr", lr},
            {"weight_decay", weight_decay},
            {"iters", iters},
            {"warmup", warmup},
            {"batch", batch},
            {"lambda", lambda},
            {"seed", seed},
            {"mars", mars},
            {"two_stage", two_stage},
            {"pretrain_fraction", pretrain_fraction},
            {"augment", augment},
            {"beta1", beta1},
            {"beta2", beta2},
            {"eps", eps},
            {"checkpoint_every", checkpoint_every}};
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text, const TrainConfig& defaults) {
  TrainConfig c = defaults;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "lr") c.lr = v.get<double>();
      else if (key == "weight_decay") c.weight_decay = v.get<double>();
      else if (key == "iters") c.iters = v.get<int>();
      else if (key == "warmup") c.warmup = v.get<int>();
      else if (key == "batch") c.batch = v.get<int>();
      else if (key == "lambda") c.lambda = v.get<double>();
      else if (key == "seed") c.seed = v.get<uint64_t>();
      else if (key == "mars") c.mars = v.get<bool>();
      else if (key == "two_stage") c.two_stage = v.get<bool>();
      else if (key == "pretrain_fraction") c.pretrain_fraction = v.get<double>();
      else if (key == "augment") c.augment = v.get<bool>();
      else if (key == "beta1") c.beta1 = v.get<double>();
      else if (key == "beta2") c.beta2 = v.get<double>();
      else if (key == "eps") c.eps = v.get<double>();
      else if (key == "checkpoint_every") c.checkpoint_every = v.get<int>();
      else throw ConfigError("unknown train config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string StepRecord::to_json() const {
  json j = {{"iter", iter}, {"loss_ms", loss_ms}, {"loss_pan", loss_pan}, {"lr", lr}, {"wall_ms", wall_ms}};
  return j.dump();
}

double lr_at(const TrainConfig& cfg, int step) {
  const int s = std::clamp(step, 1, cfg.iters);
  if (s <= cfg.warmup) return cfg.lr * static_cast<double>(s) / static_cast<double>(cfg.warmup);
  const int span = cfg.iters - cfg.warmup;
  if (span <= 0) return cfg.lr;
  const double progress = static_cast<double>(s - cfg.warmup) / static_cast<double>(span);
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
Var<T> mars_loss(const Var<T>& pred_ms, const Tensor<T>& gt_ms, const Var<T>& pred_pan, const Tensor<T>& gt_pan,
                 T lambda) {
  return add(l1_loss(pred_ms, gt_ms), scale(l1_loss(pred_pan, gt_pan), lambda));
}

template <typename T>
double mars_loss_value(const Tensor<T>& pred_ms, const Tensor<T>& gt_ms, const Tensor<T>& pred_pan,
                       const Tensor<T>& gt_pan, double lambda) {
  require_same_shape(pred_ms.shape(), gt_ms.shape(), "mars_loss");
  require_same_shape(pred_pan.shape(), gt_pan.shape(), "mars_loss");
  auto l1 = [](const Tensor<T>& a, const Tensor<T>& b) {
    double acc = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) acc += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    return acc / static_cast<double>(a.numel());
  };
  return l1(pred_ms, gt_ms) + lambda * l1(pred_pan, gt_pan);
}

bool is_mode_param(const std::string& name, MarsMode mode) {
  const std::string tag = mode == MarsMode::Ms ? "ms" : "pan";
  return ends_with(name, ".gamma_" + tag) || ends_with(name, ".beta_" + tag) || ends_with(name, ".alpha_" + tag + "_1") ||
         ends_with(name, ".alpha_" + tag + "_2");
}

template <typename T>
double mode_grad_abs_sum(const ParamStore<T>& store, MarsMode mode) {
  double acc = 0.0;
  for (const auto& p : store) {
    if (!is_mode_param(p->name, mode)) continue;
    for (T g : p->grad.storage()) acc += std::abs(static_cast<double>(g));
  }
  return acc;
}

template <typename T>
AdamW<T>::AdamW(ParamStore<T>& store, Options options) : store_(&store), opt_(options) {
  for (const auto& p : store) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

template <typename T>
void AdamW<T>::step(double lr) {
  ++t_;
  const double b1 = opt_.beta1, b2 = opt_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const T decay = static_cast<T>(1.0 - lr * opt_.weight_decay);
  size_t i = 0;
  for (auto& p : *store_) {
    T* w = p->value.data();
    const T* g = p->grad.data();
    T* m = m_[i].data();
    T* v = v_[i].data();
    for (int64_t k = 0; k < p->value.numel(); ++k) {
      w[k] *= decay;
      const double gk = static_cast<double>(g[k]);
      const double mk = b1 * static_cast<double>(m[k]) + (1.0 - b1) * gk;
      const double vk = b2 * static_cast<double>(v[k]) + (1.0 - b2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      w[k] = static_cast<T>(static_cast<double>(w[k]) - lr * (mk / c1) / (std::sqrt(vk / c2) + opt_.eps));
    }
    ++i;
  }
}

template <typename T>
void AdamW<T>::save(Archive& archive) const {
  size_t i = 0;
  for (const auto& p : *store_) {
    archive.put_tensor("adam/m/" + p->name, m_[i].template cast<float>());
    archive.put_tensor("adam/v/" + p->name, v_[i].template cast<float>());
    ++i;
  }
  archive.put_text("adam/state.json", json{{"steps", t_}}.dump());
}

template <typename T>
void AdamW<T>::load(const Archive& archive) {
  size_t i = 0;
  for (const auto& p : *store_) {
    for (auto [prefix, dst] : {std::pair{"adam/m/", &m_[i]}, std::pair{"adam/v/", &v_[i]}}) {
      Tensor<T> t = archive.get_tensor<T>(prefix + p->name);
      if (!(t.shape() == p->value.shape())) throw DataError("optimizer state for '" + p->name + "' has the wrong shape");
      *dst = std::move(t);
    }
    ++i;
  }
  try {
    t_ = json::parse(archive.get_text("adam/state.json")).at("steps").get<int64_t>();
  } catch (const json::exception& e) {
    throw DataError(std::string("optimizer state: ") + e.what());
  }
}

StepModes modes_at(const TrainConfig& cfg, int step) {
  if (cfg.two_stage) {
    const int pretrain = static_cast<int>(std::lround(cfg.pretrain_fraction * cfg.iters));
    return step <= pretrain ? StepModes{false, true} : StepModes{true, false};
  }
  return cfg.mars ? StepModes{true, true} : StepModes{true, false};
}

Trainer::Trainer(PanCrafter<float>& model, TrainConfig cfg, std::vector<Triplet> data)
    : model_(&model),
      cfg_(std::move(cfg)),
      data_(std::move(data)),
      opt_(model.params(), {cfg_.beta1, cfg_.beta2, cfg_.eps, cfg_.weight_decay}) {
  cfg_.validate();
  if (data_.empty()) throw DataError("trainer: no training triplets");
  for (const auto& t : data_) {
    if (!t.has_truth()) throw DataError("trainer: training triplets need ms_hr");
    if (t.ms.dim(0) != model.config().ms_bands) {
      throw DataError("trainer: triplet has " + std::to_string(t.ms.dim(0)) + " bands, model expects " +
                      std::to_string(model.config().ms_bands));
    }
  }
}

std::vector<size_t> Trainer::batch_indices(int step) const {
  const size_t n = data_.size();
  std::vector<size_t> out;
  uint64_t cached_epoch = ~0ULL;
  std::vector<size_t> perm(n);
  for (int j = 0; j < cfg_.batch; ++j) {
    const uint64_t q = static_cast<uint64_t>(step - 1) * static_cast<uint64_t>(cfg_.batch) + static_cast<uint64_t>(j);
    const uint64_t epoch = q / n;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), size_t{0});
      Rng rng(mix_seed(cfg_.seed, epoch));
      for (size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
      cached_epoch = epoch;
    }
    out.push_back(perm[q % n]);
  }
  return out;
}

Batch Trainer::next_batch(int step) const {
  const auto idx = batch_indices(step);
  std::vector<Triplet> items;
  for (size_t j = 0; j < idx.size(); ++j) {
    const Triplet& t = data_[idx[j]];
    if (cfg_.augment) {
      const uint64_t q = static_cast<uint64_t>(step - 1) * static_cast<uint64_t>(cfg_.batch) + j;
      items.push_back(augment(t, mix_seed(cfg_.seed ^ kAugmentSalt, q)));
    } else {
      items.push_back(t);
    }
  }
  return make_batch(items);
}

StepRecord Trainer::step() {
  if (done()) throw Error("trainer: all iterations already run");
  const auto t0 = std::chrono::steady_clock::now();
  const int s = iter_ + 1;
  const double lr = lr_at(cfg_, s);
  const StepModes modes = modes_at(cfg_, s);
  const Batch batch = next_batch(s);
  const ModelInputs<float> in = ModelInputs<float>::build(batch.pan, batch.ms);

  Tape<float> tape;
  StepRecord rec;
  rec.iter = s;
  rec.lr = lr;
  Var<float> loss, loss_ms, loss_pan;
  if (modes.ms) loss_ms = l1_loss(model_->forward(tape, in, MarsMode::Ms), batch.ms_hr);
  if (modes.pan) loss_pan = l1_loss(model_->forward(tape, in, MarsMode::Pan), in.pan_rep);
  if (modes.ms && modes.pan) {
    loss = add(loss_ms, scale(loss_pan, static_cast<float>(cfg_.lambda)));
  } else {
    loss = modes.ms ? loss_ms : loss_pan;
  }
  rec.loss_ms = modes.ms ? static_cast<double>(loss_ms.value()[0]) : 0.0;
  rec.loss_pan = modes.pan ? static_cast<double>(loss_pan.value()[0]) : 0.0;

  if (!std::isfinite(loss.value()[0])) {
    std::string where;
    if (!dump_dir.empty()) {
      Archive a;
      a.put_tensor("pan", batch.pan);
      a.put_tensor("ms", batch.ms);
      a.put_tensor("ms_hr", batch.ms_hr);
      a.put_text("record.json", rec.to_json());
      const auto path = dump_dir / ("nan_batch_" + std::to_string(s) + ".pct1bundle");
      a.save(path);
      where = "; batch written to " + path.string();
    }
    throw NumericError("non-finite loss at iteration " + std::to_string(s) + " (ms " + fmt(rec.loss_ms) + ", pan " +
                       fmt(rec.loss_pan) + ")" + where);
  }

  model_->params().zero_grad();
  tape.backward(loss);
  peak_tape_bytes_ = std::max(peak_tape_bytes_, tape.value_bytes());
  opt_.step(lr);
  iter_ = s;
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

void Trainer::run(const std::function<void(const StepRecord&)>& on_step) {
  while (!done()) {
    const StepRecord r = step();
    if (on_step) on_step(r);
  }
}

Archive Trainer::checkpoint() const {
  Archive a = model_->to_archive();
  opt_.save(a);
  a.put_text("train/state.json", json{{"iter", iter_}, {"config", json::parse(cfg_.to_json())}}.dump(2));
  return a;
}

void Trainer::resume(const Archive& archive) {
  model_->load_params(archive);
  opt_.load(archive);
  try {
    iter_ = json::parse(archive.get_text("train/state.json")).at("iter").get<int>();
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint train state: ") + e.what());
  }
  if (iter_ < 0 || iter_ > cfg_.iters) throw DataError("checkpoint iteration outside the configured run");
}

std::vector<MetricReport> evaluate(const PanCrafter<float>& model, const std::vector<Triplet>& data) {
  constexpr size_t kChunk = 8;
  std::vector<MetricReport> out;
  for (size_t start = 0; start < data.size(); start += kChunk) {
    const size_t end = std::min(data.size(), start + kChunk);
    std::vector<Triplet> chunk(data.begin() + static_cast<std::ptrdiff_t>(start),
                               data.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<Tensor<float>> pans, mss;
    for (const auto& t : chunk) {
      pans.push_back(t.pan);
      mss.push_back(t.ms);
    }
    const Tensor<float> fused = model.infer(stack<float>(pans), stack<float>(mss));
    for (size_t i = 0; i < chunk.size(); ++i) {
      const Tensor<float> f = unstack(fused, static_cast<int64_t>(i));
      MetricReport r;
      if (chunk[i].has_truth()) r = reduced_metrics(f, chunk[i].ms_hr, kRatio);
      r.merge(full_res_metrics(f, chunk[i].ms, chunk[i].pan, kRatio, kMtfSigma));
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::string AblationReport::csv() const {
  static const char* kMetrics[] = {"HQNR", "D_lambda", "D_s", "ERGAS", "SAM", "PSNR", "SSIM", "Q2n", "SCC"};
  std::ostringstream os;
  os << "mars,cm3a,seed";
  for (const char* m : kMetrics) os << ',' << m;
  os << ",time_s,memory_mb,pan_grad_abs\n";
  for (const auto& r : rows) {
    os << (r.cell.mars ? "on" : "off") << ',' << (r.cell.cm3a ? "on" : "off") << ',' << r.seed;
    for (const char* m : kMetrics) {
      auto it = r.metrics.stats.find(m);
      os << ',' << (it == r.metrics.stats.end() ? "nan" : fmt(it->second.mean));
    }
    os << ',' << fmt(r.time_s) << ',' << fmt(r.memory_mb) << ',' << fmt(r.pan_grad_abs) << '\n';
  }
  return os.str();
}

std::string AblationReport::table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-5s %-5s %6s  %-15s %-15s %-15s %-15s %8s %9s\n", "MARs", "CM3A", "seed", "HQNR",
                "ERGAS", "SAM", "PSNR", "time(s)", "mem(MB)");
  os << line;
  auto cell = [&](const AblationRow& r, const char* name) -> std::string {
    auto it = r.metrics.stats.find(name);
    if (it == r.metrics.stats.end()) return "n/a";
    return fmt(it->second.mean) + "+-" + fmt(it->second.std);
  };
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-5s %-5s %6llu  %-15s %-15s %-15s %-15s %8.1f %9.1f\n", r.cell.mars ? "on" : "off",
                  r.cell.cm3a ? "on" : "off", static_cast<unsigned long long>(r.seed), cell(r, "HQNR").c_str(),
                  cell(r, "ERGAS").c_str(), cell(r, "SAM").c_str(), cell(r, "PSNR").c_str(), r.time_s, r.memory_mb);
    os << line;
  }
  return os.str();
}

AblationReport run_ablation(const AblationSpec& spec, const std::function<void(const AblationRow&)>& on_row) {
  if (spec.cells.empty() || spec.seeds.empty()) throw ConfigError("ablation: empty grid");
  if (spec.eval_data.empty()) throw DataError("ablation: no evaluation triplets");
  AblationReport report;
  for (uint64_t seed : spec.seeds) {
    for (const AblationCell& cell : spec.cells) {
      ModelConfig mc = spec.model;
      mc.seed = seed;
      mc.attention = cell.cm3a ? AttentionKind::Cm3a : spec.cm3a_off;
      TrainConfig tc = spec.train;
      tc.seed = seed;
      tc.mars = cell.mars;
      tc.two_stage = false;
      PanCrafter<float> model(mc);
      Trainer trainer(model, tc, spec.train_data);
      const auto t0 = std::chrono::steady_clock::now();
      double last_ms = 0.0;
      trainer.run([&](const StepRecord& r) { last_ms = r.loss_ms; });
      AblationRow row;
      row.cell = cell;
      row.seed = seed;
      row.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      row.memory_mb = static_cast<double>(trainer.peak_tape_bytes()) / (1024.0 * 1024.0);
      row.pan_grad_abs = mode_grad_abs_sum(model.params(), MarsMode::Pan);
      row.final_loss_ms = last_ms;
      row.metrics = MetricSummary::of(evaluate(model, spec.eval_data));
      if (on_row) on_row(row);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

template Var<float> mars_loss(const Var<float>&, const Tensor<float>&, const Var<float>&, const Tensor<float>&, float);
template Var<double> mars_loss(const Var<double>&, const Tensor<double>&, const Var<double>&, const Tensor<double>&,
                               double);
template double mars_loss_value(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                double);
template double mars_loss_value(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                const Tensor<double>&, double);
template double mode_grad_abs_sum(const ParamStore<float>&, MarsMode);
template double mode_grad_abs_sum(const ParamStore<double>&, MarsMode);
template class AdamW<float>;
template class AdamW<double>;

}  // namespace pancraft
