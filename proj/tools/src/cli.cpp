#include "pancraft_cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pancraft/data.hpp"
#include "pancraft/error.hpp"
#include "pancraft/io.hpp"
#include "pancraft/metrics.hpp"
#include "pancraft/model.hpp"
#include "pancraft/parallel.hpp"
#include "pancraft/png.hpp"
#include "pancraft/train.hpp"
#include "pancraft_cli/run_config.hpp"

namespace pancraft::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  int threads = 0;
  bool deterministic = false;

  void add(CLI::App* app) {
    app->add_option("--threads", threads, "Kernel threads (overrides PANCRAFT_THREADS)");
    app->add_flag("--deterministic", deterministic, "Single-threaded, fixed reduction order");
  }
  void apply() const {
    if (deterministic) set_deterministic(true);
    if (threads > 0) set_thread_count(threads);
  }
};

struct GenDataArgs {
  uint64_t seed = 2025;
  int scenes = 4;
  int64_t size = 256;
  int64_t cms = 4;
  double misalign = 2.0;
  double texture = 0.03;
  std::string out;
  bool export_png = false;
};

struct TrainArgs {
  std::string config, profile, data, out, resume, attention;
  std::optional<int> iters, batch, warmup, checkpoint_every;
  std::optional<double> lr, lambda;
  std::optional<uint64_t> seed;
  bool no_mars = false, two_stage = false, no_augment = false, quiet = false;
  int log_every = 100;
};

struct InferArgs {
  std::string ckpt, in, out;
  bool png = false;
  bool full_res = false;
};

struct EvalArgs {
  std::string pred, ref, out;
  bool full_res = false;
};

struct AblateArgs {
  std::string config, profile, data, eval_data, out, grid = "11,10,01,00", seeds = "2025", cm3a_off = "local";
  std::optional<int> iters, batch;
  std::optional<double> lr;
  bool quiet = false;
};

std::string metric_csv(const std::vector<std::string>& names, const std::vector<MetricReport>& reports) {
  std::vector<std::string> keys;
  for (const auto& r : reports)
    for (const auto& [k, v] : r.values)
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  std::ostringstream os;
  os << "name";
  for (const auto& k : keys) os << ',' << k;
  os << '\n';
  char buf[40];
  for (size_t i = 0; i < reports.size(); ++i) {
    os << names[i];
    for (const auto& k : keys) {
      auto it = reports[i].values.find(k);
      if (it == reports[i].values.end() || !std::isfinite(it->second)) {
        os << ",undefined";
      } else {
        std::snprintf(buf, sizeof buf, ",%.10g", it->second);
        os << buf;
      }
    }
    os << '\n';
  }
  return os.str();
}

void require(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string("missing required ") + what);
}

RunConfig resolve_config(const std::string& config, const std::string& profile) {
  if (!config.empty()) return RunConfig::from_file(config, profile);
  return RunConfig::for_profile(profile.empty() ? "desk" : profile);
}

// Training pool: every sample of the dataset, patches jittered by the seed.
std::vector<Triplet> training_pool(const fs::path& dir, uint64_t seed) {
  WaldOptions o;
  o.jitter = true;
  o.seed = seed;
  std::vector<Triplet> out;
  for (auto& s : load_samples(dir, o)) out.push_back(std::move(s.triplet));
  return out;
}

void fit_bands(RunConfig& rc, int64_t bands) {
  if (rc.ms_bands_fixed && rc.model.ms_bands != bands) {
    throw DataError("model expects " + std::to_string(rc.model.ms_bands) + " bands but the data has " +
                    std::to_string(bands));
  }
  rc.model.ms_bands = bands;
}

int cmd_gen_data(const GenDataArgs& a) {
  require(a.out, "--out");
  DatasetSpec spec;
  spec.seed = a.seed;
  spec.scenes = a.scenes;
  spec.scene.size = a.size;
  spec.scene.ms_bands = a.cms;
  spec.scene.max_shift = a.misalign;
  spec.scene.texture = a.texture;
  write_dataset(a.out, spec);
  if (a.export_png) {
    fs::create_directories(fs::path(a.out) / "png");
    for (const Scene& s : load_scenes(a.out)) {
      const std::string stem = std::to_string(s.meta.seed);
      export_png(fs::path(a.out) / "png" / (stem + "_hrms.png"), s.hrms, default_rgb_bands(s.hrms.dim(0)));
      export_png(fs::path(a.out) / "png" / (stem + "_pan.png"), s.pan_truth, {0, 0, 0});
    }
  }
  std::cout << "wrote " << a.scenes << " scenes to " << a.out << "\n";
  return kOk;
}

int cmd_train(const TrainArgs& a) {
  RunConfig rc = resolve_config(a.config, a.profile);
  if (!a.data.empty()) rc.data = a.data;
  if (!a.out.empty()) rc.out = a.out;
  if (a.iters) rc.train.iters = *a.iters;
  if (a.batch) rc.train.batch = *a.batch;
  if (a.warmup) rc.train.warmup = *a.warmup;
  if (a.checkpoint_every) rc.train.checkpoint_every = *a.checkpoint_every;
  if (a.lr) rc.train.lr = *a.lr;
  if (a.lambda) rc.train.lambda = *a.lambda;
  if (a.seed) rc.train.seed = rc.model.seed = *a.seed;
  if (a.no_mars) rc.train.mars = false;
  if (a.two_stage) rc.train.two_stage = true;
  if (a.no_augment) rc.train.augment = false;
  if (!a.attention.empty()) rc.model.attention = parse_attention_kind(a.attention);
  if (rc.train.warmup > rc.train.iters) rc.train.warmup = rc.train.iters;
  rc.train.validate();
  require(rc.data.string(), "--data");
  require(rc.out.string(), "--out");

  std::vector<Triplet> pool = training_pool(rc.data, rc.train.seed);
  fit_bands(rc, pool.front().ms.dim(0));
  rc.model.validate();
  rc.write_resolved(rc.out);

  PanCrafter<float> model(rc.model);
  Trainer trainer(model, rc.train, std::move(pool));
  trainer.dump_dir = rc.out;
  if (!a.resume.empty()) trainer.resume(Archive::load(a.resume));

  const fs::path log_path = rc.out / "train_log.jsonl";
  std::ofstream log(log_path, a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw DataError("cannot open " + log_path.string());
  const fs::path ckpt_dir = rc.out / "checkpoints";
  if (rc.train.checkpoint_every > 0) fs::create_directories(ckpt_dir);
  if (!a.quiet) {
    std::cout << "training " << model.parameter_count() << " parameters for " << rc.train.iters << " iterations\n";
  }
  trainer.run([&](const StepRecord& r) {
    log << r.to_json() << '\n';
    if (!a.quiet && a.log_every > 0 && r.iter % a.log_every == 0) {
      std::printf("iter %6d  loss_ms %.5f  loss_pan %.5f  lr %.3g\n", r.iter, r.loss_ms, r.loss_pan, r.lr);
      std::fflush(stdout);
    }
    if (rc.train.checkpoint_every > 0 && r.iter % rc.train.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "iter_%06d.ckpt", r.iter);
      trainer.checkpoint().save(ckpt_dir / name);
    }
  });
  trainer.checkpoint().save(rc.out / "final.ckpt");
  if (!a.quiet) std::cout << "wrote " << (rc.out / "final.ckpt").string() << "\n";
  return kOk;
}

int cmd_infer(const InferArgs& a) {
  require(a.ckpt, "--ckpt");
  require(a.in, "--in");
  require(a.out, "--out");
  if (!fs::exists(a.ckpt)) throw DataError("checkpoint not found: " + a.ckpt);
  const PanCrafter<float> model = PanCrafter<float>::from_archive(Archive::load(a.ckpt));
  std::vector<NamedTriplet> samples;
  if (fs::is_directory(a.in)) {
    WaldOptions o;
    o.full_resolution = a.full_res;
    samples = load_samples(a.in, o);
  } else {
    samples.push_back({fs::path(a.in).stem().string(), load_triplet(a.in)});
  }
  fs::create_directories(a.out);
  for (const auto& s : samples) {
    const Tensor<float> fused = model.infer(s.triplet.pan, s.triplet.ms);
    write_pct1(fs::path(a.out) / (s.name + ".pct1"), fused);
    if (a.png) export_png(fs::path(a.out) / (s.name + ".png"), fused, default_rgb_bands(fused.dim(0)));
  }
  json resolved = {{"ckpt", a.ckpt}, {"in", a.in}, {"full_res", a.full_res},
                   {"model", json::parse(model.config().to_json())}};
  write_text_atomic(fs::path(a.out) / "resolved_config.json", resolved.dump(2) + "\n");
  std::cout << "fused " << samples.size() << " samples into " << a.out << "\n";
  return kOk;
}

int cmd_eval(const EvalArgs& a) {
  require(a.pred, "--pred");
  require(a.ref, "--ref");
  std::vector<std::string> names;
  std::vector<MetricReport> reports;
  if (!fs::is_directory(a.pred)) {
    if (a.full_res) throw ConfigError("--full-res needs a dataset directory as --ref");
    const Tensor<float> pred = read_pct1<float>(a.pred);
    Tensor<float> ref;
    if (fs::is_directory(a.ref)) throw ConfigError("--pred is a file, so --ref must be a PCT1 file");
    if (fs::path(a.ref).extension() == ".pct1bundle") {
      ref = load_triplet(a.ref).ms_hr;
      if (ref.empty()) throw DataError("reference triplet has no ms_hr");
    } else {
      ref = read_pct1<float>(a.ref);
    }
    names.push_back(fs::path(a.pred).stem().string());
    reports.push_back(reduced_metrics(pred, ref, kRatio));
  } else {
    WaldOptions o;
    o.full_resolution = a.full_res;
    for (const auto& s : load_samples(a.ref, o)) {
      const fs::path p = fs::path(a.pred) / (s.name + ".pct1");
      if (!fs::exists(p)) throw DataError("missing prediction " + p.string());
      const Tensor<float> pred = read_pct1<float>(p);
      if (a.full_res) {
        reports.push_back(full_res_metrics(pred, s.triplet.ms, s.triplet.pan, kRatio, kMtfSigma));
      } else {
        if (!s.triplet.has_truth()) throw DataError("sample " + s.name + " has no ground truth; use --full-res");
        reports.push_back(reduced_metrics(pred, s.triplet.ms_hr, kRatio));
      }
      names.push_back(s.name);
    }
  }
  for (size_t i = 0; i < reports.size(); ++i)
    for (const auto& note : reports[i].notes) std::cerr << names[i] << ": " << note << "\n";
  const MetricSummary summary = MetricSummary::of(reports);
  const fs::path out = a.out.empty() ? fs::path(".") : fs::path(a.out);
  fs::create_directories(out);
  write_text_atomic(out / "metrics.csv", metric_csv(names, reports));
  write_text_atomic(out / "metrics.json", summary.to_json() + "\n");
  for (const auto& [k, st] : summary.stats) std::printf("%-9s %.6g +- %.6g (n=%d)\n", k.c_str(), st.mean, st.std, st.count);
  return kOk;
}

std::vector<AblationCell> parse_grid(const std::string& text) {
  std::vector<AblationCell> cells;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.size() != 2 || (item[0] != '0' && item[0] != '1') || (item[1] != '0' && item[1] != '1')) {
      throw ConfigError("grid cells are <mars><cm3a> bit pairs such as 11,10,01,00; got '" + item + "'");
    }
    cells.push_back({item[0] == '1', item[1] == '1'});
  }
  if (cells.empty()) throw ConfigError("empty --grid");
  return cells;
}

std::vector<uint64_t> parse_seeds(const std::string& text) {
  std::vector<uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      seeds.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + item + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("empty --seeds");
  return seeds;
}

int cmd_ablate(const AblateArgs& a) {
  RunConfig rc = resolve_config(a.config, a.profile);
  if (!a.data.empty()) rc.data = a.data;
  if (!a.eval_data.empty()) rc.eval_data = a.eval_data;
  if (!a.out.empty()) rc.out = a.out;
  if (a.iters) rc.train.iters = *a.iters;
  if (a.batch) rc.train.batch = *a.batch;
  if (a.lr) rc.train.lr = *a.lr;
  if (rc.train.warmup > rc.train.iters) rc.train.warmup = rc.train.iters;
  rc.train.validate();
  require(rc.data.string(), "--data");
  require(rc.eval_data.string(), "--eval-data");
  require(rc.out.string(), "--out");

  AblationSpec spec;
  spec.train_data = training_pool(rc.data, rc.train.seed);
  for (auto& s : load_samples(rc.eval_data)) spec.eval_data.push_back(std::move(s.triplet));
  fit_bands(rc, spec.train_data.front().ms.dim(0));
  rc.model.validate();
  spec.model = rc.model;
  spec.train = rc.train;
  spec.cells = parse_grid(a.grid);
  spec.seeds = parse_seeds(a.seeds);
  spec.cm3a_off = parse_attention_kind(a.cm3a_off);
  rc.write_resolved(rc.out);

  const AblationReport report = run_ablation(spec, [&](const AblationRow& r) {
    if (!a.quiet) {
      std::printf("cell mars=%s cm3a=%s seed=%llu done in %.1fs\n", r.cell.mars ? "on" : "off", r.cell.cm3a ? "on" : "off",
                  static_cast<unsigned long long>(r.seed), r.time_s);
      std::fflush(stdout);
    }
  });
  write_text_atomic(rc.out / "ablation.csv", report.csv());
  write_text_atomic(rc.out / "ablation.txt", report.table());
  std::cout << report.table();

  // Mode routing: PAN-only parameters learn only when MARs is on.
  for (const auto& r : report.rows) {
    const bool ok = r.cell.mars ? r.pan_grad_abs > 0.0 : r.pan_grad_abs == 0.0;
    if (!ok) {
      std::cerr << "mode routing violated: mars=" << (r.cell.mars ? "on" : "off") << " pan_grad_abs=" << r.pan_grad_abs
                << "\n";
      return kFailure;
    }
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("pancraft");
  for (const auto& s : args) argv.push_back(s.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, const char* const* argv) {
  CLI::App app{"PAN-sharpening with modality-adaptive reconstruction and cross-modality attention"};
  app.require_subcommand(1);

  Common common;
  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  g->add_option("--seed", gen.seed, "Base seed; scene i uses seed + i");
  g->add_option("--scenes", gen.scenes, "Number of scenes");
  g->add_option("--size", gen.size, "PAN side length (multiple of 4)");
  g->add_option("--cms", gen.cms, "Multi-spectral bands");
  g->add_option("--misalign", gen.misalign, "Maximum PAN/MS shift in PAN pixels");
  g->add_option("--texture", gen.texture, "PAN-only texture amplitude");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_flag("--export-png", gen.export_png, "Write RGB previews under png/");
  common.add(g);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--config", tr.config, "Run config JSON");
  t->add_option("--profile", tr.profile, "desk or paper");
  t->add_option("--data", tr.data, "Dataset directory");
  t->add_option("--out", tr.out, "Output directory");
  t->add_option("--resume", tr.resume, "Checkpoint to resume from");
  t->add_option("--iters", tr.iters);
  t->add_option("--batch", tr.batch);
  t->add_option("--warmup", tr.warmup);
  t->add_option("--lr", tr.lr);
  t->add_option("--lambda", tr.lambda);
  t->add_option("--seed", tr.seed, "Model and training seed");
  t->add_option("--checkpoint-every", tr.checkpoint_every);
  t->add_option("--attention", tr.attention, "cm3a, local or conv");
  t->add_option("--log-every", tr.log_every);
  t->add_flag("--no-mars", tr.no_mars, "Train in MS mode only");
  t->add_flag("--two-stage", tr.two_stage, "PAN pretraining then MS finetuning");
  t->add_flag("--no-augment", tr.no_augment);
  t->add_flag("--quiet", tr.quiet);
  common.add(t);

  InferArgs inf;
  auto* i = app.add_subcommand("infer", "Fuse PAN and MS inputs with a checkpoint");
  i->add_option("--ckpt", inf.ckpt)->required();
  i->add_option("--in", inf.in, "Dataset directory or triplet bundle")->required();
  i->add_option("--out", inf.out, "Output directory")->required();
  i->add_flag("--png", inf.png, "Also write RGB previews");
  i->add_flag("--full-res", inf.full_res, "Treat dataset samples as full-resolution");
  common.add(i);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score predictions");
  e->add_option("--pred", ev.pred, "Prediction directory or PCT1 file")->required();
  e->add_option("--ref", ev.ref, "Dataset directory, triplet bundle or PCT1 file")->required();
  e->add_option("--out", ev.out, "Output directory for metrics.csv and metrics.json");
  e->add_flag("--full-res", ev.full_res, "No-reference metrics (D_lambda, D_s, HQNR)");
  common.add(e);

  AblateArgs ab;
  auto* b = app.add_subcommand("ablate", "Train and score the MARs x CM3A grid");
  b->add_option("--config", ab.config);
  b->add_option("--profile", ab.profile);
  b->add_option("--data", ab.data);
  b->add_option("--eval-data", ab.eval_data);
  b->add_option("--out", ab.out);
  b->add_option("--grid", ab.grid, "Cells as <mars><cm3a> bits, e.g. 11,10,01,00");
  b->add_option("--seeds", ab.seeds, "Comma-separated seeds");
  b->add_option("--cm3a-off", ab.cm3a_off, "Attention when CM3A is off: local or conv");
  b->add_option("--iters", ab.iters);
  b->add_option("--batch", ab.batch);
  b->add_option("--lr", ab.lr);
  b->add_flag("--quiet", ab.quiet);
  common.add(b);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    common.apply();
    if (*g) return cmd_gen_data(gen);
    if (*t) return cmd_train(tr);
    if (*i) return cmd_infer(inf);
    if (*e) return cmd_eval(ev);
    if (*b) return cmd_ablate(ab);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kConfigError;
  } catch (const NumericError& err) {
    std::cerr << "numeric failure: " << err.what() << "\n";
    return kNumericError;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return kDataError;
  } catch (const ShapeError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return kDataError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace pancraft::cli
