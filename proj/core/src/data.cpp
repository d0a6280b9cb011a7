#include "pancraft/data.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numbers>
#include <string>
#include <utility>

#include "pancraft/error.hpp"
#include "pancraft/kernels.hpp"
#include "pancraft/rng.hpp"

namespace pancraft {

using nlohmann::json;

namespace {

enum class ShapeKind { Rect, Ellipse, Line };

struct Primitive {
  ShapeKind kind;
  double cx, cy;
  double a, b;  // half extents (rect, ellipse); half length and half thickness (line)
  double angle;
  double opacity;
  std::vector<double> reflectance;
};

Primitive draw_primitive(Rng& rng, int64_t size, int64_t bands) {
  Primitive p;
  const double s = static_cast<double>(size);
  const uint64_t k = rng.below(3);
  p.kind = k == 0 ? ShapeKind::Rect : (k == 1 ? ShapeKind::Ellipse : ShapeKind::Line);
  p.cx = rng.uniform(0.0, s);
  p.cy = rng.uniform(0.0, s);
  if (p.kind == ShapeKind::Line) {
    p.a = rng.uniform(0.05, 0.3) * s;
    p.b = rng.uniform(0.5, 2.5);
  } else {
    p.a = rng.uniform(0.02, 0.15) * s;
    p.b = rng.uniform(0.02, 0.15) * s;
  }
  p.angle = rng.uniform(0.0, std::numbers::pi);
  p.opacity = rng.uniform(0.6, 1.0);
  const double base = rng.uniform(0.05, 0.95);
  p.reflectance.resize(static_cast<size_t>(bands));
  for (auto& r : p.reflectance) r = std::clamp(base + rng.uniform(-0.25, 0.25), 0.0, 1.0);
  return p;
}

// Signed distance in pixels, negative inside.
double signed_distance(const Primitive& p, double x, double y) {
  const double c = std::cos(p.angle), s = std::sin(p.angle);
  const double u = c * (x - p.cx) + s * (y - p.cy);
  const double v = -s * (x - p.cx) + c * (y - p.cy);
  switch (p.kind) {
    case ShapeKind::Rect:
      return std::max(std::abs(u) - p.a, std::abs(v) - p.b);
    case ShapeKind::Ellipse: {
      const double r = std::sqrt((u / p.a) * (u / p.a) + (v / p.b) * (v / p.b));
      return (r - 1.0) * std::min(p.a, p.b);
    }
    case ShapeKind::Line: {
      const double du = std::max(std::abs(u) - p.a, 0.0);
      return std::sqrt(du * du + v * v) - p.b;
    }
  }
  return 0.0;
}

double bounding_radius(const Primitive& p) {
  return p.kind == ShapeKind::Line ? p.a + p.b + 1.0 : std::hypot(p.a, p.b) + 1.0;
}

// Bilinear sample with clamped borders.
double sample_bilinear(const float* plane, int64_t size, double y, double x) {
  const double maxc = static_cast<double>(size - 1);
  y = std::clamp(y, 0.0, maxc);
  x = std::clamp(x, 0.0, maxc);
  const int64_t y0 = static_cast<int64_t>(std::floor(y));
  const int64_t x0 = static_cast<int64_t>(std::floor(x));
  const int64_t y1 = std::min(y0 + 1, size - 1);
  const int64_t x1 = std::min(x0 + 1, size - 1);
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  const double top = (1.0 - fx) * plane[y0 * size + x0] + fx * plane[y0 * size + x1];
  const double bottom = (1.0 - fx) * plane[y1 * size + x0] + fx * plane[y1 * size + x1];
  return (1.0 - fy) * top + fy * bottom;
}

Tensor<float> crop(const Tensor<float>& x, int64_t y0, int64_t x0, int64_t h, int64_t w) {
  const int64_t c = x.dim(0);
  Tensor<float> out(Shape{c, h, w});
  for (int64_t k = 0; k < c; ++k)
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j) out.at(k, i, j) = x.at(k, y0 + i, x0 + j);
  return out;
}

void require_rank3(const Tensor<float>& x, const char* op) {
  if (x.rank() != 3) throw ShapeError(std::string(op) + ": expected [C,H,W], got " + x.shape().str());
}

}  // namespace

std::string SceneMeta::to_json() const {
  json j = {{"seed", seed}, {"dx", dx}, {"dy", dy}, {"pan_weights", pan_weights}, {"texture", texture}};
  return j.dump(2);
}

SceneMeta SceneMeta::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    SceneMeta m;
    m.seed = j.at("seed").get<uint64_t>();
    m.dx = j.at("dx").get<double>();
    m.dy = j.at("dy").get<double>();
    m.pan_weights = j.at("pan_weights").get<std::vector<double>>();
    m.texture = j.at("texture").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("scene meta: ") + e.what());
  }
}

Scene generate_scene(uint64_t seed, const SceneOptions& opt) {
  if (opt.size < kRatio || opt.size % kRatio != 0) {
    throw DataError("generate_scene: size must be a positive multiple of 4, got " + std::to_string(opt.size));
  }
  if (opt.ms_bands < 1) throw DataError("generate_scene: ms_bands must be >= 1");
  if (opt.max_shift < 0.0 || opt.texture < 0.0) throw DataError("generate_scene: negative shift or texture");
  if (opt.min_shapes < 0 || opt.max_shapes < opt.min_shapes) throw DataError("generate_scene: bad shape count range");

  const int64_t s = opt.size, nb = opt.ms_bands;
  const double sd = static_cast<double>(s);
  Rng rng(seed);
  Scene scene;
  scene.meta.seed = seed;
  scene.meta.texture = opt.texture;

  // Misalignment and PAN weights are drawn first so they do not depend on
  // the number of shapes.
  scene.meta.dx = rng.uniform(-opt.max_shift, opt.max_shift);
  scene.meta.dy = rng.uniform(-opt.max_shift, opt.max_shift);
  std::vector<double> w = opt.pan_weights;
  if (w.empty()) {
    w.resize(static_cast<size_t>(nb));
    for (auto& v : w) v = rng.uniform(0.2, 1.0);
  }
  if (static_cast<int64_t>(w.size()) != nb) throw DataError("generate_scene: pan_weights size != ms_bands");
  double wsum = 0.0;
  for (double v : w) {
    if (v < 0.0) throw DataError("generate_scene: pan_weights must be non-negative");
    wsum += v;
  }
  if (wsum <= 0.0) throw DataError("generate_scene: pan_weights sum to zero");
  for (auto& v : w) v /= wsum;
  scene.meta.pan_weights = w;

  // Background: per-band plane plus one low-frequency wave.
  std::vector<double> hr(static_cast<size_t>(nb * s * s));
  for (int64_t b = 0; b < nb; ++b) {
    const double c0 = rng.uniform(0.25, 0.65);
    const double gx = rng.uniform(-0.15, 0.15), gy = rng.uniform(-0.15, 0.15);
    const double amp = rng.uniform(0.0, 0.08);
    const double fx = rng.uniform(0.5, 3.0) * 2.0 * std::numbers::pi / sd;
    const double fy = rng.uniform(0.5, 3.0) * 2.0 * std::numbers::pi / sd;
    const double ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int64_t y = 0; y < s; ++y) {
      for (int64_t x = 0; x < s; ++x) {
        const double u = static_cast<double>(x) / sd - 0.5, v = static_cast<double>(y) / sd - 0.5;
        hr[static_cast<size_t>((b * s + y) * s + x)] =
            c0 + gx * u + gy * v + amp * std::sin(fx * static_cast<double>(x) + fy * static_cast<double>(y) + ph);
      }
    }
  }

  // Shapes, composited in draw order with a one-pixel anti-aliasing ramp.
  const int count = opt.min_shapes + static_cast<int>(rng.below(static_cast<uint64_t>(opt.max_shapes - opt.min_shapes + 1)));
  for (int n = 0; n < count; ++n) {
    const Primitive p = draw_primitive(rng, s, nb);
    const double r = bounding_radius(p);
    const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(p.cy - r)));
    const int64_t y1 = std::min<int64_t>(s - 1, static_cast<int64_t>(std::ceil(p.cy + r)));
    const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(p.cx - r)));
    const int64_t x1 = std::min<int64_t>(s - 1, static_cast<int64_t>(std::ceil(p.cx + r)));
    for (int64_t y = y0; y <= y1; ++y) {
      for (int64_t x = x0; x <= x1; ++x) {
        const double d = signed_distance(p, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5);
        const double cover = std::clamp(0.5 - d, 0.0, 1.0) * p.opacity;
        if (cover <= 0.0) continue;
        for (int64_t b = 0; b < nb; ++b) {
          double& v = hr[static_cast<size_t>((b * s + y) * s + x)];
          v = (1.0 - cover) * v + cover * p.reflectance[static_cast<size_t>(b)];
        }
      }
    }
  }

  scene.hrms = Tensor<float>(Shape{nb, s, s});
  for (size_t i = 0; i < hr.size(); ++i) scene.hrms[static_cast<int64_t>(i)] = static_cast<float>(std::clamp(hr[i], 0.0, 1.0));

  // PAN: weighted band sum of the shifted HR image plus PAN-only texture.
  scene.pan_truth = Tensor<float>(Shape{1, s, s});
  const float* planes = scene.hrms.data();
  for (int64_t y = 0; y < s; ++y) {
    for (int64_t x = 0; x < s; ++x) {
      const double sy = static_cast<double>(y) - scene.meta.dy;
      const double sx = static_cast<double>(x) - scene.meta.dx;
      double v = 0.0;
      for (int64_t b = 0; b < nb; ++b) v += w[static_cast<size_t>(b)] * sample_bilinear(planes + b * s * s, s, sy, sx);
      if (opt.texture > 0.0) v += opt.texture * rng.uniform(-1.0, 1.0);
      scene.pan_truth.at(0, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return scene;
}

Tensor<float> wald_ms(const Tensor<float>& ms_hr, double mtf_sigma) {
  return mtf_degrade(ms_hr, kRatio, mtf_sigma);
}

std::vector<Triplet> wald_degrade(const Scene& scene, const WaldOptions& opt) {
  const int64_t s = scene.hrms.dim(-1), p = opt.patch;
  if (p < kRatio || p % kRatio != 0) throw DataError("wald_degrade: patch must be a positive multiple of 4");
  if (scene.hrms.dim(-2) < p || s < p) {
    throw DataError("wald_degrade: scene " + scene.hrms.shape().str() + " smaller than one patch of " + std::to_string(p));
  }
  const int64_t h = scene.hrms.dim(-2);
  Rng rng(opt.seed);
  const int64_t reach = p / (2 * kRatio);
  auto jittered = [&](int64_t origin, int64_t extent) {
    int64_t o = origin;
    if (opt.jitter) o += kRatio * (static_cast<int64_t>(rng.below(static_cast<uint64_t>(2 * reach + 1))) - reach);
    o = std::clamp<int64_t>(o, 0, extent - p);
    return o - o % kRatio;
  };
  std::vector<Triplet> out;
  for (int64_t ty = 0; ty + p <= h; ty += p) {
    for (int64_t tx = 0; tx + p <= s; tx += p) {
      const int64_t y0 = jittered(ty, h), x0 = jittered(tx, s);
      Triplet t;
      Tensor<float> hr = crop(scene.hrms, y0, x0, p, p);
      t.pan = crop(scene.pan_truth, y0, x0, p, p);
      t.ms = wald_ms(hr, opt.mtf_sigma);
      if (!opt.full_resolution) t.ms_hr = std::move(hr);
      out.push_back(std::move(t));
    }
  }
  return out;
}

Augmentation Augmentation::draw(uint64_t seed) {
  Rng rng(seed);
  Augmentation a;
  a.flip_h = rng.coin();
  a.flip_v = rng.coin();
  a.rot90 = static_cast<int>(rng.below(4));
  return a;
}

Tensor<float> flip_horizontal(const Tensor<float>& x) {
  require_rank3(x, "flip_horizontal");
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<float> out(x.shape());
  for (int64_t k = 0; k < c; ++k)
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j) out.at(k, i, j) = x.at(k, i, w - 1 - j);
  return out;
}

Tensor<float> flip_vertical(const Tensor<float>& x) {
  require_rank3(x, "flip_vertical");
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<float> out(x.shape());
  for (int64_t k = 0; k < c; ++k)
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j) out.at(k, i, j) = x.at(k, h - 1 - i, j);
  return out;
}

Tensor<float> rotate90(const Tensor<float>& x, int quarter_turns) {
  require_rank3(x, "rotate90");
  Tensor<float> cur = x;
  const int turns = ((quarter_turns % 4) + 4) % 4;
  for (int t = 0; t < turns; ++t) {
    const int64_t c = cur.dim(0), h = cur.dim(1), w = cur.dim(2);
    Tensor<float> out(Shape{c, w, h});
    for (int64_t k = 0; k < c; ++k)
      for (int64_t i = 0; i < w; ++i)
        for (int64_t j = 0; j < h; ++j) out.at(k, i, j) = cur.at(k, j, w - 1 - i);
    cur = std::move(out);
  }
  return cur;
}

Triplet augment(const Triplet& t, const Augmentation& a) {
  auto apply = [&](const Tensor<float>& x) {
    if (x.empty()) return x;
    Tensor<float> y = x;
    if (a.flip_h) y = flip_horizontal(y);
    if (a.flip_v) y = flip_vertical(y);
    if (a.rot90 % 4 != 0) y = rotate90(y, a.rot90);
    return y;
  };
  return Triplet{apply(t.pan), apply(t.ms), apply(t.ms_hr)};
}

Triplet augment(const Triplet& t, uint64_t seed) { return augment(t, Augmentation::draw(seed)); }

Batch make_batch(const std::vector<Triplet>& items) {
  if (items.empty()) throw DataError("make_batch: empty batch");
  std::vector<Tensor<float>> pan, ms, hr;
  for (const auto& t : items) {
    pan.push_back(t.pan);
    ms.push_back(t.ms);
    if (t.has_truth()) hr.push_back(t.ms_hr);
  }
  Batch b;
  b.pan = stack<float>(pan);
  b.ms = stack<float>(ms);
  if (hr.size() == items.size()) b.ms_hr = stack<float>(hr);
  return b;
}

std::vector<uint64_t> scene_seeds(const DatasetSpec& spec) {
  std::vector<uint64_t> seeds;
  for (int i = 0; i < spec.scenes; ++i) seeds.push_back(spec.seed + static_cast<uint64_t>(i));
  return seeds;
}

Archive scene_to_archive(const Scene& scene) {
  Archive a;
  a.put_tensor("hrms", scene.hrms);
  a.put_tensor("pan", scene.pan_truth);
  a.put_text("meta.json", scene.meta.to_json());
  return a;
}

Scene scene_from_archive(const Archive& a) {
  Scene s;
  s.hrms = a.get_tensor<float>("hrms");
  s.pan_truth = a.get_tensor<float>("pan");
  s.meta = SceneMeta::from_json(a.get_text("meta.json"));
  if (s.hrms.rank() != 3 || s.pan_truth.rank() != 3 || s.pan_truth.dim(0) != 1 ||
      s.hrms.dim(1) != s.pan_truth.dim(1) || s.hrms.dim(2) != s.pan_truth.dim(2)) {
    throw DataError("scene bundle: inconsistent shapes " + s.hrms.shape().str() + " / " + s.pan_truth.shape().str());
  }
  return s;
}

void write_dataset(const std::filesystem::path& dir, const DatasetSpec& spec) {
  namespace fs = std::filesystem;
  if (spec.scenes < 1) throw ConfigError("gen-data: scenes must be >= 1");
  std::error_code ec;
  fs::create_directories(dir / "scenes", ec);
  if (ec) throw DataError("cannot create " + (dir / "scenes").string() + ": " + ec.message());
  json scenes = json::array();
  for (uint64_t seed : scene_seeds(spec)) {
    const Scene s = generate_scene(seed, spec.scene);
    const std::string file = "scenes/" + std::to_string(seed) + ".pct1bundle";
    scene_to_archive(s).save(dir / file);
    scenes.push_back({{"seed", seed}, {"file", file}, {"dx", s.meta.dx}, {"dy", s.meta.dy}});
  }
  const SceneOptions& o = spec.scene;
  json manifest = {{"format", "pancraft-dataset"},
                   {"version", 1},
                   {"seed", spec.seed},
                   {"ms_bands", o.ms_bands},
                   {"size", o.size},
                   {"max_shift", o.max_shift},
                   {"texture", o.texture},
                   {"pan_weights", o.pan_weights},
                   {"scenes", scenes}};
  write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<Scene> load_scenes(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw DataError("no manifest.json in " + dir.string());
  json manifest;
  try {
    const auto bytes = read_file(manifest_path);
    manifest = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  }
  std::vector<Scene> out;
  if (!manifest.contains("scenes")) return out;
  for (const auto& entry : manifest.at("scenes")) {
    out.push_back(scene_from_archive(Archive::load(dir / entry.at("file").get<std::string>())));
  }
  return out;
}

void save_triplet(const std::filesystem::path& path, const Triplet& t) {
  Archive a;
  a.put_tensor("pan", t.pan);
  a.put_tensor("ms", t.ms);
  if (t.has_truth()) a.put_tensor("ms_hr", t.ms_hr);
  a.save(path);
}

Triplet load_triplet(const std::filesystem::path& path) {
  const Archive a = Archive::load(path);
  Triplet t;
  t.pan = a.get_tensor<float>("pan");
  t.ms = a.get_tensor<float>("ms");
  if (a.contains("ms_hr")) t.ms_hr = a.get_tensor<float>("ms_hr");
  const bool ok = t.pan.rank() == 3 && t.ms.rank() == 3 && t.pan.dim(0) == 1 &&
                  t.pan.dim(1) == kRatio * t.ms.dim(1) && t.pan.dim(2) == kRatio * t.ms.dim(2) &&
                  (!t.has_truth() || (t.ms_hr.dim(0) == t.ms.dim(0) && t.ms_hr.dim(1) == t.pan.dim(1) &&
                                      t.ms_hr.dim(2) == t.pan.dim(2)));
  if (!ok) throw DataError("triplet " + path.string() + ": inconsistent shapes");
  return t;
}

std::vector<Triplet> load_triplets(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  const auto sub = dir / "triplets";
  if (!fs::is_directory(sub)) return {};
  for (const auto& e : fs::directory_iterator(sub)) {
    if (e.is_regular_file() && e.path().extension() == ".pct1bundle") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Triplet> out;
  for (const auto& f : files) out.push_back(load_triplet(f));
  return out;
}

std::vector<NamedTriplet> load_samples(const std::filesystem::path& dir, const WaldOptions& options) {
  std::vector<NamedTriplet> out;
  if (std::filesystem::exists(dir / "manifest.json")) {
    for (const Scene& s : load_scenes(dir)) {
      WaldOptions o = options;
      o.seed = mix_seed(options.seed, s.meta.seed);
      auto patches = wald_degrade(s, o);
      for (size_t i = 0; i < patches.size(); ++i) {
        out.push_back({"s" + std::to_string(s.meta.seed) + "_p" + std::to_string(i), std::move(patches[i])});
      }
    }
  }
  const auto sub = dir / "triplets";
  if (std::filesystem::is_directory(sub)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(sub)) {
      if (e.is_regular_file() && e.path().extension() == ".pct1bundle") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Triplet t = load_triplet(f);
      if (options.full_resolution) t.ms_hr = Tensor<float>();
      out.push_back({f.stem().string(), std::move(t)});
    }
  }
  if (out.empty()) throw DataError("no samples found in " + dir.string());
  return out;
}

bool in_unit_range(const Tensor<float>& x) {
  return std::all_of(x.storage().begin(), x.storage().end(),
                     [](float v) { return std::isfinite(v) && v >= 0.0f && v <= 1.0f; });
}

}  // namespace pancraft
