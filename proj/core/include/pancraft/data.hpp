#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pancraft/io.hpp"
#include "pancraft/tensor.hpp"

namespace pancraft {

/// Standard deviation of the Gaussian MTF stand-in, in PAN pixels.
inline constexpr double kMtfSigma = 1.7;
/// PAN / MS resolution ratio.
inline constexpr int kRatio = 4;
/// Training patch size at PAN resolution.
inline constexpr int64_t kPatchSize = 64;

struct SceneOptions {
  int64_t ms_bands = 4;
  /// PAN-resolution side length; must be divisible by 4.
  int64_t size = 256;
  /// Misalignment bound: dx, dy are drawn uniformly in [-max_shift, max_shift].
  double max_shift = 2.0;
  /// Amplitude of the PAN-only fine texture.
  double texture = 0.03;
  /// Fixed PAN band weights (normalized to sum 1). Empty draws random convex weights.
  std::vector<double> pan_weights;
  int min_shapes = 20;
  int max_shapes = 60;
};

struct SceneMeta {
  uint64_t seed = 0;
  double dx = 0.0;
  double dy = 0.0;
  std::vector<double> pan_weights;
  double texture = 0.0;

  std::string to_json() const;
  static SceneMeta from_json(const std::string& text);
};

/// Synthetic ground truth: the HR multi-spectral image and the PAN image
/// acquired from a shifted copy of it.
struct Scene {
  Tensor<float> hrms;       // [C_ms, S, S]
  Tensor<float> pan_truth;  // [1, S, S]
  SceneMeta meta;
};

/// Deterministic in (seed, options). PAN(y, x) is built from hrms sampled at
/// (y - dy, x - dx), so the PAN content is displaced by (+dx, +dy).
Scene generate_scene(uint64_t seed, const SceneOptions& options);

/// One sample. `ms_hr` is empty for full-resolution samples, which have no
/// ground truth.
struct Triplet {
  Tensor<float> pan;    // [1, P, P]
  Tensor<float> ms;     // [C_ms, P/4, P/4]
  Tensor<float> ms_hr;  // [C_ms, P, P]

  bool has_truth() const { return !ms_hr.empty(); }
};

struct WaldOptions {
  int64_t patch = kPatchSize;
  double mtf_sigma = kMtfSigma;
  /// Random crop jitter around the tile grid, in multiples of 4 PAN pixels.
  bool jitter = false;
  uint64_t seed = 0;
  /// Full-resolution mode drops ms_hr.
  bool full_resolution = false;
};

/// Low-resolution MS from an HR image: Gaussian blur, then 4x4 block means on
/// a grid anchored at the top-left pixel.
Tensor<float> wald_ms(const Tensor<float>& ms_hr, double mtf_sigma = kMtfSigma);

/// Tiles the scene with stride `patch` and degrades each patch.
std::vector<Triplet> wald_degrade(const Scene& scene, const WaldOptions& options = {});

/// Geometric transform applied identically to pan, ms and ms_hr.
struct Augmentation {
  bool flip_h = false;
  bool flip_v = false;
  int rot90 = 0;  // counter-clockwise quarter turns, 0..3

  static Augmentation draw(uint64_t seed);
  bool identity() const { return !flip_h && !flip_v && rot90 % 4 == 0; }
};

Triplet augment(const Triplet& t, const Augmentation& a);
Triplet augment(const Triplet& t, uint64_t seed);

/// Flip or rotate the two trailing axes of a rank-3 tensor.
Tensor<float> flip_horizontal(const Tensor<float>& x);
Tensor<float> flip_vertical(const Tensor<float>& x);
Tensor<float> rotate90(const Tensor<float>& x, int quarter_turns);

/// Batches triplets into [B, ...] tensors.
struct Batch {
  Tensor<float> pan;    // [B,1,P,P]
  Tensor<float> ms;     // [B,C,P/4,P/4]
  Tensor<float> ms_hr;  // [B,C,P,P]
};
Batch make_batch(const std::vector<Triplet>& items);

// Dataset directory:
//   manifest.json
//   scenes/<seed>.pct1bundle   archive with hrms, pan (PCT1) and meta.json
//   triplets/*.pct1bundle      optional user data: pan, ms, ms_hr (PCT1)
struct DatasetSpec {
  uint64_t seed = 2025;
  int scenes = 4;
  SceneOptions scene;
};

/// Scene i is generated from seed + i.
std::vector<uint64_t> scene_seeds(const DatasetSpec& spec);

Archive scene_to_archive(const Scene& scene);
Scene scene_from_archive(const Archive& archive);

void write_dataset(const std::filesystem::path& dir, const DatasetSpec& spec);
std::vector<Scene> load_scenes(const std::filesystem::path& dir);
/// User-provided triplets under triplets/, sorted by file name.
std::vector<Triplet> load_triplets(const std::filesystem::path& dir);
void save_triplet(const std::filesystem::path& path, const Triplet& t);
Triplet load_triplet(const std::filesystem::path& path);

/// A triplet with a stable name: "s<seed>_p<index>" for scene patches, the
/// file stem for user triplets.
struct NamedTriplet {
  std::string name;
  Triplet triplet;
};

/// Every sample of a dataset directory: Wald patches of each scene (in
/// manifest order) followed by user triplets.
std::vector<NamedTriplet> load_samples(const std::filesystem::path& dir, const WaldOptions& options = {});

/// True when every value is finite and inside [0, 1].
bool in_unit_range(const Tensor<float>& x);

}  // namespace pancraft
