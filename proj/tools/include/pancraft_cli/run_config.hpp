#pragma once

#include <filesystem>
#include <string>

#include "pancraft/model.hpp"
#include "pancraft/train.hpp"

namespace pancraft::cli {

/// Everything a command needs to reproduce a run. File layout:
///   {
///     "profile": "desk" | "paper",
///     "model": { ModelConfig keys },
///     "train": { TrainConfig keys },
///     "data": "<dataset dir>",
///     "eval_data": "<dataset dir>",
///     "out": "<output dir>"
///   }
/// Unknown keys at any level are rejected.
struct RunConfig {
  std::string profile = "desk";
  ModelConfig model = ModelConfig::desk();
  TrainConfig train = TrainConfig::desk();
  std::filesystem::path data;
  std::filesystem::path eval_data;
  std::filesystem::path out;
  /// Whether the model band count was fixed by the config rather than
  /// inferred from the data.
  bool ms_bands_fixed = false;

  /// Profile defaults: "desk" (C=16, 2,000 iters, batch 4) or "paper"
  /// (C=128, 50,000 iters, batch 48).
  static RunConfig for_profile(const std::string& profile);

  /// Reads a config file. `profile_override`, when non-empty, replaces the
  /// file's profile before its sections are applied.
  static RunConfig from_file(const std::filesystem::path& path, const std::string& profile_override = "");
  static RunConfig from_json(const std::string& text, const std::string& profile_override = "");

  std::string to_json() const;
  /// Writes resolved_config.json into `dir`.
  void write_resolved(const std::filesystem::path& dir) const;
};

}  // namespace pancraft::cli
