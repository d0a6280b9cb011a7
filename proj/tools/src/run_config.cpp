#include "pancraft_cli/run_config.hpp"

#include <json.hpp>

#include "pancraft/error.hpp"
#include "pancraft/io.hpp"

namespace pancraft::cli {

using nlohmann::json;

RunConfig RunConfig::for_profile(const std::string& profile) {
  RunConfig c;
  c.profile = profile;
  if (profile == "desk") {
    c.model = ModelConfig::desk();
    c.train = TrainConfig::desk();
  } else if (profile == "paper") {
    c.model = ModelConfig::paper();
    c.train = TrainConfig::paper();
  } else {
    throw ConfigError("unknown profile '" + profile + "' (expected desk or paper)");
  }
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path, const std::string& profile_override) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  const auto bytes = read_file(path);
  return from_json(std::string(bytes.begin(), bytes.end()), profile_override);
}

RunConfig RunConfig::from_json(const std::string& text, const std::string& profile_override) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key != "profile" && key != "model" && key != "train" && key != "data" && key != "eval_data" && key != "out") {
      throw ConfigError("unknown run config key '" + key + "'");
    }
  }
  try {
    std::string profile = j.value("profile", std::string("desk"));
    if (!profile_override.empty()) profile = profile_override;
    RunConfig c = for_profile(profile);
    if (j.contains("model")) {
      c.model = ModelConfig::from_json(j.at("model").dump(), c.model);
      c.ms_bands_fixed = j.at("model").contains("ms_bands");
    }
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train").dump(), c.train);
    if (j.contains("data")) c.data = j.at("data").get<std::string>();
    if (j.contains("eval_data")) c.eval_data = j.at("eval_data").get<std::string>();
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
}

std::string RunConfig::to_json() const {
  json j = {{"profile", profile},
            {"model", json::parse(model.to_json())},
            {"train", json::parse(train.to_json())},
            {"data", data.string()},
            {"eval_data", eval_data.string()},
            {"out", out.string()}};
  return j.dump(2);
}

void RunConfig::write_resolved(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_text_atomic(dir / "resolved_config.json", to_json() + "\n");
}

}  // namespace pancraft::cli
