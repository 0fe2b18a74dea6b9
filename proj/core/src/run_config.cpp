#include "tablefill/run_config.hpp"

#include <algorithm>
#include <fstream>

namespace tablefill {

nlohmann::json RunConfig::to_json() const {
  nlohmann::json crit = nlohmann::json::array();
  for (Criterion c : criteria) crit.push_back(to_string(c));
  return {{"model", model.to_json()},
          {"train", train.to_json()},
          {"criteria", crit},
          {"runs", runs},
          {"paths",
           {{"train", paths.train.string()},
            {"dev", paths.dev.string()},
            {"test", paths.test.string()},
            {"checkpoint", paths.checkpoint.string()},
            {"output_dir", paths.output_dir.string()}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      static const char* known[] = {"model", "train", "criteria", "runs", "paths"};
      if (std::find(std::begin(known), std::end(known), it.key()) == std::end(known)) {
        throw ConfigError("unknown config key: " + it.key());
      }
    }
    if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("criteria")) {
      c.criteria.clear();
      for (const auto& s : j.at("criteria")) c.criteria.push_back(criterion_from_string(s.get<std::string>()));
    }
    c.runs = j.value("runs", c.runs);
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      auto path = [&](const char* key) -> std::filesystem::path {
        std::filesystem::path v = p.value(key, std::string());
        if (!v.empty() && v.is_relative() && !base_dir.empty()) v = base_dir / v;
        return v;
      };
      c.paths.train = path("train");
      c.paths.dev = path("dev");
      c.paths.test = path("test");
      c.paths.checkpoint = path("checkpoint");
      c.paths.output_dir = path("output_dir");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

void RunConfig::validate() const {
  try {
    model.encoder.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (runs < 1) throw ConfigError("runs must be at least 1");
  if (criteria.empty()) throw ConfigError("at least one criterion is required");
  if (model.max_segment_tokens < 3) throw ConfigError("max_segment_tokens must leave room for markers");
  if (model.d_att < 1) throw ConfigError("d_att must be positive");
  if (model.history.d_hist < 1) throw ConfigError("d_hist must be positive");
}

}  // namespace tablefill
