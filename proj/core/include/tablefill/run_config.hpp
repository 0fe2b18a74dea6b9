#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tablefill/evaluator.hpp"
#include "tablefill/model.hpp"
#include "tablefill/trainer.hpp"

namespace tablefill {

struct RunPaths {
  std::filesystem::path train;
  std::filesystem::path dev;
  std::filesystem::path test;
  std::filesystem::path checkpoint;
  std::filesystem::path output_dir;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Everything a command needs. Defaults reproduce the reference hyperparameters.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::vector<Criterion> criteria = all_criteria();
  RunPaths paths;
  int runs = 1;

  nlohmann::json to_json() const;
  // Relative paths are resolved against base_dir when it is non-empty.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  void validate() const;
};

}  // namespace tablefill
