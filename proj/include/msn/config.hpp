// Experiment configuration: one JSON document with four sections.
//
//   {
//     "model":  {"layers": ["msn-ffn", "ffn"], "n": 4096, "k": 8, ...},
//     "data":   {"n_queries": 2000, "seed": 1, ...},
//     "train":  {"lr": 0.01, "warmup_steps": 2000, "optimizer": "sgd", ...},
//     "output": {"dir": "runs/example"}
//   }
//
// model.layers, model.n and model.k are required; every other key has a
// default. Unknown keys are rejected. See docs/config.md for the full list.
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "msn/dataset.hpp"
#include "msn/model.hpp"
#include "msn/train.hpp"

namespace msn {

/// Invalid or unreadable configuration; the message names the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  ModelConfig model;
  DataConfig data;
  TrainConfig train;
  std::string output_dir = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const ExperimentConfig& cfg);

ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& path = "model");
DataConfig data_config_from_json(const nlohmann::json& j, const std::string& path = "data");
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& path = "train");

/// Parses and validates against every module contract.
ExperimentConfig parse_experiment(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

}  // namespace msn
