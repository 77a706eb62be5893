#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "senserate/core.hpp"
#include "senserate/features.hpp"
#include "senserate/llm_client.hpp"
#include "senserate/regress.hpp"

namespace senserate::pipeline {

/// Hash of a JSON configuration with execution-only keys removed
/// (parallelism, cache_dir, output_dir): those change how a run executes,
/// never what it produces.
std::string config_hash(const nlohmann::json& config);

/// Reads `{base_url, model, temperature, max_retries, timeout_ms,
/// parallelism, api_key_env}`; missing keys keep their defaults.
llm::ProviderConfig provider_from_json(const nlohmann::json& j);

/// Reads `{loss, delta, lambda_r, lambda_u, pair_cap}` over `base`.
regress::LossConfig loss_from_json(const nlohmann::json& j, regress::LossConfig base = {});

struct RetrainResult {
  regress::TrainResult trained;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

/// Pools train + dev, carves an internal validation split and trains with
/// early stopping on it.
RetrainResult retrain_protocol(std::span<const Sample> train, std::span<const Sample> dev,
                               std::span<const features::FeatureVector> rows, double holdout,
                               std::uint64_t seed, const regress::LossConfig& loss,
                               const regress::TrainOptions& opts, features::Schema schema);

/// Command-line overrides for a pipeline config; unset fields keep the
/// file's values.
struct Overrides {
  std::optional<int> parallelism;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::uint64_t> seed;
};

struct PipelineSummary {
  std::filesystem::path output_dir;
  std::vector<std::string> systems;
  std::vector<std::filesystem::path> files;  // every artifact written
};

/// Runs ingestion, each configured system and evaluation. Relative paths
/// in the config resolve against the config file's directory.
PipelineSummary run_pipeline(const std::filesystem::path& config_path, const Overrides& overrides,
                             std::ostream& log);

}  // namespace senserate::pipeline
