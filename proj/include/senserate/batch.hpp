#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "senserate/core.hpp"
#include "senserate/error.hpp"
#include "senserate/llm_client.hpp"
#include "senserate/prompting.hpp"

namespace senserate::llm {

/// Score given to a sample whose response could not be used.
inline constexpr double kFallbackScore = 3.0;

struct BatchOptions {
  prompting::Strategy strategy = prompting::Strategy::kP2;
  std::vector<Sample> shots;  // required for P1, resolved once up front
  prompting::ParseMode parse_mode = prompting::ParseMode::kLenient;
  MessageLayout layout = MessageLayout::kTurns;
  ProviderConfig provider;  // model, temperature and parallelism are used here
  std::filesystem::path cache_dir;  // empty: no caching
  std::string system_id = "llm";
  double abort_fraction = 0.2;
};

struct RunLogEntry {
  enum class Status { kOk, kParseFailure, kTransportFailure };
  std::string sample_id;
  std::string cache_key;
  bool cache_hit = false;
  Status status = Status::kOk;
  std::string detail;
};

struct RunLog {
  std::string strategy;
  std::string parse_mode;
  std::string model;
  double temperature = 0.0;
  bool temperature_sent = true;
  std::size_t provider_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t parse_failures = 0;
  std::size_t transport_failures = 0;
  std::vector<std::string> warnings;        // independent of cache state
  std::vector<std::string> cache_warnings;  // corrupt entries replaced
  std::vector<RunLogEntry> entries;         // input order
};

struct BatchResult {
  std::vector<Prediction> predictions;  // input order
  RunLog log;
};

/// Thrown when more than `abort_fraction` of requests fail in transport.
/// Completed responses are already in the cache.
class BatchAborted : public TransportError {
 public:
  BatchAborted(const std::string& what, BatchResult partial)
      : TransportError(what), partial_(std::move(partial)) {}
  const BatchResult& partial() const noexcept { return partial_; }

 private:
  BatchResult partial_;
};

/// Prompts, queries and parses every sample with at most
/// `provider.parallelism` requests in flight. Unparseable responses and
/// isolated transport failures get kFallbackScore and are flagged.
BatchResult run_batch(std::span<const Sample> samples, const BatchOptions& opts,
                      ChatProvider& provider);

/// With `include_cache_stats` false, fields that depend on cache state
/// (hits, provider calls, cache warnings) are left out so repeated runs
/// serialize identically.
std::string run_log_to_json(const RunLog& log, const ArtifactStamp& stamp,
                            bool include_cache_stats = true);

}  // namespace senserate::llm
