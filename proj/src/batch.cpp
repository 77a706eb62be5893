#include "senserate/batch.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <optional>
#include <thread>

#include "json.hpp"

namespace senserate::llm {

namespace {

struct Slot {
  bool done = false;
  Prediction prediction;
  RunLogEntry entry;
  std::optional<std::string> warning;
};

std::string_view status_name(RunLogEntry::Status s) {
  switch (s) {
    case RunLogEntry::Status::kOk:
      return "ok";
    case RunLogEntry::Status::kParseFailure:
      return "parse_failure";
    case RunLogEntry::Status::kTransportFailure:
      return "transport_failure";
  }
  return "ok";
}

}  // namespace

BatchResult run_batch(std::span<const Sample> samples, const BatchOptions& opts,
                      ChatProvider& provider) {
  validate(opts.provider);
  if (opts.strategy == prompting::Strategy::kP1 && opts.shots.size() != 5) {
    throw ValidationError("P1 batch needs five resolved few-shot examples");
  }

  const std::size_t n = samples.size();
  std::vector<Slot> slots(n);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> transport_failures{0};
  std::atomic<std::size_t> provider_calls{0};
  std::atomic<bool> abort{false};
  const double abort_limit = opts.abort_fraction * static_cast<double>(n);

  auto work = [&] {
    for (;;) {
      if (abort.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const Sample& s = samples[i];
      Slot& slot = slots[i];

      const auto bundle = opts.strategy == prompting::Strategy::kP1
                              ? prompting::build_p1(s, opts.shots)
                              : prompting::build_p2(s);
      const auto req = make_request(bundle, opts.provider, opts.layout);
      slot.entry.sample_id = s.id;
      slot.entry.cache_key = cache_key(req);
      slot.prediction.sample_id = s.id;
      slot.prediction.system_id = opts.system_id;

      std::optional<std::string> text;
      try {
        if (opts.cache_dir.empty()) {
          provider_calls.fetch_add(1);
          text = provider.complete(req);
        } else {
          auto outcome = cached_complete(provider, req, opts.cache_dir);
          if (!outcome.hit) provider_calls.fetch_add(1);
          slot.entry.cache_hit = outcome.hit;
          slot.warning = std::move(outcome.warning);
          text = std::move(outcome.text);
        }
      } catch (const TransportError& e) {
        slot.entry.status = RunLogEntry::Status::kTransportFailure;
        slot.entry.detail = e.what();
        slot.prediction.score = kFallbackScore;
        slot.prediction.flagged = true;
        const auto failures = transport_failures.fetch_add(1) + 1;
        if (static_cast<double>(failures) > abort_limit) abort.store(true);
      }

      if (text) {
        slot.prediction.raw_response = *text;
        try {
          const auto parsed = prompting::parse_rating(*text, opts.parse_mode);
          slot.prediction.score = static_cast<double>(parsed.value);
          slot.entry.status = RunLogEntry::Status::kOk;
        } catch (const RatingParseError& e) {
          slot.prediction.score = kFallbackScore;
          slot.prediction.flagged = true;
          slot.entry.status = RunLogEntry::Status::kParseFailure;
          slot.entry.detail = e.what();
        }
      }
      slot.done = true;
    }
  };

  const auto workers =
      static_cast<std::size_t>(std::max(1, std::min<int>(opts.provider.parallelism,
                                                         static_cast<int>(std::max<std::size_t>(n, 1)))));
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  BatchResult result;
  auto& log = result.log;
  log.strategy = std::string(prompting::strategy_name(opts.strategy));
  log.parse_mode = std::string(prompting::parse_mode_name(opts.parse_mode));
  log.model = opts.provider.model;
  log.temperature = opts.provider.temperature;
  log.temperature_sent = !provider.temperature_omitted();
  log.provider_calls = provider_calls.load();
  for (auto& slot : slots) {
    if (!slot.done) continue;
    if (slot.entry.cache_hit) ++log.cache_hits;
    if (slot.entry.status == RunLogEntry::Status::kParseFailure) ++log.parse_failures;
    if (slot.entry.status == RunLogEntry::Status::kTransportFailure) ++log.transport_failures;
    if (slot.warning) log.cache_warnings.push_back(*slot.warning);
    result.predictions.push_back(std::move(slot.prediction));
    log.entries.push_back(std::move(slot.entry));
  }
  if (!log.temperature_sent) {
    log.warnings.push_back("endpoint rejected the temperature field; decoding may be nondeterministic");
  }

  if (abort.load()) {
    const auto msg = "batch aborted: " + std::to_string(log.transport_failures) + " of " +
                     std::to_string(n) + " requests failed in transport";
    throw BatchAborted(msg, std::move(result));
  }
  return result;
}

std::string run_log_to_json(const RunLog& log, const ArtifactStamp& stamp,
                            bool include_cache_stats) {
  nlohmann::ordered_json j;
  j["config_hash"] = stamp.config_hash;
  j["seed"] = stamp.seed;
  j["strategy"] = log.strategy;
  j["parse_mode"] = log.parse_mode;
  j["model"] = log.model;
  j["temperature"] = log.temperature;
  j["temperature_sent"] = log.temperature_sent;
  if (include_cache_stats) {
    j["provider_calls"] = log.provider_calls;
    j["cache_hits"] = log.cache_hits;
  }
  j["parse_failures"] = log.parse_failures;
  j["transport_failures"] = log.transport_failures;
  j["warnings"] = log.warnings;
  if (include_cache_stats) j["cache_warnings"] = log.cache_warnings;
  auto& entries = j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : log.entries) {
    nlohmann::ordered_json entry;
    entry["id"] = e.sample_id;
    entry["cache_key"] = e.cache_key;
    if (include_cache_stats) entry["cache_hit"] = e.cache_hit;
    entry["status"] = status_name(e.status);
    entry["detail"] = e.detail;
    entries.push_back(std::move(entry));
  }
  return j.dump(2) + "\n";
}

}  // namespace senserate::llm
