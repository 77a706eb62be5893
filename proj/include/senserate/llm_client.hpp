#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "senserate/prompting.hpp"

namespace senserate::llm {

/// Connection settings shared by the chat client and the embeddings client.
struct ProviderConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model;
  double temperature = 0.0;
  int max_retries = 4;  // five attempts in total
  std::chrono::milliseconds timeout{60'000};
  int parallelism = 1;
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds backoff_base{1'000};
  double backoff_factor = 2.0;
  double backoff_jitter = 0.2;  // +/- fraction
};

void validate(const ProviderConfig& cfg);

/// POSTs JSON to `{base_url}{path}`. Retries 429, 5xx and transport failures
/// with exponential backoff; any other non-2xx throws PermanentHttpError
/// immediately. Exhausted retries throw TransportError. `attempts`, when
/// given, receives the number of requests sent.
std::string post_json(const ProviderConfig& cfg, const std::string& path, const std::string& body,
                      int* attempts = nullptr);

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
};

enum class MessageLayout {
  kTurns,          // few-shot examples as alternating user/assistant turns
  kSingleMessage,  // examples inlined into one user message
};

ChatRequest make_request(const prompting::PromptBundle& bundle, const ProviderConfig& cfg,
                         MessageLayout layout = MessageLayout::kTurns);

/// Canonical JSON of (model, messages, temperature); the cache key is its
/// SHA-256.
std::string canonical_request_json(const ChatRequest& req);
std::string cache_key(const ChatRequest& req);

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  /// First choice's message content, verbatim.
  virtual std::string complete(const ChatRequest& req) = 0;
  /// True once the endpoint rejected the temperature field and requests
  /// were resent without it.
  virtual bool temperature_omitted() const { return false; }
};

/// OpenAI-compatible `POST {base_url}/chat/completions`.
class OpenAiChatProvider final : public ChatProvider {
 public:
  explicit OpenAiChatProvider(ProviderConfig cfg);
  std::string complete(const ChatRequest& req) override;
  bool temperature_omitted() const override { return omit_temperature_.load(); }

 private:
  ProviderConfig cfg_;
  std::atomic<bool> omit_temperature_{false};
};

/// One-shot convenience over OpenAiChatProvider.
std::string complete(const prompting::PromptBundle& bundle, const ProviderConfig& cfg);

/// Deterministic scripted provider.
///
/// Script keys are matched against each request in priority order:
///   1. an exact cache key (64 hex digits),
///   2. the longest substring pattern found in the last message's content
///      (ties: lexicographically smallest pattern),
///   3. the wildcard "*".
/// A value is either the response text or an object
/// `{"error": "transport"}` / `{"error": "http", "status": 401, "body": "..."}`.
class MockProvider final : public ChatProvider {
 public:
  struct Reply {
    enum class Kind { kText, kTransportError, kHttpError } kind = Kind::kText;
    std::string text;
    int status = 0;
  };

  using Script = std::map<std::string, Reply>;

  explicit MockProvider(Script script);
  static Script parse_script(const std::string& json_text);
  static MockProvider from_json_text(const std::string& text);
  static MockProvider from_json_file(const std::filesystem::path& path);

  std::string complete(const ChatRequest& req) override;

  std::vector<std::string> call_log() const;  // cache keys, in call order
  std::size_t call_count() const;

 private:
  const Reply* match(const ChatRequest& req, const std::string& key) const;

  Script script_;
  mutable std::mutex mu_;
  std::vector<std::string> calls_;
};

struct CacheOutcome {
  std::string text;
  bool hit = false;
  std::optional<std::string> warning;
};

/// One file per key under `cache_dir`, holding the raw response text.
/// Concurrent writers race through temp file + hard link; the first one wins.
/// An unreadable or non-UTF-8 entry counts as a miss and is replaced.
CacheOutcome cached_complete(ChatProvider& provider, const ChatRequest& req,
                             const std::filesystem::path& cache_dir);

}  // namespace senserate::llm
