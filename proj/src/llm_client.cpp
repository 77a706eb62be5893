#include "senserate/llm_client.hpp"

#include <cmath>
#include <fstream>
#include <cstdlib>
#include <random>
#include <regex>
#include <thread>

#include <unistd.h>

#include "httplib.h"
#include "json.hpp"
#include "senserate/error.hpp"
#include "senserate/io.hpp"

namespace senserate::llm {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void validate(const ProviderConfig& cfg) {
  if (cfg.parallelism < 1) throw ValidationError("parallelism must be >= 1");
  if (cfg.temperature < 0.0) throw ValidationError("temperature must be >= 0");
  if (cfg.max_retries < 0) throw ValidationError("max_retries must be >= 0");
  if (cfg.base_url.empty()) throw ValidationError("base_url is empty");
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ValidationError("invalid base URL: " + url);
  SplitUrl out{m[1].str(), m[2].matched ? m[2].str() : std::string()};
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

bool retryable(int status) { return status == 429 || (status >= 500 && status <= 599); }

std::chrono::milliseconds backoff_delay(const ProviderConfig& cfg, int retry_index) {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_real_distribution<double> jitter(1.0 - cfg.backoff_jitter, 1.0 + cfg.backoff_jitter);
  const double ms = static_cast<double>(cfg.backoff_base.count()) *
                    std::pow(cfg.backoff_factor, retry_index) * jitter(rng);
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

std::string excerpt(const std::string& body) {
  constexpr std::size_t kMax = 300;
  return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

}  // namespace

std::string post_json(const ProviderConfig& cfg, const std::string& path, const std::string& body,
                      int* attempts) {
  const auto url = split_url(cfg.base_url);
  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!cfg.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  const std::string target = url.prefix + path;
  std::string last_failure;
  int sent = 0;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(backoff_delay(cfg, attempt - 1));
    ++sent;
    if (attempts) *attempts = sent;
    auto res = client.Post(target, headers, body, "application/json");
    if (!res) {
      last_failure = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    if (!retryable(res->status)) throw PermanentHttpError(res->status, excerpt(res->body));
    last_failure = "HTTP " + std::to_string(res->status) + ": " + excerpt(res->body);
  }
  throw TransportError("giving up on " + cfg.base_url + path + " after " + std::to_string(sent) +
                       " attempts: " + last_failure);
}

// ---------------------------------------------------------------------------
// Requests

ChatRequest make_request(const prompting::PromptBundle& bundle, const ProviderConfig& cfg,
                         MessageLayout layout) {
  ChatRequest req;
  req.model = cfg.model;
  req.temperature = cfg.temperature;
  req.messages.push_back({"system", bundle.system_text});
  if (layout == MessageLayout::kTurns) {
    for (const auto& turn : bundle.example_turns) {
      req.messages.push_back({"user", turn.user_text});
      req.messages.push_back({"assistant", turn.assistant_text});
    }
    if (!bundle.user_text.empty()) req.messages.push_back({"user", bundle.user_text});
  } else {
    std::string content;
    for (const auto& turn : bundle.example_turns) {
      content += turn.user_text + " " + turn.assistant_text + "\n\n";
    }
    content += bundle.user_text;
    if (!content.empty()) req.messages.push_back({"user", content});
  }
  return req;
}

namespace {

ordered_json messages_json(const ChatRequest& req) {
  ordered_json arr = ordered_json::array();
  for (const auto& m : req.messages) arr.push_back({{"role", m.role}, {"content", m.content}});
  return arr;
}

}  // namespace

std::string canonical_request_json(const ChatRequest& req) {
  ordered_json j;
  j["model"] = req.model;
  j["messages"] = messages_json(req);
  j["temperature"] = req.temperature;
  return j.dump();
}

std::string cache_key(const ChatRequest& req) { return sha256_hex(canonical_request_json(req)); }

// ---------------------------------------------------------------------------
// OpenAI-compatible provider

OpenAiChatProvider::OpenAiChatProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
}

std::string OpenAiChatProvider::complete(const ChatRequest& req) {
  auto body_for = [&](bool with_temperature) {
    ordered_json j;
    j["model"] = req.model;
    j["messages"] = messages_json(req);
    if (with_temperature) j["temperature"] = req.temperature;
    return j.dump();
  };

  std::string raw;
  try {
    raw = post_json(cfg_, "/chat/completions", body_for(!omit_temperature_.load()));
  } catch (const PermanentHttpError& e) {
    // Some model families refuse a temperature field; resend once without it.
    if (e.status() != 400 || omit_temperature_.load() ||
        e.body_excerpt().find("temperature") == std::string::npos) {
      throw;
    }
    omit_temperature_.store(true);
    raw = post_json(cfg_, "/chat/completions", body_for(false));
  }

  try {
    const auto j = json::parse(raw);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat completion response: ") + e.what());
  }
}

std::string complete(const prompting::PromptBundle& bundle, const ProviderConfig& cfg) {
  OpenAiChatProvider provider(cfg);
  return provider.complete(make_request(bundle, cfg));
}

// ---------------------------------------------------------------------------
// Mock provider

MockProvider::MockProvider(Script script) : script_(std::move(script)) {}

MockProvider::Script MockProvider::parse_script(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("mock script: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("mock script: expected a JSON object");
  Script script;
  for (const auto& [pattern, value] : j.items()) {
    Reply r;
    if (value.is_string()) {
      r.text = value.get<std::string>();
    } else if (value.is_object() && value.contains("error")) {
      const auto kind = value["error"].get<std::string>();
      if (kind == "transport") {
        r.kind = Reply::Kind::kTransportError;
      } else if (kind == "http") {
        r.kind = Reply::Kind::kHttpError;
        r.status = value.value("status", 500);
        r.text = value.value("body", std::string());
      } else {
        throw ValidationError("mock script: unknown error kind '" + kind + "'");
      }
    } else {
      throw ValidationError("mock script: bad entry for '" + pattern + "'");
    }
    script.emplace(pattern, std::move(r));
  }
  return script;
}

MockProvider MockProvider::from_json_text(const std::string& text) {
  return MockProvider(parse_script(text));
}

MockProvider MockProvider::from_json_file(const fs::path& path) {
  return from_json_text(read_file(path));
}

const MockProvider::Reply* MockProvider::match(const ChatRequest& req,
                                               const std::string& key) const {
  if (auto it = script_.find(key); it != script_.end()) return &it->second;
  const std::string& content = req.messages.empty() ? std::string() : req.messages.back().content;
  const Reply* best = nullptr;
  std::size_t best_len = 0;
  // std::map iterates patterns in lexicographic order, so '>' keeps the
  // smallest pattern among equal lengths.
  for (const auto& [pattern, reply] : script_) {
    if (pattern == "*" || pattern.empty()) continue;
    if (pattern.size() > best_len && content.find(pattern) != std::string::npos) {
      best = &reply;
      best_len = pattern.size();
    }
  }
  if (best) return best;
  if (auto it = script_.find("*"); it != script_.end()) return &it->second;
  return nullptr;
}

std::string MockProvider::complete(const ChatRequest& req) {
  const auto key = cache_key(req);
  {
    std::lock_guard lock(mu_);
    calls_.push_back(key);
  }
  const Reply* r = match(req, key);
  if (!r) throw TransportError("mock provider: no scripted reply for request " + key);
  switch (r->kind) {
    case Reply::Kind::kText:
      return r->text;
    case Reply::Kind::kTransportError:
      throw TransportError("mock provider: injected transport failure");
    case Reply::Kind::kHttpError:
      if (retryable(r->status)) {
        throw TransportError("mock provider: injected HTTP " + std::to_string(r->status));
      }
      throw PermanentHttpError(r->status, r->text);
  }
  return r->text;
}

std::vector<std::string> MockProvider::call_log() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t MockProvider::call_count() const {
  std::lock_guard lock(mu_);
  return calls_.size();
}

// ---------------------------------------------------------------------------
// Cache

CacheOutcome cached_complete(ChatProvider& provider, const ChatRequest& req,
                             const fs::path& cache_dir) {
  const auto key = cache_key(req);
  const auto path = cache_dir / key;
  CacheOutcome out;
  bool replace = false;

  std::error_code ec;
  if (fs::is_regular_file(path, ec)) {
    try {
      auto text = read_file(path);
      if (is_valid_utf8(text)) {
        out.text = std::move(text);
        out.hit = true;
        return out;
      }
      out.warning = "cache entry " + key + " is not valid UTF-8; refetching";
    } catch (const std::exception& e) {
      out.warning = "cache entry " + key + " unreadable (" + e.what() + "); refetching";
    }
    replace = true;
  }

  out.text = provider.complete(req);

  fs::create_directories(cache_dir);
  if (replace) {
    write_file_atomic(path, out.text);
    return out;
  }
  // Write the temp file, then publish it with link(2), which fails if
  // another writer got there first.
  const auto tmp = cache_dir / (key + ".tmp." + std::to_string(::getpid()) + "." +
                                std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write cache file " + tmp.string());
    f.write(out.text.data(), static_cast<std::streamsize>(out.text.size()));
  }
  fs::create_hard_link(tmp, path, ec);
  fs::remove(tmp);
  return out;
}

}  // namespace senserate::llm
