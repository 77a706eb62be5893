#include <cstdlib>
#include <fstream>
#include <mutex>
#include <random>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "senserate/error.hpp"
#include "senserate/llm_client.hpp"
#include "stub_server.hpp"
#include "support.hpp"

using namespace senserate;
using namespace senserate::llm;

namespace {

ProviderConfig stub_cfg(const testing::StubServer& s) {
  ProviderConfig cfg;
  cfg.base_url = s.base_url();
  cfg.model = "stub-model";
  cfg.api_key_env = "";
  cfg.backoff_base = std::chrono::milliseconds(2);
  cfg.timeout = std::chrono::milliseconds(5000);
  return cfg;
}

ChatRequest request(const std::string& model, const std::string& text) {
  return {model, {{"system", "rate it"}, {"user", text}}, 0.0};
}

// Answers with the last message reversed, so each request has its own text.
class Reverser final : public ChatProvider {
 public:
  std::string complete(const ChatRequest& req) override {
    ++calls;
    const auto& c = req.messages.back().content;
    return std::string(c.rbegin(), c.rend());
  }
  int calls = 0;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("retry on 429 then succeed") {
  testing::StubServer s("/chat/completions", [](int call, const httplib::Request&, httplib::Response& res) {
    if (call < 2) {
      res.status = 429;
      res.set_content("slow down", "text/plain");
      return;
    }
    res.set_content(testing::chat_reply("4"), "application/json");
  });
  int attempts = 0;
  const auto body = post_json(stub_cfg(s), "/chat/completions", "{}", &attempts);
  CHECK(attempts == 3);
  CHECK(s.calls() == 3);
  CHECK(body.find("\"4\"") != std::string::npos);

  OpenAiChatProvider p(stub_cfg(s));
  CHECK(p.complete(request("stub-model", "x")) == "4");
}

TEST_CASE("401 is permanent and not retried") {
  testing::StubServer s("/chat/completions", [](int, const httplib::Request&, httplib::Response& res) {
    res.status = 401;
    res.set_content("bad key", "text/plain");
  });
  int attempts = 0;
  try {
    post_json(stub_cfg(s), "/chat/completions", "{}", &attempts);
    FAIL("expected an error");
  } catch (const PermanentHttpError& e) {
    CHECK(e.status() == 401);
    CHECK(e.body_excerpt().find("bad key") != std::string::npos);
  }
  CHECK(attempts == 1);
  CHECK(s.calls() == 1);
}

TEST_CASE("5xx exhausts retries") {
  testing::StubServer s("/chat/completions", [](int, const httplib::Request&, httplib::Response& res) {
    res.status = 503;
  });
  auto cfg = stub_cfg(s);
  cfg.max_retries = 2;
  int attempts = 0;
  CHECK_THROWS_AS(post_json(cfg, "/chat/completions", "{}", &attempts), TransportError);
  CHECK(attempts == 3);
}

TEST_CASE("unreachable endpoint is a transport error") {
  ProviderConfig cfg;
  cfg.base_url = "http://127.0.0.1:1";
  cfg.api_key_env = "";
  cfg.max_retries = 1;
  cfg.backoff_base = std::chrono::milliseconds(1);
  cfg.timeout = std::chrono::milliseconds(500);
  CHECK_THROWS_AS(post_json(cfg, "/chat/completions", "{}"), TransportError);
}

TEST_CASE("request body, auth header and verbatim content") {
  std::mutex mu;
  nlohmann::json seen;
  std::string auth;
  testing::StubServer s("/chat/completions",
                        [&](int, const httplib::Request& req, httplib::Response& res) {
                          std::lock_guard lock(mu);
                          seen = nlohmann::json::parse(req.body);
                          auth = req.get_header_value("Authorization");
                          res.set_content(testing::chat_reply(" 2\\n"), "application/json");
                        });
  ::setenv("SENSERATE_TEST_KEY", "sk-test", 1);
  auto cfg = stub_cfg(s);
  cfg.api_key_env = "SENSERATE_TEST_KEY";
  OpenAiChatProvider p(cfg);
  CHECK(p.complete(request("stub-model", "story")) == " 2\n");
  std::lock_guard lock(mu);
  CHECK(auth == "Bearer sk-test");
  CHECK(seen.at("model") == "stub-model");
  CHECK(seen.at("temperature") == 0.0);
  CHECK(seen.at("messages").size() == 2);
  CHECK(seen.at("messages")[1].at("content") == "story");
  CHECK_FALSE(p.temperature_omitted());
}

TEST_CASE("temperature rejection falls back to omitting the field") {
  std::vector<bool> had_temperature;
  std::mutex mu;
  testing::StubServer s("/chat/completions",
                        [&](int, const httplib::Request& req, httplib::Response& res) {
                          const auto j = nlohmann::json::parse(req.body);
                          std::lock_guard lock(mu);
                          had_temperature.push_back(j.contains("temperature"));
                          if (j.contains("temperature")) {
                            res.status = 400;
                            res.set_content(R"({"error":"Unsupported value: 'temperature'"})",
                                            "application/json");
                            return;
                          }
                          res.set_content(testing::chat_reply("5"), "application/json");
                        });
  OpenAiChatProvider p(stub_cfg(s));
  CHECK(p.complete(request("m", "a")) == "5");
  CHECK(p.temperature_omitted());
  CHECK(p.complete(request("m", "b")) == "5");
  std::lock_guard lock(mu);
  CHECK(had_temperature == std::vector<bool>{true, false, false});
}

TEST_CASE("cache keys") {
  const auto a = request("m1", "hello");
  CHECK(cache_key(a) == cache_key(request("m1", "hello")));
  CHECK(cache_key(a).size() == 64);
  CHECK(cache_key(a) != cache_key(request("m2", "hello")));
  auto hot = a;
  hot.temperature = 0.7;
  CHECK(cache_key(a) != cache_key(hot));
}

TEST_CASE("cache hit, miss and corrupt entry") {
  testing::TempDir dir("cache");
  MockProvider mock({{"*", {MockProvider::Reply::Kind::kText, "3", 0}}});
  const auto req = request("m", "text");
  const auto first = cached_complete(mock, req, dir.path());
  CHECK_FALSE(first.hit);
  CHECK(first.text == "3");
  const auto second = cached_complete(mock, req, dir.path());
  CHECK(second.hit);
  CHECK(second.text == "3");
  CHECK(mock.call_count() == 1);

  CHECK_FALSE(cached_complete(mock, request("other-model", "text"), dir.path()).hit);
  CHECK(mock.call_count() == 2);

  const auto path = dir.path() / cache_key(req);
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << "\xff\xfe\x80";
  }
  const auto third = cached_complete(mock, req, dir.path());
  CHECK_FALSE(third.hit);
  CHECK(third.warning.has_value());
  CHECK(third.text == "3");
  CHECK(slurp(path) == "3");
  CHECK(mock.call_count() == 3);
}

TEST_CASE("100 random requests: unique keys and exact round trip") {
  testing::TempDir dir("sweep");
  Reverser rev;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> ch(32, 126);
  std::set<std::string> keys;
  std::vector<std::pair<ChatRequest, std::string>> seen;
  for (int i = 0; i < 100; ++i) {
    std::string text(5 + i % 17, ' ');
    for (auto& c : text) c = static_cast<char>(ch(rng));
    text += "\n\t\"" + std::to_string(i);
    const auto req = request(i % 2 ? "m-a" : "m-b", text);
    keys.insert(cache_key(req));
    const auto out = cached_complete(rev, req, dir.path());
    CHECK_FALSE(out.hit);
    seen.emplace_back(req, out.text);
  }
  CHECK(keys.size() == 100);
  for (const auto& [req, text] : seen) {
    const auto again = cached_complete(rev, req, dir.path());
    CHECK(again.hit);
    CHECK(again.text == text);
  }
  CHECK(rev.calls == 100);
}

TEST_CASE("mock matching priority") {
  const auto req = request("m", "The bank was closed by the river.");
  const auto exact = cache_key(req);
  auto script = MockProvider::parse_script(R"({
    "*": "3",
    "bank": "2",
    "river": "4",
    "the river": "5",
    "zzz": {"error": "transport"},
    "401 me": {"error": "http", "status": 401, "body": "denied"}
  })");
  MockProvider m(script);
  CHECK(m.complete(req) == "5");  // longest substring
  CHECK(m.complete(request("m", "a bank")) == "2");
  CHECK(m.complete(request("m", "nothing here")) == "3");
  CHECK_THROWS_AS(m.complete(request("m", "zzz")), TransportError);
  CHECK_THROWS_AS(m.complete(request("m", "401 me")), PermanentHttpError);

  script.emplace(exact, MockProvider::Reply{MockProvider::Reply::Kind::kText, "1", 0});
  MockProvider with_key(script);
  CHECK(with_key.complete(req) == "1");

  // Equal lengths: the lexicographically smaller pattern wins.
  MockProvider tie(MockProvider::parse_script(R"({"abc": "1", "xyz": "2"})"));
  CHECK(tie.complete(request("m", "xyz abc")) == "1");
  CHECK_THROWS_AS(tie.complete(request("m", "none")), TransportError);
  CHECK(tie.call_count() == 2);
  CHECK(tie.call_log()[0] == cache_key(request("m", "xyz abc")));

  CHECK_THROWS_AS(MockProvider::parse_script("[1]"), ValidationError);
  CHECK_THROWS_AS(MockProvider::parse_script(R"({"a": {"error": "odd"}})"), ValidationError);
}

TEST_CASE("provider config validation") {
  ProviderConfig cfg;
  cfg.model = "m";
  CHECK_NOTHROW(validate(cfg));
  cfg.parallelism = 0;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg.parallelism = 1;
  cfg.temperature = -1;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
}
