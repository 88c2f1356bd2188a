#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "followup/errors.hpp"
#include "followup/http_backend.hpp"

using namespace followup;

namespace {

// Local OpenAI-style stub whose replies are scripted per test.
class StubServer {
 public:
  StubServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  httplib::Server& server() { return server_; }

  std::vector<std::string> bodies;
  std::vector<std::string> auth_headers;
  std::mutex mutex;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string chat_reply(const std::string& text) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
                        {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 3}}}}
      .dump();
}

BackendConfig config_for(const StubServer& s) {
  BackendConfig c;
  c.endpoint = s.endpoint();
  c.api_key = "sk-test";
  c.max_retries = 3;
  c.retry_backoff_ms = 1;
  c.timeout_ms = 5000;
  return c;
}

ModelRequest request() { return {PromptTemplateId::judge_match, "Question A: x", 0.0, 8, "judge"}; }

}  // namespace

TEST(HttpBackend, RetriesServerErrorsThenSucceeds) {
  StubServer s;
  std::atomic<int> calls{0};
  s.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard lock(s.mutex);
      s.bodies.push_back(req.body);
      s.auth_headers.push_back(req.get_header_value("Authorization"));
    }
    if (++calls <= 2) {
      res.status = 500;
      res.set_content("overloaded", "text/plain");
      return;
    }
    res.set_content(chat_reply("yes"), "application/json");
  });
  auto resp = complete_chat(request(), config_for(s));
  EXPECT_EQ(resp.text, "yes");
  EXPECT_EQ(resp.retries, 2);
  EXPECT_EQ(resp.prompt_tokens, 11);
  EXPECT_EQ(resp.completion_tokens, 3);
  ASSERT_EQ(s.bodies.size(), 3u);
  EXPECT_EQ(s.bodies[0], s.bodies[2]);
  EXPECT_EQ(s.auth_headers[0], "Bearer sk-test");
  auto body = nlohmann::json::parse(s.bodies[0]);
  EXPECT_EQ(body["model"], "judge");
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], "Question A: x");
  EXPECT_EQ(body["max_tokens"], 8);
}

TEST(HttpBackend, RetriesRateLimitAndGivesUp) {
  StubServer s;
  std::atomic<int> calls{0};
  s.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 429;
  });
  try {
    complete_chat(request(), config_for(s));
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 429);
    EXPECT_EQ(e.attempts(), 4);
  }
  EXPECT_EQ(calls.load(), 4);
}

TEST(HttpBackend, AuthFailureIsImmediate) {
  StubServer s;
  std::atomic<int> calls{0};
  s.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 401;
    res.set_content("bad key sk-test", "text/plain");
  });
  try {
    complete_chat(request(), config_for(s));
    FAIL();
  } catch (const AuthError& e) {
    EXPECT_EQ(e.status(), 401);
    EXPECT_EQ(std::string(e.what()).find("sk-test"), std::string::npos);
  }
  EXPECT_EQ(calls.load(), 1);
}

TEST(HttpBackend, ClientErrorIsNotRetried) {
  StubServer s;
  std::atomic<int> calls{0};
  s.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 400;
  });
  EXPECT_THROW(complete_chat(request(), config_for(s)), TransportError);
  EXPECT_EQ(calls.load(), 1);
}

TEST(HttpBackend, MalformedBodyIsContractError) {
  StubServer s;
  s.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices": []})", "application/json");
  });
  EXPECT_THROW(complete_chat(request(), config_for(s)), ProviderContractError);
}

TEST(HttpBackend, Embeddings) {
  StubServer s;
  s.server().Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    auto in = nlohmann::json::parse(req.body);
    nlohmann::json data = nlohmann::json::array();
    // Out of order on purpose; the client must place vectors by index.
    for (int i = static_cast<int>(in["input"].size()) - 1; i >= 0; --i)
      data.push_back({{"index", i}, {"embedding", {static_cast<double>(i), 1.0}}});
    res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
  });
  auto v = embed_texts({"a", "b", "c"}, config_for(s), "emb");
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[2].values, (std::vector<double>{2.0, 1.0}));
  HttpEmbeddingModel model(config_for(s), "emb");
  EXPECT_EQ(model.embed({"x"}).size(), 1u);
}

TEST(HttpBackend, ProbeDetectsDeadEndpoint) {
  BackendConfig c;
  {
    StubServer s;
    c = config_for(s);
    EXPECT_NO_THROW(probe_endpoint(c));  // 404 still proves something is listening
  }
  c.max_retries = 0;
  c.timeout_ms = 500;
  EXPECT_THROW(probe_endpoint(c), TransportError);
}

TEST(HttpBackend, ChatModelAdapter) {
  StubServer s;
  s.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(chat_reply("no"), "application/json");
  });
  HttpChatModel m(config_for(s));
  EXPECT_EQ(m.complete(request()).text, "no");
  EXPECT_NE(m.identity().find("127.0.0.1"), std::string::npos);
}
