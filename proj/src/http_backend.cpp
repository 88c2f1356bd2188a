#include "followup/http_backend.hpp"

#include <chrono>
#include <regex>
#include <thread>

#include "httplib.h"

#include "followup/errors.hpp"

namespace followup {

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

Url split_url(const std::string& endpoint) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(endpoint, m, re)) throw ConfigError("malformed endpoint URL: " + endpoint);
  std::string prefix = m[2].matched ? m[2].str() : "";
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {m[1].str(), prefix};
}

httplib::Client make_client(const BackendConfig& config, const Url& url) {
  httplib::Client client(url.origin);
  auto timeout = std::chrono::milliseconds(config.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  return client;
}

httplib::Headers auth_headers(const BackendConfig& config) {
  httplib::Headers h;
  if (config.api_key && !config.api_key->empty())
    h.emplace("Authorization", "Bearer " + *config.api_key);
  return h;
}

bool retryable(int status) { return status == 0 || status == 429 || status >= 500; }

struct Exchange {
  nlohmann::json body;
  int retries = 0;
  std::int64_t latency_ms = 0;
};

// POSTs `payload` until a 2xx arrives or the retry budget is spent.
// The payload string is built once, so every attempt sends identical bytes.
Exchange post_json(const BackendConfig& config, const std::string& path,
                   const nlohmann::json& payload) {
  config.validate();
  Url url = split_url(config.endpoint);
  auto client = make_client(config, url);
  const std::string body = payload.dump();
  const auto headers = auth_headers(config);
  const std::string secret = config.api_key.value_or("");

  int status = 0;
  std::string detail;
  auto start = std::chrono::steady_clock::now();
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0) {
      auto delay = static_cast<std::int64_t>(config.retry_backoff_ms) << std::min(attempt - 1, 10);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    auto res = client.Post(url.prefix + path, headers, body, "application/json");
    if (!res) {
      status = 0;
      detail = httplib::to_string(res.error());
      continue;
    }
    status = res->status;
    if (status >= 200 && status < 300) {
      Exchange ex;
      try {
        ex.body = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw ProviderContractError(std::string("response is not JSON: ") + e.what());
      }
      ex.retries = attempt;
      ex.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - start)
                          .count();
      return ex;
    }
    detail = redact(res->body.substr(0, 512), secret);
    if (status == 401 || status == 403)
      throw AuthError("authentication rejected (HTTP " + std::to_string(status) + "): " + detail,
                      status);
    if (!retryable(status)) {
      throw TransportError("HTTP " + std::to_string(status) + ": " + detail, status, attempt + 1);
    }
  }
  throw TransportError("request failed after " + std::to_string(config.max_retries + 1) +
                           " attempts (last status " + std::to_string(status) + "): " + detail,
                       status, config.max_retries + 1);
}

}  // namespace

ModelResponse complete_chat(const ModelRequest& request, const BackendConfig& config) {
  request.validate();
  nlohmann::json payload = {
      {"model", request.model_name},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.rendered_prompt}}})},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
      {"stream", false},
  };
  Exchange ex = post_json(config, "/chat/completions", payload);
  const auto& j = ex.body;
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw ProviderContractError("chat response has no choices");
  const auto& msg = j["choices"][0].value("message", nlohmann::json::object());
  ModelResponse out;
  if (msg.contains("content") && msg["content"].is_string()) {
    out.text = msg["content"].get<std::string>();
  } else if (!msg.contains("content") || !msg["content"].is_null()) {
    throw ProviderContractError("chat response choice has no message content");
  }
  if (j.contains("usage") && j["usage"].is_object()) {
    out.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    out.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  out.latency_ms = ex.latency_ms;
  out.retries = ex.retries;
  return out;
}

std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                         const BackendConfig& config, const std::string& model) {
  if (texts.empty()) throw ValidationError("embed: no texts given");
  Exchange ex = post_json(config, "/embeddings", {{"model", model}, {"input", texts}});
  const auto& j = ex.body;
  if (!j.contains("data") || !j["data"].is_array())
    throw ProviderContractError("embedding response has no data array");
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<bool> filled(texts.size(), false);
  std::size_t position = 0;
  for (const auto& item : j["data"]) {
    std::size_t index = item.contains("index") ? item["index"].get<std::size_t>() : position;
    ++position;
    if (index >= texts.size() || filled[index])
      throw ProviderContractError("embedding response has a bad index");
    if (!item.contains("embedding") || !item["embedding"].is_array())
      throw ProviderContractError("embedding item without vector");
    out[index].values = item["embedding"].get<std::vector<double>>();
    filled[index] = true;
  }
  if (position != texts.size())
    throw ProviderContractError("embedding response count does not match input count");
  check_embeddings(out, texts.size());
  return out;
}

void probe_endpoint(const BackendConfig& config) {
  config.validate();
  Url url = split_url(config.endpoint);
  auto client = make_client(config, url);
  auto res = client.Get(url.prefix + "/models", auth_headers(config));
  if (!res)
    throw TransportError("backend unreachable at " + config.endpoint + ": " +
                             httplib::to_string(res.error()),
                         0, 1);
}

HttpChatModel::HttpChatModel(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
}

ModelResponse HttpChatModel::complete(const ModelRequest& request) {
  return complete_chat(request, config_);
}

std::string HttpChatModel::identity() const { return config_.endpoint; }

HttpEmbeddingModel::HttpEmbeddingModel(BackendConfig config, std::string model)
    : config_(std::move(config)), model_(std::move(model)) {
  config_.validate();
}

std::vector<EmbeddingVector> HttpEmbeddingModel::embed(const std::vector<std::string>& texts) {
  return embed_texts(texts, config_, model_);
}

std::string HttpEmbeddingModel::identity() const { return config_.endpoint + "#" + model_; }

}  // namespace followup
