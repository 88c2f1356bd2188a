#include "followup/gateway.hpp"

#include <chrono>
#include <cmath>

#include "followup/errors.hpp"
#include "followup/text.hpp"

namespace followup {

void ModelRequest::validate() const {
  if (text::is_blank(rendered_prompt)) throw ValidationError("model request has an empty prompt");
  if (!(temperature >= 0.0 && temperature <= 2.0))
    throw ValidationError("temperature must be within [0, 2]");
  if (max_tokens < 1) throw ValidationError("max_tokens must be positive");
}

bool ModelResponse::empty() const { return text::is_blank(text); }

void BackendConfig::validate() const {
  if (endpoint.empty()) throw ConfigError("backend endpoint is not set");
  if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0)
    throw ConfigError("backend endpoint must be an http(s) URL: " + endpoint);
  if (timeout_ms < 1) throw ConfigError("timeout_ms must be positive");
  if (max_retries < 0 || max_retries > 10) throw ConfigError("max_retries must be within [0, 10]");
  if (retry_backoff_ms < 1) throw ConfigError("retry_backoff_ms must be positive");
}

std::string redact(std::string text, const std::string& secret) {
  if (secret.empty()) return text;
  return text::replace_all(std::move(text), secret, "***");
}

RequestLog::RequestLog(const std::filesystem::path& path, std::string secret)
    : out_(path, std::ios::app), secret_(std::move(secret)) {
  if (!out_) throw ConfigError("cannot open request log " + path.string());
}

void RequestLog::record(nlohmann::json entry) {
  std::string line = redact(entry.dump(), secret_);
  std::lock_guard lock(mutex_);
  out_ << line << '\n';
  out_.flush();
}

Gateway::Gateway(std::shared_ptr<ChatModel> chat, std::shared_ptr<EmbeddingModel> embedder,
                 GatewayOptions options)
    : chat_(std::move(chat)), embedder_(std::move(embedder)), options_(std::move(options)) {
  if (options_.concurrency < 1) throw ConfigError("gateway concurrency must be >= 1");
  if (options_.concurrency > 256) throw ConfigError("gateway concurrency must be <= 256");
  slots_ = std::make_unique<std::counting_semaphore<256>>(options_.concurrency);
}

namespace {
struct SlotGuard {
  std::counting_semaphore<256>& sem;
  explicit SlotGuard(std::counting_semaphore<256>& s) : sem(s) { sem.acquire(); }
  ~SlotGuard() { sem.release(); }
};
}  // namespace

ModelResponse Gateway::complete(PromptTemplateId id, std::string prompt, double temperature,
                                std::optional<int> max_tokens) {
  if (!chat_) throw ConfigError("no chat backend configured");
  ModelRequest request{id, std::move(prompt), temperature, max_tokens.value_or(options_.max_tokens),
                       options_.model_name};
  request.validate();

  nlohmann::json entry = {{"kind", "chat"},
                          {"template", to_string(id)},
                          {"model", request.model_name},
                          {"backend", chat_->identity()},
                          {"temperature", request.temperature},
                          {"prompt_chars", request.rendered_prompt.size()}};
  ModelResponse response;
  try {
    SlotGuard guard(*slots_);
    response = chat_->complete(request);
  } catch (const std::exception& e) {
    if (options_.log) {
      entry["status"] = "error";
      entry["error"] = e.what();
      options_.log->record(std::move(entry));
    }
    throw;
  }
  if (options_.log) {
    entry["status"] = response.empty() ? "empty" : "ok";
    entry["latency_ms"] = response.latency_ms;
    entry["retries"] = response.retries;
    entry["prompt_tokens"] = response.prompt_tokens;
    entry["completion_tokens"] = response.completion_tokens;
    options_.log->record(std::move(entry));
  }
  if (response.empty())
    throw EmptyCompletionError("empty completion for template " + std::string(to_string(id)));
  return response;
}

ModelResponse Gateway::complete_retrying_empty(PromptTemplateId id, const std::string& prompt,
                                               double temperature, std::optional<int> max_tokens) {
  try {
    return complete(id, prompt, temperature, max_tokens);
  } catch (const EmptyCompletionError&) {
    return complete(id, prompt, temperature, max_tokens);
  }
}

void check_embeddings(const std::vector<EmbeddingVector>& vectors, std::size_t expected_count) {
  if (vectors.size() != expected_count)
    throw ProviderContractError("embedding provider returned " + std::to_string(vectors.size()) +
                                " vectors for " + std::to_string(expected_count) + " texts");
  if (vectors.empty()) return;
  const std::size_t dim = vectors.front().dimension();
  if (dim == 0) throw ProviderContractError("embedding provider returned zero-length vectors");
  for (const auto& v : vectors) {
    if (v.dimension() != dim)
      throw ProviderContractError("embedding dimension mismatch: " + std::to_string(dim) + " vs " +
                                  std::to_string(v.dimension()));
    for (double x : v.values) {
      if (!std::isfinite(x)) throw ProviderContractError("embedding contains NaN or Inf");
    }
  }
}

std::vector<EmbeddingVector> Gateway::embed(const std::vector<std::string>& texts) {
  if (!embedder_) throw ConfigError("no embedding backend configured");
  if (texts.empty()) throw ValidationError("embed: no texts given");
  for (const auto& t : texts) {
    if (text::is_blank(t)) throw ValidationError("embed: empty text");
  }
  auto start = std::chrono::steady_clock::now();
  std::vector<EmbeddingVector> out;
  {
    SlotGuard guard(*slots_);
    out = embedder_->embed(texts);
  }
  check_embeddings(out, texts.size());
  if (options_.log) {
    options_.log->record({{"kind", "embedding"},
                          {"backend", embedder_->identity()},
                          {"texts", texts.size()},
                          {"dimension", out.front().dimension()},
                          {"latency_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                                             std::chrono::steady_clock::now() - start)
                                             .count()}});
  }
  return out;
}

std::string Gateway::chat_identity() const { return chat_ ? chat_->identity() : "none"; }

std::string Gateway::embedding_identity() const {
  return embedder_ ? embedder_->identity() : "none";
}

}  // namespace followup
