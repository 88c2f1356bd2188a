#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "json.hpp"

#include "followup/prompts.hpp"

namespace followup {

struct ModelRequest {
  PromptTemplateId template_id = PromptTemplateId::judge_match;
  std::string rendered_prompt;
  double temperature = 0.6;
  int max_tokens = 1024;
  std::string model_name;

  /// Throws ValidationError on an empty prompt, out-of-range temperature or max_tokens < 1.
  void validate() const;
};

struct ModelResponse {
  std::string text;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  std::int64_t latency_ms = 0;
  /// Number of transport retries spent before this response arrived.
  int retries = 0;

  bool empty() const;
};

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

struct BackendConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8000/v1
  std::optional<std::string> api_key;
  int timeout_ms = 120000;
  int max_retries = 3;
  int retry_backoff_ms = 500;

  void validate() const;
};

class ChatModel {
 public:
  virtual ~ChatModel() = default;
  virtual ModelResponse complete(const ModelRequest& request) = 0;
  virtual std::string identity() const = 0;
};

class EmbeddingModel {
 public:
  virtual ~EmbeddingModel() = default;
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
  virtual std::string identity() const = 0;
};

/// Replaces every occurrence of `secret` with "***".
std::string redact(std::string text, const std::string& secret);

/// JSON-lines request log. Safe for concurrent writers.
class RequestLog {
 public:
  explicit RequestLog(const std::filesystem::path& path, std::string secret = {});
  void record(nlohmann::json entry);

 private:
  std::mutex mutex_;
  std::ofstream out_;
  std::string secret_;
};

struct GatewayOptions {
  std::string model_name = "default";
  int max_tokens = 1024;
  int concurrency = 4;
  std::shared_ptr<RequestLog> log;
};

/// The one path by which agents, judges and generators reach a model.
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<ChatModel> chat, std::shared_ptr<EmbeddingModel> embedder = {},
                   GatewayOptions options = {});

  /// Throws EmptyCompletionError (after logging) when the completion text is blank.
  ModelResponse complete(PromptTemplateId id, std::string prompt, double temperature,
                         std::optional<int> max_tokens = std::nullopt);

  /// Like complete(), but an empty completion is retried once before the error escapes.
  ModelResponse complete_retrying_empty(PromptTemplateId id, const std::string& prompt,
                                        double temperature,
                                        std::optional<int> max_tokens = std::nullopt);

  /// One vector per text, order preserved. Throws ValidationError on empty input and
  /// ProviderContractError on mixed dimensions or non-finite components.
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

  int concurrency() const { return options_.concurrency; }
  const std::string& model_name() const { return options_.model_name; }
  std::string chat_identity() const;
  std::string embedding_identity() const;

 private:
  std::shared_ptr<ChatModel> chat_;
  std::shared_ptr<EmbeddingModel> embedder_;
  GatewayOptions options_;
  std::unique_ptr<std::counting_semaphore<256>> slots_;
};

/// Checks the invariants every provider must honor; shared by the HTTP and mock embedders.
void check_embeddings(const std::vector<EmbeddingVector>& vectors, std::size_t expected_count);

/// Runs fn(0..n-1) on up to `limit` threads; results come back in index order.
/// The first exception thrown by any task is rethrown after all tasks finish.
template <typename Fn>
auto parallel_map(std::size_t n, int limit, Fn fn) -> std::vector<decltype(fn(std::size_t{}))>;

}  // namespace followup

#include "followup/detail/parallel.hpp"
