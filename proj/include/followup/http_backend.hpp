#pragma once

#include <string>
#include <vector>

#include "followup/gateway.hpp"

namespace followup {

/// One chat-completions exchange against an OpenAI-compatible server.
/// Connection failures, 429 and 5xx are retried up to config.max_retries times with
/// exponential backoff; 401/403 raise AuthError at once; other statuses raise TransportError.
ModelResponse complete_chat(const ModelRequest& request, const BackendConfig& config);

/// POST {endpoint}/embeddings. Same retry policy as complete_chat.
std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                         const BackendConfig& config, const std::string& model);

/// Throws TransportError when nothing answers at the endpoint. Any HTTP status counts as alive.
void probe_endpoint(const BackendConfig& config);

class HttpChatModel : public ChatModel {
 public:
  explicit HttpChatModel(BackendConfig config);
  ModelResponse complete(const ModelRequest& request) override;
  std::string identity() const override;

 private:
  BackendConfig config_;
};

class HttpEmbeddingModel : public EmbeddingModel {
 public:
  HttpEmbeddingModel(BackendConfig config, std::string model);
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  std::string identity() const override;

 private:
  BackendConfig config_;
  std::string model_;
};

}  // namespace followup
