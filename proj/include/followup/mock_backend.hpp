#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "followup/gateway.hpp"

namespace followup {

struct MockReply {
  enum class Kind { text, transport_error, auth_error };

  Kind kind = Kind::text;
  std::string text;
  int status = 0;

  static MockReply ok(std::string text) { return {Kind::text, std::move(text), 200}; }
  static MockReply transport(int status = 503) { return {Kind::transport_error, {}, status}; }
  static MockReply auth(int status = 401) { return {Kind::auth_error, {}, status}; }
};

using MockResponder = std::function<MockReply(const ModelRequest&)>;

/// Scripted chat backend for offline runs and tests.
///
/// A call for template T resolves, first match wins, through:
///   1. substring rules registered for T, then wildcard substring rules (in insertion order);
///   2. the responder for T;
///   3. the ordinal script for T, indexed by how many times T was called before;
///   4. the default reply for T, then the wildcard default.
/// With nothing matching, the call throws ConfigError. The ordinal counter advances on every
/// call to T, whichever rule answered it.
class MockChatModel : public ChatModel {
 public:
  void script(PromptTemplateId id, std::vector<MockReply> replies);
  void script_texts(PromptTemplateId id, const std::vector<std::string>& replies);
  /// `id == nullopt` matches every template.
  void on_substring(std::optional<PromptTemplateId> id, std::string needle, MockReply reply);
  void set_default(std::optional<PromptTemplateId> id, MockReply reply);
  void set_responder(PromptTemplateId id, MockResponder responder);

  ModelResponse complete(const ModelRequest& request) override;
  std::string identity() const override { return "mock"; }

  std::size_t calls(PromptTemplateId id) const;
  std::size_t total_calls() const;
  std::vector<ModelRequest> requests() const;
  std::vector<ModelRequest> requests(PromptTemplateId id) const;

  /// Builds a mock from the JSON script format documented in the README.
  static std::shared_ptr<MockChatModel> from_json(const nlohmann::json& script);

 private:
  struct SubstringRule {
    std::optional<PromptTemplateId> id;
    std::string needle;
    MockReply reply;
  };

  mutable std::mutex mutex_;
  std::map<PromptTemplateId, std::vector<MockReply>> ordinal_;
  std::vector<SubstringRule> substring_rules_;
  std::map<PromptTemplateId, MockReply> defaults_;
  std::optional<MockReply> wildcard_default_;
  std::map<PromptTemplateId, MockResponder> responders_;
  std::map<PromptTemplateId, std::size_t> counts_;
  std::vector<ModelRequest> log_;
};

/// Ready-made responders, also reachable from JSON scripts by name.
namespace responders {
/// Judge prompt: "yes" when the Question A and Question B texts normalize equal, else "no".
MockResponder identical_judge();
/// Echoes the last numbered list found in the prompt.
MockResponder echo_list();
MockResponder constant(std::string text);
/// Contrastive prompt: a Root/Positive/Negative triple built around the requested topic.
MockResponder contrastive_from_topic();
/// Synthetic-message prompt: a short message naming the target topics and duration.
MockResponder synth_from_features();
}  // namespace responders

/// Deterministic unit vector for `text`: FNV-1a-64 of the text, xor'd with the
/// mixed seed, drives one SplitMix64 draw per component, mapped to [-1, 1) then L2-normalized.
std::vector<double> mock_embedding(std::string_view text, std::size_t dimension, std::uint64_t seed);

class MockEmbeddingModel : public EmbeddingModel {
 public:
  explicit MockEmbeddingModel(std::size_t dimension = 8, std::uint64_t seed = 0);

  /// Overrides the hash embedding for one exact text.
  void pin(std::string text, std::vector<double> vector);

  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  std::string identity() const override;

  static std::shared_ptr<MockEmbeddingModel> from_json(const nlohmann::json& spec);

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
  std::unordered_map<std::string, std::vector<double>> pinned_;
};

}  // namespace followup
