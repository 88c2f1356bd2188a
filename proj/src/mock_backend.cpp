#include "followup/mock_backend.hpp"

#include <cmath>

#include "followup/domain.hpp"
#include "followup/errors.hpp"
#include "followup/rng.hpp"
#include "followup/text.hpp"

namespace followup {

void MockChatModel::script(PromptTemplateId id, std::vector<MockReply> replies) {
  std::lock_guard lock(mutex_);
  ordinal_[id] = std::move(replies);
}

void MockChatModel::script_texts(PromptTemplateId id, const std::vector<std::string>& replies) {
  std::vector<MockReply> out;
  out.reserve(replies.size());
  for (const auto& r : replies) out.push_back(MockReply::ok(r));
  script(id, std::move(out));
}

void MockChatModel::on_substring(std::optional<PromptTemplateId> id, std::string needle,
                                 MockReply reply) {
  std::lock_guard lock(mutex_);
  substring_rules_.push_back({id, std::move(needle), std::move(reply)});
}

void MockChatModel::set_default(std::optional<PromptTemplateId> id, MockReply reply) {
  std::lock_guard lock(mutex_);
  if (id) {
    defaults_[*id] = std::move(reply);
  } else {
    wildcard_default_ = std::move(reply);
  }
}

void MockChatModel::set_responder(PromptTemplateId id, MockResponder responder) {
  std::lock_guard lock(mutex_);
  responders_[id] = std::move(responder);
}

ModelResponse MockChatModel::complete(const ModelRequest& request) {
  request.validate();
  std::optional<MockReply> reply;
  MockResponder responder;
  {
    std::lock_guard lock(mutex_);
    const auto id = request.template_id;
    const std::size_t ordinal = counts_[id]++;
    log_.push_back(request);
    for (int pass = 0; pass < 2 && !reply; ++pass) {
      for (const auto& rule : substring_rules_) {
        bool scope = pass == 0 ? rule.id == id : !rule.id.has_value();
        if (scope && request.rendered_prompt.find(rule.needle) != std::string::npos) {
          reply = rule.reply;
          break;
        }
      }
    }
    if (!reply) {
      if (auto it = responders_.find(id); it != responders_.end()) responder = it->second;
    }
    if (!reply && !responder) {
      if (auto it = ordinal_.find(id); it != ordinal_.end() && ordinal < it->second.size()) {
        reply = it->second[ordinal];
      } else if (auto d = defaults_.find(id); d != defaults_.end()) {
        reply = d->second;
      } else if (wildcard_default_) {
        reply = wildcard_default_;
      }
    }
  }
  // Responders run outside the lock so they may be slow or re-entrant.
  if (!reply && responder) reply = responder(request);
  if (!reply)
    throw ConfigError("mock backend: no reply scripted for template '" +
                      std::string(to_string(request.template_id)) + "'");

  switch (reply->kind) {
    case MockReply::Kind::transport_error:
      throw TransportError("mock transport failure (HTTP " + std::to_string(reply->status) + ")",
                           reply->status, 1);
    case MockReply::Kind::auth_error:
      throw AuthError("mock authentication failure", reply->status);
    case MockReply::Kind::text:
      break;
  }
  ModelResponse out;
  out.text = reply->text;
  out.prompt_tokens = static_cast<int>(text::split_whitespace(request.rendered_prompt).size());
  out.completion_tokens = static_cast<int>(text::split_whitespace(out.text).size());
  return out;
}

std::size_t MockChatModel::calls(PromptTemplateId id) const {
  std::lock_guard lock(mutex_);
  auto it = counts_.find(id);
  return it == counts_.end() ? 0 : it->second;
}

std::size_t MockChatModel::total_calls() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

std::vector<ModelRequest> MockChatModel::requests() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::vector<ModelRequest> MockChatModel::requests(PromptTemplateId id) const {
  std::lock_guard lock(mutex_);
  std::vector<ModelRequest> out;
  for (const auto& r : log_) {
    if (r.template_id == id) out.push_back(r);
  }
  return out;
}

namespace {

MockReply reply_from_json(const nlohmann::json& j) {
  if (j.is_string()) return MockReply::ok(j.get<std::string>());
  if (j.is_object() && j.contains("error")) {
    auto kind = j["error"].get<std::string>();
    int status = j.value("status", kind == "auth" ? 401 : 503);
    if (kind == "transport") return MockReply::transport(status);
    if (kind == "auth") return MockReply::auth(status);
    throw ConfigError("mock script: unknown error kind '" + kind + "'");
  }
  if (j.is_object() && j.contains("text")) return MockReply::ok(j["text"].get<std::string>());
  throw ConfigError("mock script: a reply must be a string or an object with 'text' or 'error'");
}

MockResponder responder_by_name(const std::string& name) {
  if (name == "identical") return responders::identical_judge();
  if (name == "echo_list") return responders::echo_list();
  if (name == "yes") return responders::constant("yes");
  if (name == "no") return responders::constant("no");
  if (name == "contrastive") return responders::contrastive_from_topic();
  if (name == "synth") return responders::synth_from_features();
  throw ConfigError("mock script: unknown responder '" + name + "'");
}

std::string line_after(const std::string& s, std::string_view label) {
  auto pos = s.rfind(label);
  if (pos == std::string::npos) return {};
  pos += label.size();
  auto end = s.find('\n', pos);
  return text::trim(s.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
}

}  // namespace

std::shared_ptr<MockChatModel> MockChatModel::from_json(const nlohmann::json& script) {
  auto mock = std::make_shared<MockChatModel>();
  if (!script.is_object()) throw ConfigError("mock script must be a JSON object");
  if (!script.contains("chat")) return mock;
  for (const auto& [name, spec] : script["chat"].items()) {
    std::optional<PromptTemplateId> id;
    if (name != "*") id = template_from_string(name);
    if (spec.contains("match")) {
      for (const auto& rule : spec["match"]) {
        mock->on_substring(id, rule.at("contains").get<std::string>(), reply_from_json(rule.at("reply")));
      }
    }
    if (spec.contains("default")) mock->set_default(id, reply_from_json(spec["default"]));
    if (!id) continue;
    if (spec.contains("responder"))
      mock->set_responder(*id, responder_by_name(spec["responder"].get<std::string>()));
    if (spec.contains("replies")) {
      std::vector<MockReply> replies;
      for (const auto& r : spec["replies"]) replies.push_back(reply_from_json(r));
      mock->script(*id, std::move(replies));
    }
  }
  return mock;
}

namespace responders {

MockResponder identical_judge() {
  return [](const ModelRequest& request) {
    std::string a = line_after(request.rendered_prompt, "Question A:");
    std::string b = line_after(request.rendered_prompt, "Question B:");
    if (a.empty() || b.empty()) return MockReply::ok("no");
    return MockReply::ok(normalize_question(a) == normalize_question(b) ? "yes" : "no");
  };
}

MockResponder echo_list() {
  return [](const ModelRequest& request) {
    return MockReply::ok(text::format_numbered_list(parse_numbered_list(request.rendered_prompt)));
  };
}

MockResponder constant(std::string reply) {
  return [reply = std::move(reply)](const ModelRequest&) { return MockReply::ok(reply); };
}

MockResponder contrastive_from_topic() {
  return [](const ModelRequest& request) {
    const std::string& p = request.rendered_prompt;
    const std::string marker = "this time about ";
    auto pos = p.rfind(marker);
    std::string topic = "it";
    if (pos != std::string::npos) {
      pos += marker.size();
      auto end = p.find(". Use the labels", pos);
      topic = text::trim(p.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
    }
    return MockReply::ok("Root: When did the " + topic + " begin?\nPositive: How long ago did you first notice the " +
                         topic + "?\nNegative: Does anyone else at home have " + topic + " right now?");
  };
}

MockResponder synth_from_features() {
  return [](const ModelRequest& request) {
    std::string topics = line_after(request.rendered_prompt, "Topics:");
    std::string duration = line_after(request.rendered_prompt, "Duration:");
    return MockReply::ok("Hello, I have been dealing with " + topics + " for " + duration +
                         ". What should I do?");
  };
}

}  // namespace responders

std::vector<double> mock_embedding(std::string_view text, std::size_t dimension,
                                   std::uint64_t seed) {
  const std::uint64_t base = fnv1a64(text) ^ splitmix64_mix(seed);
  std::vector<double> v(dimension);
  double norm = 0.0;
  for (std::size_t i = 0; i < dimension; ++i) {
    std::uint64_t bits = splitmix64_mix(base + 0x9E3779B97F4A7C15ULL * (i + 1));
    v[i] = 2.0 * to_unit_interval(bits) - 1.0;
    norm += v[i] * v[i];
  }
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (auto& x : v) x /= norm;
  }
  return v;
}

MockEmbeddingModel::MockEmbeddingModel(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension_ == 0) throw ConfigError("mock embedding dimension must be positive");
}

void MockEmbeddingModel::pin(std::string text, std::vector<double> vector) {
  if (vector.size() != dimension_)
    throw ConfigError("pinned embedding has dimension " + std::to_string(vector.size()) +
                      ", expected " + std::to_string(dimension_));
  pinned_[std::move(text)] = std::move(vector);
}

std::vector<EmbeddingVector> MockEmbeddingModel::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ValidationError("embed: no texts given");
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    if (text::is_blank(t)) throw ValidationError("embed: empty text");
    if (auto it = pinned_.find(t); it != pinned_.end()) {
      out.push_back({it->second});
    } else {
      out.push_back({mock_embedding(t, dimension_, seed_)});
    }
  }
  return out;
}

std::string MockEmbeddingModel::identity() const {
  return "mock-embedding(dim=" + std::to_string(dimension_) + ",seed=" + std::to_string(seed_) + ")";
}

std::shared_ptr<MockEmbeddingModel> MockEmbeddingModel::from_json(const nlohmann::json& spec) {
  auto model = std::make_shared<MockEmbeddingModel>(spec.value("dimension", std::size_t{8}),
                                                    spec.value("seed", std::uint64_t{0}));
  if (spec.contains("pinned")) {
    for (const auto& [text, vec] : spec["pinned"].items())
      model->pin(text, vec.get<std::vector<double>>());
  }
  return model;
}

}  // namespace followup
