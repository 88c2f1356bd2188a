#include "followup/domain.hpp"

#include <array>

#include "followup/text.hpp"

namespace followup {

std::string normalize_question(std::string_view text) {
  if (text::is_blank(text)) throw ValidationError("question text is empty");
  std::string out = text::collapse_whitespace(text::to_lower(text));
  while (!out.empty() && (out.back() == '?' || out.back() == '.' || out.back() == ' '))
    out.pop_back();
  // "why?" style inputs that are only punctuation keep their text rather than vanish.
  if (text::is_blank(out)) return text::collapse_whitespace(text::to_lower(text));
  return out;
}

PatientMessage::PatientMessage(std::string text) : text_(std::move(text)) {
  if (text::is_blank(text_)) throw ValidationError("patient message is empty");
}

Question::Question(std::string text) : text_(std::move(text)) {
  normalized_ = normalize_question(text_);
}

namespace {
constexpr std::array<std::string_view, 9> kAgentNames = {
    "history",        "medication",    "differential", "clar_symptom", "clar_selftreat",
    "clar_temporal",  "clar_ambiguity", "baseline",    "external",
};
}  // namespace

std::string_view to_string(AgentId id) { return kAgentNames[static_cast<std::size_t>(id)]; }

AgentId agent_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kAgentNames.size(); ++i) {
    if (kAgentNames[i] == name) return static_cast<AgentId>(i);
  }
  throw ValidationError("unknown agent id '" + std::string(name) + "'");
}

QuestionSet QuestionSet::from_texts(const std::vector<std::string>& texts, AgentId agent,
                                    const std::string& label) {
  QuestionSet out;
  std::size_t index = 0;
  for (const auto& t : texts) {
    if (text::is_blank(t)) continue;
    out.add(Question(text::trim(t)), QuestionProvenance{agent, label, index++});
  }
  return out;
}

bool QuestionSet::add(Question question, QuestionProvenance provenance) {
  if (!seen_.insert(question.normalized()).second) return false;
  items_.push_back(std::move(question));
  provenance_.push_back(std::move(provenance));
  return true;
}

bool QuestionSet::contains(std::string_view normalized) const {
  return seen_.contains(std::string(normalized));
}

std::optional<std::size_t> QuestionSet::find(std::string_view normalized) const {
  if (!contains(normalized)) return std::nullopt;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].normalized() == normalized) return i;
  }
  return std::nullopt;
}

std::vector<std::string> QuestionSet::texts() const {
  std::vector<std::string> out;
  out.reserve(items_.size());
  for (const auto& q : items_) out.push_back(q.text());
  return out;
}

void PipelineConfig::validate() const {
  const std::array<std::pair<const char*, int>, 6> ks = {{{"k_ehr", k_ehr},
                                                          {"k_diff", k_diff},
                                                          {"k_symptom", k_symptom},
                                                          {"k_ambiguity", k_ambiguity},
                                                          {"k_temporal", k_temporal},
                                                          {"k_selftreat", k_selftreat}}};
  for (const auto& [name, value] : ks) {
    if (value < 1) throw ValidationError(std::string(name) + " must be >= 1");
  }
  if (!(temperature >= 0.0 && temperature <= 2.0))
    throw ValidationError("temperature must be within [0, 2]");
  if (max_tokens < 1) throw ValidationError("max_tokens must be positive");
}

}  // namespace followup
