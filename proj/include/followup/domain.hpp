#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "followup/errors.hpp"

namespace followup {

/// Lowercases, collapses whitespace and strips the trailing run of '?' / '.'.
/// Used only for exact-duplicate detection. Throws ValidationError on blank input.
std::string normalize_question(std::string_view text);

class PatientMessage {
 public:
  explicit PatientMessage(std::string text);
  const std::string& text() const { return text_; }
  bool operator==(const PatientMessage&) const = default;

 private:
  std::string text_;
};

/// Demographics, history and medications, each kept as flat chart text.
struct EhrRecord {
  std::string demographics;
  std::string history;
  std::string medications;

  bool operator==(const EhrRecord&) const = default;
};

class Question {
 public:
  explicit Question(std::string text);

  const std::string& text() const { return text_; }
  const std::string& normalized() const { return normalized_; }
  bool operator==(const Question&) const = default;

 private:
  std::string text_;
  std::string normalized_;
};

/// Declaration order is the canonical pool order.
enum class AgentId : std::uint8_t {
  history,
  medication,
  differential,
  clar_symptom,
  clar_selftreat,
  clar_temporal,
  clar_ambiguity,
  baseline,
  external,
};

std::string_view to_string(AgentId id);
AgentId agent_from_string(std::string_view name);

struct QuestionProvenance {
  AgentId agent = AgentId::external;
  std::string label;  // diagnosis label for AgentId::differential, empty otherwise
  std::size_t index = 0;

  bool operator==(const QuestionProvenance&) const = default;
};

/// Ordered, exact-duplicate-free list of questions with parallel provenance.
class QuestionSet {
 public:
  QuestionSet() = default;

  /// Builds a set from raw strings; blank strings and duplicates are skipped.
  static QuestionSet from_texts(const std::vector<std::string>& texts, AgentId agent,
                                const std::string& label = {});

  /// Returns false (and keeps the set unchanged) when the normalized form is already present.
  bool add(Question question, QuestionProvenance provenance);
  bool contains(std::string_view normalized) const;
  /// Index of the item with this normalized form.
  std::optional<std::size_t> find(std::string_view normalized) const;

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<Question>& items() const { return items_; }
  const std::vector<QuestionProvenance>& provenance() const { return provenance_; }
  std::vector<std::string> texts() const;

  bool operator==(const QuestionSet& other) const {
    return items_ == other.items_ && provenance_ == other.provenance_;
  }

 private:
  std::vector<Question> items_;
  std::vector<QuestionProvenance> provenance_;
  std::unordered_set<std::string> seen_;
};

struct PatientCase {
  std::string id;
  PatientMessage message;
  EhrRecord ehr;
  QuestionSet ground_truth;

  bool operator==(const PatientCase&) const = default;
};

struct PipelineConfig {
  int k_ehr = 1;
  int k_diff = 3;
  int k_symptom = 2;
  int k_ambiguity = 3;
  int k_temporal = 3;
  int k_selftreat = 2;
  double temperature = 0.6;
  std::uint64_t seed = 20250101;
  int max_tokens = 1024;
  /// Pass EHR text to the clarification agents as well (off: they see the message only).
  bool ehr_in_clarification = false;

  /// Throws ValidationError when a k is < 1 or temperature is outside [0, 2].
  void validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

}  // namespace followup
