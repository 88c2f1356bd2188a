#pragma once

#include <map>
#include <string>
#include <vector>

#include "followup/domain.hpp"
#include "followup/gateway.hpp"
#include "followup/prompts.hpp"

namespace followup {

enum class Facet { history, medication };

struct RelevantContext {
  Facet facet = Facet::history;
  std::string extracted_text;
  /// Set when the model returned nothing usable twice and the text was left empty.
  bool degraded = false;
};

enum class Scenario { best_case, worst_case };

std::string_view to_string(Scenario s);

struct Diagnosis {
  std::string label;
  Scenario scenario = Scenario::best_case;

  bool operator==(const Diagnosis&) const = default;
};

struct DifferentialDiagnosis {
  std::vector<Diagnosis> diagnoses;
};

/// Output of one agent (or one fan-out unit) plus everything that went wrong in it.
struct AgentResult {
  QuestionSet questions;
  /// Items parsed from the model, after truncation to k, before de-duplication.
  std::size_t raw_count = 0;
  std::vector<AgentIssue> errors;
  std::vector<std::string> warnings;
  /// Symptoms found by the symptom-inquiry agent's extraction step.
  std::vector<std::string> symptoms;
};

struct DifferentialResult {
  DifferentialDiagnosis differential;
  std::vector<AgentIssue> errors;
  std::vector<std::string> warnings;
};

struct QuestionPool {
  QuestionSet questions;
  /// Raw per-agent counts before the union removed duplicates.
  std::map<std::string, std::size_t> source_breakdown;
  std::vector<AgentIssue> errors;
  std::vector<std::string> warnings;
  std::vector<Diagnosis> diagnoses;
  std::vector<std::string> symptoms;
};

enum class ClarificationKind { symptom, selftreat, temporal, ambiguity };

/// Everything an agent needs besides the case itself.
struct AgentContext {
  const PipelineConfig& config;
  Gateway& gateway;
  const PromptKit& prompts = PromptKit::shared();
};

/// Maps "NONE", "N/A" and similar "nothing relevant" replies to the empty string.
std::string strip_sentinel(std::string_view extracted);

RelevantContext extract_relevant_context(Facet facet, const PatientCase& c, AgentContext ctx);

AgentResult generate_ehr_questions(Facet facet, const PatientCase& c, const RelevantContext& context,
                                   int k, AgentContext ctx);

/// Throws PipelineError (carrying both issues) when the best- and worst-case calls both fail.
DifferentialResult generate_differential(const PatientCase& c, int k, AgentContext ctx);

AgentResult generate_ruleout_questions(const PatientCase& c, const std::string& diagnosis, int k,
                                       AgentContext ctx);

AgentResult run_clarification_agent(ClarificationKind kind, const PatientCase& c, AgentContext ctx);

/// Runs every agent and unions the outputs in canonical agent order.
/// Throws PipelineError when all eight agent units fail.
QuestionPool build_question_pool(const PatientCase& c, AgentContext ctx);

/// Upper bound on the pool size for a given number of extracted symptoms.
std::size_t pool_size_bound(const PipelineConfig& config, std::size_t symptom_count);

}  // namespace followup
