#include "followup/pipeline.hpp"

#include <array>
#include <unordered_set>

#include "followup/text.hpp"

namespace followup {

std::string_view to_string(Scenario s) {
  return s == Scenario::best_case ? "best_case" : "worst_case";
}

namespace {

constexpr std::string_view kNoneListed = "None listed.";

std::string or_none(const std::string& s) {
  return text::is_blank(s) ? std::string(kNoneListed) : s;
}

std::string message_binding(const PatientCase& c, const PipelineConfig& config) {
  if (!config.ehr_in_clarification) return c.message.text();
  return c.message.text() + "\n\n### Demographics ###\n" + or_none(c.ehr.demographics) +
         "\n\n### Medical History ###\n" + or_none(c.ehr.history) + "\n\n### Medications ###\n" +
         or_none(c.ehr.medications);
}

struct ListOutcome {
  std::vector<std::string> items;
  bool ok = false;
};

// Asks for a numbered list. An empty or list-free completion is retried once;
// backend errors escape to the caller.
ListOutcome request_list(PromptTemplateId id, const std::string& prompt, AgentContext ctx) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      auto response = ctx.gateway.complete(id, prompt, ctx.config.temperature, ctx.config.max_tokens);
      auto items = parse_numbered_list(response.text);
      if (!items.empty()) return {std::move(items), true};
    } catch (const EmptyCompletionError&) {
    }
  }
  return {};
}

void truncate_to(std::vector<std::string>& items, int k, const std::string& who,
                 std::vector<std::string>& warnings) {
  if (items.size() > static_cast<std::size_t>(k)) {
    warnings.push_back(who + ": model returned " + std::to_string(items.size()) +
                       " items for k=" + std::to_string(k) + "; kept the first " +
                       std::to_string(k));
    items.resize(static_cast<std::size_t>(k));
  }
}

// Shared body of every "render, ask for k questions, tag" agent.
AgentResult question_agent(PromptTemplateId id, const Bindings& bindings, int k, AgentId agent,
                           const std::string& label, const std::string& stage, AgentContext ctx) {
  if (k < 1) throw ValidationError("k must be >= 1");
  AgentResult result;
  const std::string who = std::string(to_string(agent)) + (label.empty() ? "" : "(" + label + ")");
  try {
    auto outcome = request_list(id, ctx.prompts.render(id, bindings), ctx);
    if (!outcome.ok) {
      result.errors.push_back({std::string(to_string(agent)), stage,
                               "no numbered list in completion after one retry"});
      return result;
    }
    truncate_to(outcome.items, k, who, result.warnings);
    result.raw_count = outcome.items.size();
    result.questions = QuestionSet::from_texts(outcome.items, agent, label);
  } catch (const BackendError& e) {
    result.errors.push_back({std::string(to_string(agent)), stage, e.what()});
  }
  return result;
}

std::string lower_key(const std::string& s) { return text::to_lower(text::trim(s)); }

}  // namespace

std::string strip_sentinel(std::string_view extracted) {
  static const std::unordered_set<std::string> sentinels = {
      "none",          "n/a",           "na",
      "nothing",       "nothing relevant", "not applicable",
      "null",          "-",             "no relevant information",
      "no relevant history", "no relevant medications", "none relevant",
      "none listed",
  };
  std::string t = text::trim(extracted);
  std::string key = text::to_lower(t);
  while (!key.empty() && (key.back() == '.' || key.back() == '*' || key.back() == '"'))
    key.pop_back();
  while (!key.empty() && (key.front() == '*' || key.front() == '"')) key.erase(key.begin());
  key = text::trim(key);
  if (key.empty() || sentinels.contains(key)) return {};
  return t;
}

RelevantContext extract_relevant_context(Facet facet, const PatientCase& c, AgentContext ctx) {
  RelevantContext out;
  out.facet = facet;
  PromptTemplateId id;
  Bindings b{{"msg", c.message.text()}};
  if (facet == Facet::history) {
    id = PromptTemplateId::extract_history;
    b["demographics"] = or_none(c.ehr.demographics);
    b["history"] = or_none(c.ehr.history);
  } else {
    id = PromptTemplateId::extract_meds;
    b["medications"] = or_none(c.ehr.medications);
  }
  try {
    auto response = ctx.gateway.complete_retrying_empty(id, ctx.prompts.render(id, b),
                                                        ctx.config.temperature,
                                                        ctx.config.max_tokens);
    out.extracted_text = strip_sentinel(response.text);
  } catch (const EmptyCompletionError&) {
    out.degraded = true;
  }
  return out;
}

AgentResult generate_ehr_questions(Facet facet, const PatientCase& c, const RelevantContext& context,
                                   int k, AgentContext ctx) {
  const bool hist = facet == Facet::history;
  Bindings b{{"msg", c.message.text()},
             {"k", std::to_string(k)},
             {hist ? "history" : "medications", or_none(context.extracted_text)}};
  auto result = question_agent(hist ? PromptTemplateId::gen_history : PromptTemplateId::gen_meds, b,
                               k, hist ? AgentId::history : AgentId::medication, "", "generate", ctx);
  if (context.degraded)
    result.warnings.push_back(std::string(hist ? "history" : "medication") +
                              ": extraction returned nothing; generated from an empty context");
  return result;
}

DifferentialResult generate_differential(const PatientCase& c, int k, AgentContext ctx) {
  if (k < 1) throw ValidationError("k must be >= 1");
  DifferentialResult out;
  std::unordered_set<std::string> seen;
  const Bindings b{{"msg", c.message.text()}, {"k", std::to_string(k)}};
  int failures = 0;
  for (auto [id, scenario] : {std::pair{PromptTemplateId::best_case, Scenario::best_case},
                              std::pair{PromptTemplateId::worst_case, Scenario::worst_case}}) {
    const std::string stage(to_string(scenario));
    try {
      auto outcome = request_list(id, ctx.prompts.render(id, b), ctx);
      if (!outcome.ok) {
        out.errors.push_back({"differential", stage, "no numbered list in completion after one retry"});
        ++failures;
        continue;
      }
      truncate_to(outcome.items, k, "differential(" + stage + ")", out.warnings);
      for (auto& label : outcome.items) {
        if (seen.insert(lower_key(label)).second)
          out.differential.diagnoses.push_back({text::trim(label), scenario});
      }
    } catch (const BackendError& e) {
      out.errors.push_back({"differential", stage, e.what()});
      ++failures;
    }
  }
  if (failures == 2) throw PipelineError("differential: both scenario calls failed", out.errors);
  if (failures == 1) out.warnings.push_back("differential: one scenario call failed; using the other");
  return out;
}

AgentResult generate_ruleout_questions(const PatientCase& c, const std::string& diagnosis, int k,
                                       AgentContext ctx) {
  if (text::is_blank(diagnosis)) throw ValidationError("diagnosis label is empty");
  Bindings b{{"msg", c.message.text()}, {"k", std::to_string(k)}, {"suspected_issue", diagnosis}};
  return question_agent(PromptTemplateId::rule_out, b, k, AgentId::differential, diagnosis,
                        "rule_out:" + diagnosis, ctx);
}

AgentResult run_clarification_agent(ClarificationKind kind, const PatientCase& c, AgentContext ctx) {
  const auto& cfg = ctx.config;
  const std::string msg = message_binding(c, cfg);
  switch (kind) {
    case ClarificationKind::selftreat:
      return question_agent(PromptTemplateId::clar_selftreat,
                            {{"msg", msg}, {"k", std::to_string(cfg.k_selftreat)}}, cfg.k_selftreat,
                            AgentId::clar_selftreat, "", "generate", ctx);
    case ClarificationKind::temporal:
      return question_agent(PromptTemplateId::clar_temporal,
                            {{"msg", msg}, {"k", std::to_string(cfg.k_temporal)}}, cfg.k_temporal,
                            AgentId::clar_temporal, "", "generate", ctx);
    case ClarificationKind::ambiguity:
      return question_agent(PromptTemplateId::clar_ambiguity,
                            {{"msg", msg}, {"k", std::to_string(cfg.k_ambiguity)}},
                            cfg.k_ambiguity, AgentId::clar_ambiguity, "", "generate", ctx);
    case ClarificationKind::symptom:
      break;
  }

  AgentResult result;
  std::vector<std::string> symptoms;
  try {
    auto response = ctx.gateway.complete_retrying_empty(
        PromptTemplateId::extract_symptoms,
        ctx.prompts.render(PromptTemplateId::extract_symptoms, {{"msg", msg}}), cfg.temperature,
        cfg.max_tokens);
    std::unordered_set<std::string> seen;
    for (auto& s : parse_numbered_list(response.text)) {
      std::string symptom = strip_sentinel(s);
      if (!symptom.empty() && seen.insert(lower_key(symptom)).second)
        symptoms.push_back(std::move(symptom));
    }
  } catch (const EmptyCompletionError&) {
    result.warnings.push_back("clar_symptom: symptom extraction returned nothing");
  } catch (const BackendError& e) {
    result.errors.push_back({"clar_symptom", "extract_symptoms", e.what()});
    return result;
  }

  std::size_t index = 0;
  for (const auto& symptom : symptoms) {
    auto one = question_agent(PromptTemplateId::clar_symptom,
                              {{"msg", msg}, {"symptom", symptom}, {"k", std::to_string(cfg.k_symptom)}},
                              cfg.k_symptom, AgentId::clar_symptom, "", "questions:" + symptom, ctx);
    result.raw_count += one.raw_count;
    for (const auto& q : one.questions.items())
      result.questions.add(q, {AgentId::clar_symptom, "", index++});
    result.errors.insert(result.errors.end(), one.errors.begin(), one.errors.end());
    result.warnings.insert(result.warnings.end(), one.warnings.begin(), one.warnings.end());
  }
  result.symptoms = std::move(symptoms);
  return result;
}

std::size_t pool_size_bound(const PipelineConfig& config, std::size_t symptom_count) {
  auto k = [](int v) { return static_cast<std::size_t>(v); };
  return 2 * k(config.k_ehr) + 2 * k(config.k_diff) * k(config.k_diff) +
         symptom_count * k(config.k_symptom) + k(config.k_selftreat) + k(config.k_temporal) +
         k(config.k_ambiguity);
}

namespace {

struct UnitOutcome {
  AgentId agent;
  AgentResult result;
  std::vector<Diagnosis> diagnoses;
  int failed_units = 0;
};

UnitOutcome run_ehr_unit(Facet facet, const PatientCase& c, AgentContext ctx) {
  UnitOutcome out{facet == Facet::history ? AgentId::history : AgentId::medication, {}, {}, 0};
  try {
    auto context = extract_relevant_context(facet, c, ctx);
    out.result = generate_ehr_questions(facet, c, context, ctx.config.k_ehr, ctx);
  } catch (const BackendError& e) {
    out.result.errors.push_back({std::string(to_string(out.agent)), "extract", e.what()});
  }
  out.failed_units = out.result.errors.empty() ? 0 : 1;
  return out;
}

UnitOutcome run_differential_unit(const PatientCase& c, AgentContext ctx) {
  UnitOutcome out{AgentId::differential, {}, {}, 0};
  DifferentialResult diff;
  try {
    diff = generate_differential(c, ctx.config.k_diff, ctx);
  } catch (const PipelineError& e) {
    out.result.errors = e.issues();
    out.failed_units = 2;
    return out;
  }
  out.failed_units = static_cast<int>(diff.errors.size());
  out.result.errors = diff.errors;
  out.result.warnings = diff.warnings;
  out.diagnoses = diff.differential.diagnoses;
  for (const auto& d : diff.differential.diagnoses) {
    auto one = generate_ruleout_questions(c, d.label, ctx.config.k_diff, ctx);
    out.result.raw_count += one.raw_count;
    for (std::size_t i = 0; i < one.questions.size(); ++i)
      out.result.questions.add(one.questions.items()[i], one.questions.provenance()[i]);
    out.result.errors.insert(out.result.errors.end(), one.errors.begin(), one.errors.end());
    out.result.warnings.insert(out.result.warnings.end(), one.warnings.begin(), one.warnings.end());
  }
  return out;
}

UnitOutcome run_clarification_unit(ClarificationKind kind, const PatientCase& c, AgentContext ctx) {
  static constexpr std::array<AgentId, 4> ids = {AgentId::clar_symptom, AgentId::clar_selftreat,
                                                 AgentId::clar_temporal, AgentId::clar_ambiguity};
  UnitOutcome out{ids[static_cast<std::size_t>(kind)], {}, {}, 0};
  out.result = run_clarification_agent(kind, c, ctx);
  if (kind == ClarificationKind::symptom) {
    // The unit failed if extraction failed, or if every per-symptom call did.
    bool extraction_failed = !out.result.errors.empty() && out.result.symptoms.empty();
    bool all_failed = !out.result.symptoms.empty() &&
                      out.result.errors.size() == out.result.symptoms.size();
    out.failed_units = extraction_failed || all_failed ? 1 : 0;
  } else {
    out.failed_units = out.result.errors.empty() ? 0 : 1;
  }
  return out;
}

}  // namespace

QuestionPool build_question_pool(const PatientCase& c, AgentContext ctx) {
  ctx.config.validate();
  constexpr std::size_t kUnits = 7;
  auto outcomes = parallel_map(kUnits, ctx.gateway.concurrency(), [&](std::size_t i) {
    switch (i) {
      case 0: return run_ehr_unit(Facet::history, c, ctx);
      case 1: return run_ehr_unit(Facet::medication, c, ctx);
      case 2: return run_differential_unit(c, ctx);
      default: return run_clarification_unit(static_cast<ClarificationKind>(i - 3), c, ctx);
    }
  });

  QuestionPool pool;
  int failed = 0;
  for (auto& o : outcomes) {
    const auto& qs = o.result.questions;
    for (std::size_t i = 0; i < qs.size(); ++i) pool.questions.add(qs.items()[i], qs.provenance()[i]);
    pool.source_breakdown[std::string(to_string(o.agent))] = o.result.raw_count;
    pool.errors.insert(pool.errors.end(), o.result.errors.begin(), o.result.errors.end());
    pool.warnings.insert(pool.warnings.end(), o.result.warnings.begin(), o.result.warnings.end());
    if (o.agent == AgentId::differential) pool.diagnoses = o.diagnoses;
    if (o.agent == AgentId::clar_symptom) pool.symptoms = o.result.symptoms;
    failed += o.failed_units;
  }
  if (failed == 8) throw PipelineError("every agent failed for case " + c.id, pool.errors);
  return pool;
}

}  // namespace followup
