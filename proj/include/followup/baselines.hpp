#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "followup/domain.hpp"
#include "followup/gateway.hpp"
#include "followup/prompts.hpp"

namespace followup {

enum class BaselineMode { unbounded, k_fixed, long_thought };

std::string_view to_string(BaselineMode mode);

/// One worked example for few-shot prompting: a chart, a message and the questions a
/// provider asked about it.
struct FewShotExample {
  std::string id;
  EhrRecord ehr;
  std::string message;
  std::vector<std::string> questions;
  std::string provenance;
};

/// JSON lines of {"id", "message", "ehr": {...}, "questions": [...], "provenance"}.
std::vector<FewShotExample> load_example_bank(const std::filesystem::path& path);
std::filesystem::path default_example_bank_path();

struct BaselineConfig {
  BaselineMode mode = BaselineMode::unbounded;
  int k = 40;  // used by k_fixed only
  int shots = 0;
  std::vector<FewShotExample> example_bank;
  double temperature = 0.6;
  int max_tokens = 1024;

  /// Throws ValidationError: k < 1 in k_fixed mode, shots < 0 or shots > |example_bank|.
  void validate() const;
};

/// "Write as many questions as you need." for unbounded and long-thought modes,
/// "Please write exactly {k} questions." for k_fixed.
std::string length_instruction(const BaselineConfig& config);

/// Empty for zero exemplars; otherwise one "### Example n ###" section per exemplar.
std::string render_examples_block(std::span<const FewShotExample> examples);

std::string render_baseline_prompt(const PatientCase& c, const BaselineConfig& config,
                                   const PromptKit& prompts = PromptKit::shared());

struct BaselineResult {
  QuestionSet questions;
  std::size_t raw_count = 0;
  std::vector<AgentIssue> errors;
  std::vector<std::string> warnings;
  std::string prompt;
};

/// Parses the last numbered list in the completion (reasoning may precede it). k_fixed output
/// is truncated to k. No list after one retry gives an empty set plus an error record.
BaselineResult generate_baseline(const PatientCase& c, const BaselineConfig& config, Gateway& gateway,
                                 const PromptKit& prompts = PromptKit::shared());

}  // namespace followup
