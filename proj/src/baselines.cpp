#include "followup/baselines.hpp"

#include <fstream>

#include "json.hpp"

#include "followup/text.hpp"

namespace followup {

std::string_view to_string(BaselineMode mode) {
  switch (mode) {
    case BaselineMode::unbounded: return "unbounded";
    case BaselineMode::k_fixed: return "k_fixed";
    case BaselineMode::long_thought: return "long_thought";
  }
  return "unknown";
}

std::vector<FewShotExample> load_example_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open example bank " + path.string());
  std::vector<FewShotExample> bank;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank(line)) continue;
    try {
      auto j = nlohmann::json::parse(line);
      FewShotExample ex;
      ex.id = j.at("id").get<std::string>();
      ex.message = j.at("message").get<std::string>();
      const auto& ehr = j.at("ehr");
      ex.ehr = {ehr.at("demographics").get<std::string>(), ehr.at("history").get<std::string>(),
                ehr.at("medications").get<std::string>()};
      ex.questions = j.at("questions").get<std::vector<std::string>>();
      ex.provenance = j.value("provenance", std::string("reconstructed"));
      if (ex.questions.empty()) throw ConfigError("exemplar has no questions");
      bank.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return bank;
}

std::filesystem::path default_example_bank_path() {
  return default_asset_dir() / "fewshot" / "bank.jsonl";
}

void BaselineConfig::validate() const {
  if (mode == BaselineMode::k_fixed && k < 1) throw ValidationError("k must be >= 1");
  if (shots < 0) throw ValidationError("shots must be >= 0");
  if (static_cast<std::size_t>(shots) > example_bank.size())
    throw ValidationError("shots (" + std::to_string(shots) + ") exceeds the example bank size (" +
                          std::to_string(example_bank.size()) + ")");
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw ValidationError("temperature must be in [0, 2]");
  if (max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
}

std::string length_instruction(const BaselineConfig& config) {
  if (config.mode == BaselineMode::k_fixed)
    return "Please write exactly " + std::to_string(config.k) + " questions.";
  return "Write as many questions as you need.";
}

namespace {
std::string or_placeholder(const std::string& s) { return text::is_blank(s) ? "None listed." : s; }
}  // namespace

std::string render_examples_block(std::span<const FewShotExample> examples) {
  std::string out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    out += "### Example " + std::to_string(i + 1) + " ###\n";
    out += "Demographics:\n" + or_placeholder(ex.ehr.demographics) + "\n";
    out += "Medical History:\n" + or_placeholder(ex.ehr.history) + "\n";
    out += "Medications:\n" + or_placeholder(ex.ehr.medications) + "\n";
    out += "Patient Message:\n" + ex.message + "\n";
    out += "Follow-up Questions:\n" + text::format_numbered_list(ex.questions) + "\n\n";
  }
  return out;
}

std::string render_baseline_prompt(const PatientCase& c, const BaselineConfig& config,
                                   const PromptKit& prompts) {
  std::span<const FewShotExample> shots(config.example_bank.data(),
                                        static_cast<std::size_t>(config.shots));
  return prompts.render(PromptTemplateId::baseline_core,
                        {{"length_instruction", length_instruction(config)},
                         {"examples", render_examples_block(shots)},
                         {"demographics", or_placeholder(c.ehr.demographics)},
                         {"history", or_placeholder(c.ehr.history)},
                         {"medications", or_placeholder(c.ehr.medications)},
                         {"msg", c.message.text()}});
}

BaselineResult generate_baseline(const PatientCase& c, const BaselineConfig& config, Gateway& gateway,
                                 const PromptKit& prompts) {
  config.validate();
  BaselineResult result;
  result.prompt = render_baseline_prompt(c, config, prompts);
  const std::string agent(to_string(AgentId::baseline));
  const std::string stage(to_string(config.mode));
  std::vector<std::string> items;
  try {
    for (int attempt = 0; attempt < 2 && items.empty(); ++attempt) {
      try {
        auto resp = gateway.complete(PromptTemplateId::baseline_core, result.prompt,
                                     config.temperature, config.max_tokens);
        items = parse_numbered_list(resp.text);
      } catch (const EmptyCompletionError&) {
      }
    }
  } catch (const BackendError& e) {
    result.errors.push_back({agent, stage, e.what()});
    return result;
  }
  if (items.empty()) {
    result.errors.push_back({agent, stage, "no numbered list in completion after one retry"});
    return result;
  }
  if (config.mode == BaselineMode::k_fixed && items.size() > static_cast<std::size_t>(config.k)) {
    result.warnings.push_back("baseline: model returned " + std::to_string(items.size()) +
                              " items for k=" + std::to_string(config.k) + "; kept the first " +
                              std::to_string(config.k));
    items.resize(static_cast<std::size_t>(config.k));
  }
  result.raw_count = items.size();
  result.questions = QuestionSet::from_texts(items, AgentId::baseline);
  return result;
}

}  // namespace followup
