#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace followup {

enum class PromptTemplateId {
  extract_history,
  extract_meds,
  gen_history,
  gen_meds,
  best_case,
  worst_case,
  rule_out,
  extract_symptoms,
  clar_symptom,
  clar_selftreat,
  clar_temporal,
  clar_ambiguity,
  redundant_filter,
  top_k,
  judge_match,
  baseline_core,
  synth_message,
  contrastive_gen,
};

inline constexpr std::size_t kPromptTemplateCount = 18;

std::string_view to_string(PromptTemplateId id);
/// Throws ConfigError for unknown names.
PromptTemplateId template_from_string(std::string_view name);
const std::array<PromptTemplateId, kPromptTemplateCount>& all_template_ids();

enum class PromptProvenance { verbatim, adapted, reconstructed };

std::string_view to_string(PromptProvenance p);

using Bindings = std::map<std::string, std::string, std::less<>>;

/// A prompt body with `{name}` placeholders. `{{` and `}}` render as literal braces.
class PromptTemplate {
 public:
  PromptTemplate(PromptTemplateId id, PromptProvenance provenance, std::string body);

  PromptTemplateId id() const { return id_; }
  PromptProvenance provenance() const { return provenance_; }
  const std::string& body() const { return body_; }
  /// Distinct placeholder names in order of first appearance.
  const std::vector<std::string>& placeholders() const { return placeholders_; }

  /// Single-pass substitution; bound values are never re-scanned. Throws RenderError.
  std::string render(const Bindings& bindings) const;

 private:
  PromptTemplateId id_;
  PromptProvenance provenance_;
  std::string body_;
  std::vector<std::string> placeholders_;
};

/// The full template set, loaded from an asset directory holding one `<id>.txt` per template.
/// Each file starts with a `# provenance: verbatim|adapted|reconstructed` line.
class PromptKit {
 public:
  static PromptKit load(const std::filesystem::path& dir);
  /// Loads from $FOLLOWUP_ASSETS/prompts, falling back to the source tree's assets.
  static const PromptKit& shared();

  const PromptTemplate& get(PromptTemplateId id) const;
  std::string render(PromptTemplateId id, const Bindings& bindings) const;

 private:
  std::map<PromptTemplateId, PromptTemplate> templates_;
};

/// Directory holding prompts/, fewshot/ and synth/ assets.
std::filesystem::path default_asset_dir();

/// Items of the last numbered list in `text` ("1)", "1." or "1:" markers, one or many lines).
/// Returns an empty list when nothing list-like is present.
std::vector<std::string> parse_numbered_list(std::string_view text);

}  // namespace followup
