#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "followup/dataset.hpp"
#include "followup/domain.hpp"
#include "followup/gateway.hpp"
#include "followup/prompts.hpp"
#include "followup/rng.hpp"

namespace followup {

struct WeightedValue {
  std::string value;
  double weight = 0.0;

  bool operator==(const WeightedValue&) const = default;
};

/// Topic list plus the four weighted category tables used to describe a synthetic message.
struct CategoryTables {
  std::vector<std::string> topics;
  std::vector<WeightedValue> duration;
  std::vector<WeightedValue> urgency;
  std::vector<WeightedValue> reporting_level;
  std::vector<WeightedValue> health_literacy;
  std::string note;

  /// Throws ConfigError: empty topic list or table, negative weight, or weights that do
  /// not sum to 1 within 1e-9.
  void validate() const;
};

/// {"topics": [...], "duration": [{"value", "weight"}, ...], "urgency": ..., ...}
CategoryTables load_category_tables(const std::filesystem::path& path);
CategoryTables parse_category_tables(const nlohmann::json& j);
std::filesystem::path default_synth_dir();

struct MessageSpec {
  std::vector<std::string> topics;
  std::string duration;
  std::string urgency;
  std::string reporting_level;
  std::string health_literacy;
  int age = 0;
  std::string gender;

  bool operator==(const MessageSpec&) const = default;
};

nlohmann::ordered_json spec_to_json(const MessageSpec& spec);
MessageSpec spec_from_json(const nlohmann::json& j);

/// Reads "Age: N" and "Gender: X" lines from the demographics text.
/// Throws ValidationError when either is absent.
std::pair<int, std::string> parse_age_gender(const std::string& demographics);

/// Index drawn with probability proportional to weight.
std::size_t sample_weighted(Rng& rng, std::span<const WeightedValue> table);

/// One or two topics (size chosen uniformly, then drawn without replacement), one value per
/// table, and age/gender copied from the chart. Deterministic for a given seed.
MessageSpec sample_message_spec(std::uint64_t seed, const EhrRecord& ehr, const CategoryTables& tables);
MessageSpec sample_message_spec(Rng& rng, const EhrRecord& ehr, const CategoryTables& tables);

struct SynthExemplar {
  MessageSpec spec;
  std::string message;
};

/// JSON lines of {"features": {...spec fields...}, "message": "..."}.
std::vector<SynthExemplar> load_synth_exemplars(const std::filesystem::path& path);

struct SynthOptions {
  std::size_t expected_exemplars = 3;
  double temperature = 0.6;
  int max_tokens = 1024;
  const PromptKit* prompts = nullptr;
};

std::string render_synth_prompt(const MessageSpec& spec, std::span<const SynthExemplar> exemplars,
                                const PromptKit& prompts = PromptKit::shared());

/// Throws ValidationError when the exemplar count differs from options.expected_exemplars and
/// EmptyCompletionError when the model returns nothing twice.
PatientMessage generate_synthetic_message(const MessageSpec& spec, std::span<const SynthExemplar> exemplars,
                                          Gateway& gateway, const SynthOptions& options = {});

struct SynthRecord {
  PatientCase patient;
  MessageSpec spec;
};

struct SynthBatch {
  std::vector<SynthRecord> records;
  /// One line per spec whose generation failed and was skipped.
  std::vector<std::string> failures;
};

/// Draws n (chart, spec) pairs sequentially from `seed`, then generates messages concurrently.
/// Records keep draw order; ground truth is left empty for annotators.
SynthBatch generate_synth_batch(std::span<const EhrRecord> ehr_pool, std::size_t n, std::uint64_t seed,
                                const CategoryTables& tables, std::span<const SynthExemplar> exemplars,
                                Gateway& gateway, const SynthOptions& options = {});

struct ContrastiveSample {
  std::string root;
  std::string positive;
  std::string negative;
  std::string topic;

  bool operator==(const ContrastiveSample&) const = default;
};

/// Reads "Root:", "Positive:" and "Negative:" lines. nullopt if any part is missing, empty,
/// or equal to another part.
std::optional<ContrastiveSample> parse_contrastive(std::string_view completion, const std::string& topic);

/// One retry on a malformed completion; nullopt means the sample is rejected.
std::optional<ContrastiveSample> generate_contrastive_sample(const std::string& topic, Gateway& gateway,
                                                             double temperature = 0.6,
                                                             const PromptKit& prompts = PromptKit::shared());

/// Lowercased whitespace tokens with punctuation removed; tokens left empty are dropped.
std::vector<std::string> ngram_tokens(std::string_view text);

/// Set of word n-grams over a protected corpus.
class NgramIndex {
 public:
  NgramIndex(std::span<const std::string> corpus, std::size_t n);
  bool leaks(std::string_view candidate) const;
  std::size_t n() const { return n_; }
  std::size_t size() const { return grams_.size(); }

 private:
  std::size_t n_;
  std::unordered_set<std::string> grams_;
};

/// True iff the candidate shares any word n-gram with any protected string. Throws
/// ValidationError for n < 1.
bool ngram_leak_filter(std::string_view candidate, std::span<const std::string> protected_corpus,
                       std::size_t n);

/// Accepts JSON lines with "a"/"b" fields, dataset records (their ground-truth questions),
/// or plain text lines.
std::vector<std::string> load_protected_corpus(const std::filesystem::path& path);

struct JudgeDataOptions {
  std::size_t ngram_n = 5;
  std::uint64_t seed = 20250101;
  double temperature = 0.6;
  /// Generation attempts allowed per requested sample before the run gives up.
  std::size_t attempts_per_sample = 3;
  int concurrency = 1;
  const PromptKit* prompts = nullptr;
};

struct JudgeDataResult {
  std::vector<ContrastiveSample> accepted;
  std::size_t rejected_malformed = 0;
  std::size_t rejected_leak = 0;
  std::size_t backend_failures = 0;
  std::size_t attempts = 0;
};

/// Generates until `n` samples pass parsing and the leak filter or the attempt budget runs out.
/// Topics are drawn per attempt from a seed-derived stream, so the result is order-stable.
JudgeDataResult generate_judge_data(std::span<const std::string> topics, std::size_t n,
                                    const NgramIndex& protected_index, Gateway& gateway,
                                    const JudgeDataOptions& options = {});

/// Two judge fine-tuning records per sample: (root, positive) -> "yes", (root, negative) -> "no".
std::vector<nlohmann::ordered_json> judge_training_pairs(std::span<const ContrastiveSample> samples,
                                                         const PromptKit& prompts = PromptKit::shared());

}  // namespace followup
