#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "followup/dataset.hpp"
#include "followup/domain.hpp"
#include "followup/gateway.hpp"
#include "followup/prompts.hpp"

namespace followup {

struct JudgeVerdict {
  std::size_t truth_index = 0;
  std::size_t generated_index = 0;
  bool match = false;
  std::string raw_text;
  /// No yes/no could be read from the completion, even after the retry.
  bool parse_failure = false;
  /// The backend failed for this pair; scored as a non-match.
  bool transport_failure = false;

  bool flagged() const { return parse_failure || transport_failure; }
};

/// "yes"/"no" at the start of the completion (case-insensitive, leading quotes and
/// markdown emphasis ignored, must be a whole word). nullopt when neither.
std::optional<bool> parse_yes_no(std::string_view completion);

/// Judge prompt with the ground-truth question bound to A and the generated one to B.
std::string render_judge_prompt(const Question& truth, const Question& generated,
                                const PromptKit& prompts = PromptKit::shared());

class Judge {
 public:
  virtual ~Judge() = default;
  virtual JudgeVerdict judge(const Question& truth, const Question& generated) = 0;
  virtual std::string identity() const = 0;
};

struct LlmJudgeOptions {
  double temperature = 0.0;
  int max_tokens = 16;
  const PromptKit* prompts = nullptr;
};

/// Asks the model through the judge template. An unreadable answer is retried once and then
/// recorded as a flagged non-match; transport failures are flagged non-matches too.
/// AuthError propagates: it is a configuration problem, not a per-pair one.
class LlmJudge : public Judge {
 public:
  explicit LlmJudge(Gateway& gateway, LlmJudgeOptions options = {});
  JudgeVerdict judge(const Question& truth, const Question& generated) override;
  std::string identity() const override;

 private:
  Gateway& gateway_;
  LlmJudgeOptions options_;
};

/// Offline fallback: match iff the normalized forms are equal.
class ExactMatchJudge : public Judge {
 public:
  JudgeVerdict judge(const Question& truth, const Question& generated) override;
  std::string identity() const override { return "exact-match"; }
};

JudgeVerdict judge_pair(const Question& truth, const Question& generated, Gateway& gateway);

/// Dense |Q| x |Q̂| verdict matrix. Rows are ground-truth questions, columns generated ones.
class MatchMatrix {
 public:
  MatchMatrix() = default;
  MatchMatrix(std::size_t rows, std::size_t cols, bool coverage_only = false);
  /// Fully judged matrix from boolean rows (all rows must have equal length).
  static MatchMatrix from_rows(const std::vector<std::vector<bool>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool coverage_only() const { return coverage_only_; }

  void set(std::size_t i, std::size_t j, bool match, bool flagged = false);
  /// Appends a fully judged column (one verdict per row).
  void add_column(const std::vector<bool>& column);

  bool at(std::size_t i, std::size_t j) const;
  bool judged(std::size_t i, std::size_t j) const;
  bool flagged(std::size_t i, std::size_t j) const;
  bool row_covered(std::size_t i) const;
  std::size_t covered_rows() const;
  std::size_t judged_count() const;
  std::size_t flagged_count() const;

  /// Every pair judged; in coverage-only mode a row may stop after its first match.
  bool fully_populated() const;

 private:
  std::uint8_t& cell(std::size_t i, std::size_t j) { return cells_[i * cols_ + j]; }
  std::uint8_t cell(std::size_t i, std::size_t j) const { return cells_[i * cols_ + j]; }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  bool coverage_only_ = false;
  std::vector<std::uint8_t> cells_;
};

struct MatchOptions {
  /// Stop judging a truth row at its first match. Off by default; full matrices feed analysis.
  bool coverage_only = false;
  int concurrency = 1;
};

/// Throws ValidationError when truth is empty.
MatchMatrix match_sets(const QuestionSet& truth, const QuestionSet& generated, Judge& judge,
                       MatchOptions options = {});

/// Covered truth rows / |Q|. Throws ValidationError for |Q| = 0 or a partially judged matrix.
double compute_rim(const MatchMatrix& matrix);

struct SampleScore {
  std::string case_id;
  double rim = 0.0;
  std::size_t matched = 0;
  std::size_t truth_count = 0;
  std::size_t generated_count = 0;
  std::size_t judged_pairs = 0;
  std::size_t flagged_pairs = 0;

  bool operator==(const SampleScore&) const = default;
};

struct Aggregates {
  double mr_percent = 0.0;
  double global_match = 0.0;
  double mean_generated = 0.0;
  double mean_rim = 0.0;
};

/// Throws ValidationError on empty input. A sample counts toward MR% iff matched == truth_count.
Aggregates compute_aggregates(std::span<const SampleScore> samples);

struct EvaluationReport {
  std::vector<SampleScore> per_sample;
  double mr_percent = 0.0;
  double global_match = 0.0;
  double mean_generated = 0.0;
  double mean_rim = 0.0;
  std::size_t judged_pairs = 0;
  std::size_t flagged_pairs = 0;
  /// More than `unreliable_fraction` of all verdicts were flagged.
  bool unreliable = false;
  std::string judge_identity;
  bool coverage_only = false;
  /// Cases without ground-truth questions; RIM is undefined for them.
  std::vector<std::string> skipped_cases;
};

struct EvalOptions {
  MatchOptions match;
  double unreliable_fraction = 0.10;
};

/// Every case with ground truth needs a prediction entry (which may be empty); all missing ids
/// are reported in one ValidationError. Cases without ground truth are skipped and listed.
EvaluationReport evaluate_dataset(const Dataset& dataset,
                                  const std::map<std::string, QuestionSet>& predictions,
                                  Judge& judge, EvalOptions options = {});

/// "0.58 / 36": global match to two decimals, mean question count rounded half away from zero.
std::string format_match_cell(double global_match, double mean_generated);
/// Fixed-width table: one header row and one row for `label`.
std::string render_report_table(const EvaluationReport& report, const std::string& label);
nlohmann::ordered_json report_to_json(const EvaluationReport& report);

/// Labeled judge test pair: does B elicit what A asks for?
struct LabeledPair {
  std::string a;
  std::string b;
  bool match = false;
};

/// JSON lines of {"a": ..., "b": ..., "match": true|false}.
std::vector<LabeledPair> load_labeled_pairs(const std::filesystem::path& path);

struct ClassificationScore {
  double macro_f1 = 0.0;
  double f1_yes = 0.0;
  double f1_no = 0.0;
  double accuracy = 0.0;
  std::size_t flagged = 0;
};

/// Mean of the per-class F1 for the yes and no classes. A class with no support and no
/// predictions scores 0.
ClassificationScore macro_f1(std::span<const bool> labels, std::span<const bool> predictions);

ClassificationScore score_judge(Judge& judge, std::span<const LabeledPair> pairs, int concurrency = 1);

}  // namespace followup
