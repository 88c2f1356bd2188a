#include "followup/evaluation.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "followup/text.hpp"

namespace followup {

namespace {
constexpr std::uint8_t kJudged = 1;
constexpr std::uint8_t kMatch = 2;
constexpr std::uint8_t kFlag = 4;
}  // namespace

std::optional<bool> parse_yes_no(std::string_view completion) {
  std::size_t i = 0;
  while (i < completion.size()) {
    unsigned char c = static_cast<unsigned char>(completion[i]);
    if (std::isspace(c) || c == '"' || c == '\'' || c == '*' || c == '`' || c == '_') {
      ++i;
    } else {
      break;
    }
  }
  auto rest = completion.substr(i);
  auto word_at = [&](std::string_view w) {
    if (!text::starts_with_ci(rest, w)) return false;
    return rest.size() == w.size() || !std::isalpha(static_cast<unsigned char>(rest[w.size()]));
  };
  if (word_at("yes")) return true;
  if (word_at("no")) return false;
  return std::nullopt;
}

std::string render_judge_prompt(const Question& truth, const Question& generated,
                                const PromptKit& prompts) {
  return prompts.render(PromptTemplateId::judge_match, {{"A", truth.text()}, {"B", generated.text()}});
}

LlmJudge::LlmJudge(Gateway& gateway, LlmJudgeOptions options)
    : gateway_(gateway), options_(options) {}

std::string LlmJudge::identity() const { return "llm:" + gateway_.chat_identity(); }

JudgeVerdict LlmJudge::judge(const Question& truth, const Question& generated) {
  const PromptKit& kit = options_.prompts ? *options_.prompts : PromptKit::shared();
  const std::string prompt = render_judge_prompt(truth, generated, kit);
  JudgeVerdict v;
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      auto resp = gateway_.complete(PromptTemplateId::judge_match, prompt, options_.temperature,
                                    options_.max_tokens);
      v.raw_text = resp.text;
      if (auto parsed = parse_yes_no(resp.text)) {
        v.match = *parsed;
        v.parse_failure = false;
        return v;
      }
      v.parse_failure = true;
    } catch (const EmptyCompletionError&) {
      v.raw_text.clear();
      v.parse_failure = true;
    } catch (const AuthError&) {
      throw;
    } catch (const BackendError& e) {
      v.raw_text = e.what();
      v.match = false;
      v.transport_failure = true;
      return v;
    }
  }
  v.match = false;
  return v;
}

JudgeVerdict ExactMatchJudge::judge(const Question& truth, const Question& generated) {
  JudgeVerdict v;
  v.match = truth.normalized() == generated.normalized();
  v.raw_text = v.match ? "yes" : "no";
  return v;
}

JudgeVerdict judge_pair(const Question& truth, const Question& generated, Gateway& gateway) {
  LlmJudge judge(gateway);
  return judge.judge(truth, generated);
}

MatchMatrix::MatchMatrix(std::size_t rows, std::size_t cols, bool coverage_only)
    : rows_(rows), cols_(cols), coverage_only_(coverage_only), cells_(rows * cols, 0) {}

MatchMatrix MatchMatrix::from_rows(const std::vector<std::vector<bool>>& rows) {
  std::size_t cols = rows.empty() ? 0 : rows.front().size();
  MatchMatrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw ValidationError("ragged match matrix rows");
    for (std::size_t j = 0; j < cols; ++j) m.set(i, j, rows[i][j]);
  }
  return m;
}

void MatchMatrix::set(std::size_t i, std::size_t j, bool match, bool flagged) {
  if (i >= rows_ || j >= cols_) throw ValidationError("match matrix index out of range");
  cell(i, j) = static_cast<std::uint8_t>(kJudged | (match ? kMatch : 0) | (flagged ? kFlag : 0));
}

void MatchMatrix::add_column(const std::vector<bool>& column) {
  if (column.size() != rows_) throw ValidationError("column height differs from row count");
  std::vector<std::uint8_t> next(rows_ * (cols_ + 1), 0);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) next[i * (cols_ + 1) + j] = cell(i, j);
    next[i * (cols_ + 1) + cols_] = static_cast<std::uint8_t>(kJudged | (column[i] ? kMatch : 0));
  }
  cells_ = std::move(next);
  ++cols_;
}

bool MatchMatrix::at(std::size_t i, std::size_t j) const { return cell(i, j) & kMatch; }
bool MatchMatrix::judged(std::size_t i, std::size_t j) const { return cell(i, j) & kJudged; }
bool MatchMatrix::flagged(std::size_t i, std::size_t j) const { return cell(i, j) & kFlag; }

bool MatchMatrix::row_covered(std::size_t i) const {
  for (std::size_t j = 0; j < cols_; ++j) {
    if (cell(i, j) & kMatch) return true;
  }
  return false;
}

std::size_t MatchMatrix::covered_rows() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < rows_; ++i) n += row_covered(i) ? 1 : 0;
  return n;
}

std::size_t MatchMatrix::judged_count() const {
  std::size_t n = 0;
  for (auto c : cells_) n += (c & kJudged) ? 1 : 0;
  return n;
}

std::size_t MatchMatrix::flagged_count() const {
  std::size_t n = 0;
  for (auto c : cells_) n += (c & kFlag) ? 1 : 0;
  return n;
}

bool MatchMatrix::fully_populated() const {
  for (std::size_t i = 0; i < rows_; ++i) {
    bool all = true;
    for (std::size_t j = 0; j < cols_; ++j) all = all && judged(i, j);
    if (all) continue;
    if (!coverage_only_ || !row_covered(i)) return false;
  }
  return true;
}

MatchMatrix match_sets(const QuestionSet& truth, const QuestionSet& generated, Judge& judge,
                       MatchOptions options) {
  if (truth.empty()) throw ValidationError("cannot match against an empty ground-truth set");
  const std::size_t rows = truth.size();
  const std::size_t cols = generated.size();
  MatchMatrix m(rows, cols, options.coverage_only);
  if (cols == 0) return m;
  const auto& t = truth.items();
  const auto& g = generated.items();
  if (options.coverage_only) {
    auto row_results = parallel_map(rows, options.concurrency, [&](std::size_t i) {
      std::vector<JudgeVerdict> row;
      for (std::size_t j = 0; j < cols; ++j) {
        row.push_back(judge.judge(t[i], g[j]));
        if (row.back().match) break;
      }
      return row;
    });
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < row_results[i].size(); ++j)
        m.set(i, j, row_results[i][j].match, row_results[i][j].flagged());
    }
    return m;
  }
  auto verdicts = parallel_map(rows * cols, options.concurrency, [&](std::size_t k) {
    return judge.judge(t[k / cols], g[k % cols]);
  });
  for (std::size_t k = 0; k < verdicts.size(); ++k)
    m.set(k / cols, k % cols, verdicts[k].match, verdicts[k].flagged());
  return m;
}

double compute_rim(const MatchMatrix& matrix) {
  if (matrix.rows() == 0) throw ValidationError("RIM is undefined for an empty ground-truth set");
  if (!matrix.fully_populated()) throw ValidationError("match matrix is not fully judged");
  return static_cast<double>(matrix.covered_rows()) / static_cast<double>(matrix.rows());
}

Aggregates compute_aggregates(std::span<const SampleScore> samples) {
  if (samples.empty()) throw ValidationError("no samples to aggregate");
  std::size_t perfect = 0;
  std::size_t matched = 0;
  std::size_t truth = 0;
  std::size_t generated = 0;
  double rim_sum = 0.0;
  for (const auto& s : samples) {
    if (s.truth_count == 0) throw ValidationError("sample " + s.case_id + " has no ground truth");
    perfect += s.matched == s.truth_count ? 1 : 0;
    matched += s.matched;
    truth += s.truth_count;
    generated += s.generated_count;
    rim_sum += s.rim;
  }
  const double n = static_cast<double>(samples.size());
  Aggregates a;
  a.mr_percent = 100.0 * static_cast<double>(perfect) / n;
  a.global_match = static_cast<double>(matched) / static_cast<double>(truth);
  a.mean_generated = static_cast<double>(generated) / n;
  a.mean_rim = rim_sum / n;
  return a;
}

EvaluationReport evaluate_dataset(const Dataset& dataset,
                                  const std::map<std::string, QuestionSet>& predictions,
                                  Judge& judge, EvalOptions options) {
  std::vector<std::string> missing;
  std::size_t scorable = 0;
  for (const auto& c : dataset.cases) {
    if (c.ground_truth.empty()) continue;
    ++scorable;
    if (!predictions.contains(c.id)) missing.push_back(c.id);
  }
  if (!missing.empty())
    throw ValidationError("missing predictions for case ids: " + text::join(missing, ", "));
  if (scorable == 0) throw ValidationError("dataset has no case with ground-truth questions");

  EvaluationReport report;
  report.judge_identity = judge.identity();
  report.coverage_only = options.match.coverage_only;
  for (const auto& c : dataset.cases) {
    // RIM is undefined without ground truth; such cases are listed, not scored.
    if (c.ground_truth.empty()) {
      report.skipped_cases.push_back(c.id);
      continue;
    }
    const QuestionSet& pred = predictions.at(c.id);
    MatchMatrix m = match_sets(c.ground_truth, pred, judge, options.match);
    SampleScore s;
    s.case_id = c.id;
    s.rim = compute_rim(m);
    s.matched = m.covered_rows();
    s.truth_count = c.ground_truth.size();
    s.generated_count = pred.size();
    s.judged_pairs = m.judged_count();
    s.flagged_pairs = m.flagged_count();
    report.judged_pairs += s.judged_pairs;
    report.flagged_pairs += s.flagged_pairs;
    report.per_sample.push_back(std::move(s));
  }
  auto agg = compute_aggregates(report.per_sample);
  report.mr_percent = agg.mr_percent;
  report.global_match = agg.global_match;
  report.mean_generated = agg.mean_generated;
  report.mean_rim = agg.mean_rim;
  report.unreliable = static_cast<double>(report.flagged_pairs) >
                      options.unreliable_fraction * static_cast<double>(report.judged_pairs);
  return report;
}

std::string format_match_cell(double global_match, double mean_generated) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f / %lld", global_match, std::llround(mean_generated));
  return buf;
}

std::string render_report_table(const EvaluationReport& report, const std::string& label) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-24s %-14s %8s %9s %8s\n", "system", "match / mean", "MR%",
                "mean RIM", "samples");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-24s %-14s %8.2f %9.3f %8zu\n", label.c_str(),
                format_match_cell(report.global_match, report.mean_generated).c_str(),
                report.mr_percent, report.mean_rim, report.per_sample.size());
  out += buf;
  if (report.unreliable) {
    std::snprintf(buf, sizeof buf, "UNRELIABLE: %zu of %zu verdicts flagged\n", report.flagged_pairs,
                  report.judged_pairs);
    out += buf;
  }
  return out;
}

nlohmann::ordered_json report_to_json(const EvaluationReport& report) {
  nlohmann::ordered_json j;
  j["mr_percent"] = report.mr_percent;
  j["global_match"] = report.global_match;
  j["mean_generated"] = report.mean_generated;
  j["mean_rim"] = report.mean_rim;
  j["table_cell"] = format_match_cell(report.global_match, report.mean_generated);
  j["judged_pairs"] = report.judged_pairs;
  j["flagged_pairs"] = report.flagged_pairs;
  j["unreliable"] = report.unreliable;
  j["judge"] = report.judge_identity;
  j["coverage_only"] = report.coverage_only;
  j["skipped_cases"] = report.skipped_cases;
  auto& rows = j["per_sample"] = nlohmann::ordered_json::array();
  for (const auto& s : report.per_sample) {
    rows.push_back({{"case_id", s.case_id},
                    {"rim", s.rim},
                    {"matched", s.matched},
                    {"truth_count", s.truth_count},
                    {"generated_count", s.generated_count},
                    {"judged_pairs", s.judged_pairs},
                    {"flagged_pairs", s.flagged_pairs}});
  }
  return j;
}

std::vector<LabeledPair> load_labeled_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open labeled pairs " + path.string());
  std::vector<LabeledPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank(line)) continue;
    try {
      auto j = nlohmann::json::parse(line);
      pairs.push_back({j.at("a").get<std::string>(), j.at("b").get<std::string>(),
                       j.at("match").get<bool>()});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return pairs;
}

ClassificationScore macro_f1(std::span<const bool> labels, std::span<const bool> predictions) {
  if (labels.size() != predictions.size()) throw ValidationError("label/prediction count mismatch");
  if (labels.empty()) throw ValidationError("no labeled pairs");
  auto f1_for = [&](bool cls) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (predictions[i] == cls && labels[i] == cls) ++tp;
      else if (predictions[i] == cls) ++fp;
      else if (labels[i] == cls) ++fn;
    }
    std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  };
  ClassificationScore s;
  s.f1_yes = f1_for(true);
  s.f1_no = f1_for(false);
  s.macro_f1 = (s.f1_yes + s.f1_no) / 2.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += labels[i] == predictions[i] ? 1 : 0;
  s.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  return s;
}

ClassificationScore score_judge(Judge& judge, std::span<const LabeledPair> pairs, int concurrency) {
  auto verdicts = parallel_map(pairs.size(), concurrency, [&](std::size_t i) {
    return judge.judge(Question(pairs[i].a), Question(pairs[i].b));
  });
  // std::vector<bool> is not contiguous, so spans need plain arrays.
  auto labels = std::make_unique<bool[]>(pairs.size());
  auto preds = std::make_unique<bool[]>(pairs.size());
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    labels[i] = pairs[i].match;
    preds[i] = verdicts[i].match;
    flagged += verdicts[i].flagged() ? 1 : 0;
  }
  auto s = macro_f1(std::span<const bool>(labels.get(), pairs.size()),
                    std::span<const bool>(preds.get(), pairs.size()));
  s.flagged = flagged;
  return s;
}

}  // namespace followup
