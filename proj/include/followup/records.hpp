#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "followup/domain.hpp"

namespace followup {

enum class RecordStatus { ok, partial, failed };

std::string_view to_string(RecordStatus s);
RecordStatus record_status_from_string(std::string_view s);

/// One line of a pool / prediction file: the question set generated for a case plus its
/// error ledger. Filtering rewrites only `questions`, so an unfiltered record round-trips
/// byte-for-byte.
struct PredictionRecord {
  std::string case_id;
  std::string mode;
  RecordStatus status = RecordStatus::ok;
  std::string message;
  QuestionSet questions;
  std::map<std::string, std::size_t> agent_counts;
  std::vector<std::string> diagnoses;
  std::vector<std::string> symptoms;
  std::vector<AgentIssue> errors;
  std::vector<std::string> warnings;
};

nlohmann::ordered_json record_to_json(const PredictionRecord& r);
/// Accepts full records and the minimal {"case_id", "questions": ["...", ...]} form used by
/// externally produced predictions. Throws ValidationError.
PredictionRecord record_from_json(const nlohmann::json& j);

std::vector<PredictionRecord> read_predictions(std::istream& in, const std::string& source_name = "<stream>");
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);
void write_predictions(const std::vector<PredictionRecord>& records, std::ostream& out);
void save_predictions(const std::vector<PredictionRecord>& records, const std::filesystem::path& path);

/// case_id -> question set. Throws ValidationError on duplicate case ids.
std::map<std::string, QuestionSet> predictions_by_case(const std::vector<PredictionRecord>& records);

}  // namespace followup
