#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "followup/domain.hpp"

namespace followup {

inline constexpr std::string_view kSchemaVersion = "1";

/// A JSON-lines dataset. Each line is one case:
///   {"id", "message", "ehr": {"demographics", "history", "medications"},
///    "ground_truth_questions": [...], "schema_version"?, "source_tag"?}
/// Unknown keys are ignored so that later schema versions can add fields.
struct Dataset {
  std::vector<PatientCase> cases;
  std::string source_tag;
  std::string schema_version = std::string(kSchemaVersion);

  const PatientCase* find(std::string_view id) const;
  bool operator==(const Dataset&) const = default;
};

/// Validates every record and reports all problems at once, each with its line number.
/// Throws ValidationError; never returns a partial dataset.
Dataset load_dataset(const std::filesystem::path& path);
Dataset read_dataset(std::istream& in, const std::string& source_name = "<stream>");

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
void write_dataset(const Dataset& dataset, std::ostream& out);

nlohmann::ordered_json case_to_json(const PatientCase& c, const Dataset& dataset);
nlohmann::ordered_json ehr_to_json(const EhrRecord& ehr);
/// Throws ValidationError naming the offending field (e.g. "ehr.medications").
EhrRecord ehr_from_json(const nlohmann::json& j);

/// Splits "Do you have any fever or cough?" into "Do you have any fever?" and
/// "Do you have any cough?". Only a single top-level "or"/"and" between two short noun
/// phrases after an anchor word ("any", "a", "have", "experiencing", ...) is split;
/// anything else comes back unchanged as a one-element list.
std::vector<std::string> split_compound_question(std::string_view question);

/// Applies split_compound_question to every ground-truth question.
Dataset split_ground_truth(const Dataset& dataset);

}  // namespace followup
