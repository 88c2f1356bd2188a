#include "followup/records.hpp"

#include <fstream>

#include "followup/text.hpp"

namespace followup {

std::string_view to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::ok: return "ok";
    case RecordStatus::partial: return "partial";
    case RecordStatus::failed: return "failed";
  }
  return "unknown";
}

RecordStatus record_status_from_string(std::string_view s) {
  if (s == "ok") return RecordStatus::ok;
  if (s == "partial") return RecordStatus::partial;
  if (s == "failed") return RecordStatus::failed;
  throw ValidationError("unknown record status '" + std::string(s) + "'");
}

nlohmann::ordered_json record_to_json(const PredictionRecord& r) {
  nlohmann::ordered_json j;
  j["case_id"] = r.case_id;
  j["mode"] = r.mode;
  j["status"] = to_string(r.status);
  j["message"] = r.message;
  auto& qs = j["questions"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.questions.size(); ++i) {
    const auto& p = r.questions.provenance()[i];
    nlohmann::ordered_json q;
    q["text"] = r.questions.items()[i].text();
    q["agent"] = to_string(p.agent);
    if (!p.label.empty()) q["label"] = p.label;
    q["index"] = p.index;
    qs.push_back(std::move(q));
  }
  j["agent_counts"] = r.agent_counts;
  if (!r.diagnoses.empty()) j["diagnoses"] = r.diagnoses;
  if (!r.symptoms.empty()) j["symptoms"] = r.symptoms;
  auto& errs = j["errors"] = nlohmann::ordered_json::array();
  for (const auto& e : r.errors) errs.push_back({{"agent", e.agent}, {"stage", e.stage}, {"message", e.message}});
  j["warnings"] = r.warnings;
  return j;
}

PredictionRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("record must be a JSON object");
  PredictionRecord r;
  try {
    r.case_id = j.at("case_id").get<std::string>();
    r.mode = j.value("mode", std::string("external"));
    r.status = record_status_from_string(j.value("status", std::string("ok")));
    r.message = j.value("message", std::string());
    const auto& qs = j.at("questions");
    if (!qs.is_array()) throw ValidationError("field questions must be an array");
    std::size_t ordinal = 0;
    for (const auto& q : qs) {
      if (q.is_string()) {
        if (text::is_blank(q.get<std::string>())) continue;
        r.questions.add(Question(q.get<std::string>()), {AgentId::external, {}, ordinal++});
        continue;
      }
      QuestionProvenance p;
      p.agent = agent_from_string(q.value("agent", std::string("external")));
      p.label = q.value("label", std::string());
      p.index = q.value("index", ordinal);
      ++ordinal;
      r.questions.add(Question(q.at("text").get<std::string>()), p);
    }
    if (j.contains("agent_counts")) r.agent_counts = j["agent_counts"].get<std::map<std::string, std::size_t>>();
    if (j.contains("diagnoses")) r.diagnoses = j["diagnoses"].get<std::vector<std::string>>();
    if (j.contains("symptoms")) r.symptoms = j["symptoms"].get<std::vector<std::string>>();
    if (j.contains("errors")) {
      for (const auto& e : j["errors"])
        r.errors.push_back({e.at("agent").get<std::string>(), e.at("stage").get<std::string>(),
                            e.at("message").get<std::string>()});
    }
    if (j.contains("warnings")) r.warnings = j["warnings"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed prediction record: ") + e.what());
  }
  return r;
}

std::vector<PredictionRecord> read_predictions(std::istream& in, const std::string& source_name) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank(line)) continue;
    try {
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw ValidationError("malformed JSON record");
      out.push_back(record_from_json(j));
    } catch (const ValidationError& e) {
      throw ValidationError(source_name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open predictions " + path.string());
  return read_predictions(in, path.string());
}

void write_predictions(const std::vector<PredictionRecord>& records, std::ostream& out) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

void save_predictions(const std::vector<PredictionRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_predictions(records, out);
}

std::map<std::string, QuestionSet> predictions_by_case(const std::vector<PredictionRecord>& records) {
  std::map<std::string, QuestionSet> out;
  for (const auto& r : records) {
    if (!out.emplace(r.case_id, r.questions).second)
      throw ValidationError("duplicate prediction for case id '" + r.case_id + "'");
  }
  return out;
}

}  // namespace followup
