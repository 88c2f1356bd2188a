#include "followup/dataset.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "followup/text.hpp"

namespace followup {

const PatientCase* Dataset::find(std::string_view id) const {
  for (const auto& c : cases) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

namespace {

const nlohmann::json& require(const nlohmann::json& obj, const std::string& key,
                              const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw ValidationError("missing field " + path);
  return obj[key];
}

std::string require_string(const nlohmann::json& obj, const std::string& key,
                           const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) throw ValidationError("field " + path + " must be a string");
  return v.get<std::string>();
}

}  // namespace

EhrRecord ehr_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("field ehr must be an object");
  return {require_string(j, "demographics", "ehr.demographics"),
          require_string(j, "history", "ehr.history"),
          require_string(j, "medications", "ehr.medications")};
}

nlohmann::ordered_json ehr_to_json(const EhrRecord& ehr) {
  return {{"demographics", ehr.demographics},
          {"history", ehr.history},
          {"medications", ehr.medications}};
}

Dataset read_dataset(std::istream& in, const std::string& source_name) {
  Dataset ds;
  std::vector<std::string> problems;
  std::map<std::string, std::vector<std::size_t>> id_lines;
  bool have_meta = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank(line)) continue;
    const std::string where = source_name + ":" + std::to_string(lineno) + ": ";
    try {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception&) {
        throw ValidationError("malformed JSON record");
      }
      if (!j.is_object()) throw ValidationError("record must be a JSON object");
      std::string id = require_string(j, "id", "id");
      if (text::is_blank(id)) throw ValidationError("field id is empty");
      std::string message = require_string(j, "message", "message");
      EhrRecord ehr = ehr_from_json(require(j, "ehr", "ehr"));
      const auto& gt = require(j, "ground_truth_questions", "ground_truth_questions");
      if (!gt.is_array()) throw ValidationError("field ground_truth_questions must be an array");
      std::vector<std::string> questions;
      for (const auto& q : gt) {
        if (!q.is_string() || text::is_blank(q.get<std::string>()))
          throw ValidationError("ground_truth_questions entries must be non-empty strings");
        questions.push_back(q.get<std::string>());
      }
      std::string version = j.value("schema_version", std::string(kSchemaVersion));
      if (version != kSchemaVersion)
        throw ValidationError("unsupported schema_version '" + version + "'");
      std::string tag = j.value("source_tag", std::string());
      if (!have_meta) {
        ds.source_tag = tag;
        ds.schema_version = version;
        have_meta = true;
      } else if (tag != ds.source_tag) {
        throw ValidationError("source_tag '" + tag + "' differs from earlier records ('" +
                              ds.source_tag + "')");
      }
      if (text::is_blank(message)) throw ValidationError("field message is empty");
      id_lines[id].push_back(lineno);
      ds.cases.push_back({id, PatientMessage(message), std::move(ehr),
                          QuestionSet::from_texts(questions, AgentId::external)});
    } catch (const ValidationError& e) {
      problems.push_back(where + e.what());
    }
  }
  for (const auto& [id, lines] : id_lines) {
    if (lines.size() < 2) continue;
    std::string msg = source_name + ": duplicate id '" + id + "' on lines";
    for (std::size_t i = 0; i < lines.size(); ++i)
      msg += (i ? " and " : " ") + std::to_string(lines[i]);
    problems.push_back(msg);
  }
  if (!problems.empty()) throw ValidationError(text::join(problems, "\n"));
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset " + path.string());
  return read_dataset(in, path.string());
}

nlohmann::ordered_json case_to_json(const PatientCase& c, const Dataset& dataset) {
  nlohmann::ordered_json j;
  j["id"] = c.id;
  j["message"] = c.message.text();
  j["ehr"] = ehr_to_json(c.ehr);
  j["ground_truth_questions"] = c.ground_truth.texts();
  j["schema_version"] = dataset.schema_version;
  if (!dataset.source_tag.empty()) j["source_tag"] = dataset.source_tag;
  return j;
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  for (const auto& c : dataset.cases) out << case_to_json(c, dataset).dump() << '\n';
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write dataset " + path.string());
  write_dataset(dataset, out);
}

namespace {

const std::unordered_set<std::string> kLeadWords = {
    "do", "does", "did", "have", "has", "had", "are", "is", "was", "were", "any", "can", "could",
};

const std::unordered_set<std::string> kAnchors = {
    "any",        "a",         "an",        "some",     "have",     "has",     "had",
    "experienced", "experiencing", "noticed", "noticing", "feel",   "feeling", "felt",
    "taking",     "taken",     "take",      "tried",    "using",    "used",    "get",
    "getting",    "got",
};

const std::unordered_set<std::string> kDeterminers = {"a", "an", "any", "some", "the"};

// Words that signal a clause, not a noun phrase.
const std::unordered_set<std::string> kClauseWords = {
    "you",   "your",  "it",    "its",   "they",   "he",    "she",   "i",     "we",   "me",
    "how",   "what",  "when",  "where", "why",    "which", "who",   "often", "long", "much",
    "many",  "do",    "does",  "did",   "is",     "are",   "was",   "were",  "has",  "have",
    "had",   "can",   "could", "will",  "would",  "should", "been", "this",  "that", "there",
    "if",    "not",
};

bool word_like(const std::string& w) {
  if (w.empty()) return false;
  for (unsigned char c : w) {
    if (!std::isalpha(c) && c != '-' && c != '\'') return false;
  }
  return true;
}

bool phrase_ok(const std::vector<std::string>& toks, std::size_t b, std::size_t e, bool allow_det) {
  if (e <= b || e - b > 4) return false;
  for (std::size_t i = b; i < e; ++i) {
    std::string w = text::to_lower(toks[i]);
    if (!word_like(w)) return false;
    if (kClauseWords.contains(w)) return false;
    if (w == "or" || w == "and") return false;
    if (kDeterminers.contains(w) && !(allow_det && i == b)) return false;
  }
  return true;
}

}  // namespace

std::vector<std::string> split_compound_question(std::string_view question) {
  const std::string q = text::trim(question);
  const std::vector<std::string> unchanged = {q};
  if (q.size() < 2 || q.back() != '?') return unchanged;
  const std::string body = q.substr(0, q.size() - 1);
  if (body.find_first_of(",;:()/") != std::string::npos) return unchanged;
  auto toks = text::split_whitespace(body);
  if (toks.size() < 3) return unchanged;

  std::size_t conj = toks.size();
  for (std::size_t i = 0; i < toks.size(); ++i) {
    std::string w = text::to_lower(toks[i]);
    if (w == "or" || w == "and") {
      if (conj != toks.size()) return unchanged;  // more than one conjunction
      conj = i;
    }
  }
  if (conj == toks.size() || conj == 0 || conj + 1 == toks.size()) return unchanged;
  if (!kLeadWords.contains(text::to_lower(toks[0]))) return unchanged;

  std::size_t anchor = toks.size();
  for (std::size_t j = conj; j-- > 0;) {
    if (kAnchors.contains(text::to_lower(toks[j]))) {
      anchor = j;
      break;
    }
  }
  if (anchor == toks.size()) return unchanged;
  if (!phrase_ok(toks, anchor + 1, conj, false)) return unchanged;
  if (!phrase_ok(toks, conj + 1, toks.size(), true)) return unchanged;

  std::vector<std::string> frame(toks.begin(), toks.begin() + static_cast<long>(anchor) + 1);
  std::vector<std::string> first = frame;
  first.insert(first.end(), toks.begin() + static_cast<long>(anchor) + 1,
               toks.begin() + static_cast<long>(conj));
  std::vector<std::string> second = frame;
  // "a fever or a cough": the second phrase brings its own determiner.
  if (kDeterminers.contains(text::to_lower(toks[conj + 1])) &&
      kDeterminers.contains(text::to_lower(toks[anchor])) && anchor > 0)
    second.pop_back();
  second.insert(second.end(), toks.begin() + static_cast<long>(conj) + 1, toks.end());
  return {text::join(first, " ") + "?", text::join(second, " ") + "?"};
}

Dataset split_ground_truth(const Dataset& dataset) {
  Dataset out;
  out.source_tag = dataset.source_tag;
  out.schema_version = dataset.schema_version;
  for (const auto& c : dataset.cases) {
    std::vector<std::string> parts;
    for (const auto& q : c.ground_truth.items()) {
      auto split = split_compound_question(q.text());
      parts.insert(parts.end(), split.begin(), split.end());
    }
    out.cases.push_back({c.id, c.message, c.ehr, QuestionSet::from_texts(parts, AgentId::external)});
  }
  return out;
}

}  // namespace followup
