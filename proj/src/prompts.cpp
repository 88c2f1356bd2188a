#include "followup/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "followup/errors.hpp"
#include "followup/text.hpp"

namespace followup {

namespace {

constexpr std::array<std::string_view, kPromptTemplateCount> kTemplateNames = {
    "extract_history", "extract_meds",     "gen_history",    "gen_meds",       "best_case",
    "worst_case",      "rule_out",         "extract_symptoms", "clar_symptom", "clar_selftreat",
    "clar_temporal",   "clar_ambiguity",   "redundant_filter", "top_k",        "judge_match",
    "baseline_core",   "synth_message",    "contrastive_gen",
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Length of a `{name}` placeholder starting at body[i], or 0 if it is not one.
std::size_t placeholder_length(std::string_view body, std::size_t i) {
  if (body[i] != '{' || i + 2 >= body.size() || !ident_start(body[i + 1])) return 0;
  std::size_t j = i + 2;
  while (j < body.size() && ident_char(body[j])) ++j;
  if (j >= body.size() || body[j] != '}') return 0;
  return j - i + 1;
}

}  // namespace

std::string_view to_string(PromptTemplateId id) {
  return kTemplateNames[static_cast<std::size_t>(id)];
}

PromptTemplateId template_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kTemplateNames.size(); ++i) {
    if (kTemplateNames[i] == name) return static_cast<PromptTemplateId>(i);
  }
  throw ConfigError("unknown prompt template '" + std::string(name) + "'");
}

const std::array<PromptTemplateId, kPromptTemplateCount>& all_template_ids() {
  static const auto ids = [] {
    std::array<PromptTemplateId, kPromptTemplateCount> out{};
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<PromptTemplateId>(i);
    return out;
  }();
  return ids;
}

std::string_view to_string(PromptProvenance p) {
  switch (p) {
    case PromptProvenance::verbatim: return "verbatim";
    case PromptProvenance::adapted: return "adapted";
    case PromptProvenance::reconstructed: return "reconstructed";
  }
  return "reconstructed";
}

PromptTemplate::PromptTemplate(PromptTemplateId id, PromptProvenance provenance, std::string body)
    : id_(id), provenance_(provenance), body_(std::move(body)) {
  for (std::size_t i = 0; i < body_.size(); ++i) {
    if (body_.compare(i, 2, "{{") == 0) {
      ++i;
      continue;
    }
    if (std::size_t len = placeholder_length(body_, i)) {
      std::string name = body_.substr(i + 1, len - 2);
      if (std::find(placeholders_.begin(), placeholders_.end(), name) == placeholders_.end())
        placeholders_.push_back(std::move(name));
      i += len - 1;
    }
  }
}

std::string PromptTemplate::render(const Bindings& bindings) const {
  std::string out;
  out.reserve(body_.size() + 256);
  for (std::size_t i = 0; i < body_.size(); ++i) {
    if (body_.compare(i, 2, "{{") == 0 || body_.compare(i, 2, "}}") == 0) {
      out.push_back(body_[i]);
      ++i;
      continue;
    }
    if (std::size_t len = placeholder_length(body_, i)) {
      std::string_view name(body_.data() + i + 1, len - 2);
      auto it = bindings.find(name);
      if (it == bindings.end()) throw RenderError(std::string(to_string(id_)), std::string(name));
      out += it->second;
      i += len - 1;
      continue;
    }
    out.push_back(body_[i]);
  }
  return out;
}

PromptKit PromptKit::load(const std::filesystem::path& dir) {
  PromptKit kit;
  for (PromptTemplateId id : all_template_ids()) {
    auto path = dir / (std::string(to_string(id)) + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("missing prompt asset " + path.string());
    std::string header;
    std::getline(in, header);
    const std::string tag = "# provenance:";
    if (header.rfind(tag, 0) != 0)
      throw ConfigError(path.string() + ": first line must be '# provenance: <kind>'");
    std::string kind = text::trim(header.substr(tag.size()));
    PromptProvenance prov;
    if (kind == "verbatim") {
      prov = PromptProvenance::verbatim;
    } else if (kind == "adapted") {
      prov = PromptProvenance::adapted;
    } else if (kind == "reconstructed") {
      prov = PromptProvenance::reconstructed;
    } else {
      throw ConfigError(path.string() + ": unknown provenance '" + kind + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    std::string body = ss.str();
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r' || body.back() == ' '))
      body.pop_back();
    kit.templates_.emplace(id, PromptTemplate(id, prov, std::move(body)));
  }
  return kit;
}

std::filesystem::path default_asset_dir() {
  if (const char* env = std::getenv("FOLLOWUP_ASSETS"); env && *env) return env;
  return FOLLOWUP_DEFAULT_ASSET_DIR;
}

const PromptKit& PromptKit::shared() {
  static const PromptKit kit = load(default_asset_dir() / "prompts");
  return kit;
}

const PromptTemplate& PromptKit::get(PromptTemplateId id) const {
  auto it = templates_.find(id);
  if (it == templates_.end())
    throw ConfigError("prompt template '" + std::string(to_string(id)) + "' not loaded");
  return it->second;
}

std::string PromptKit::render(PromptTemplateId id, const Bindings& bindings) const {
  return get(id).render(bindings);
}

namespace {

struct Marker {
  std::size_t begin;  // first digit
  std::size_t end;    // one past the delimiter
  int number;
  char delimiter;
};

std::vector<Marker> find_markers(std::string_view s) {
  std::vector<Marker> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) continue;
    if (i > 0 && !std::isspace(static_cast<unsigned char>(s[i - 1]))) {
      // skip the rest of this digit run
      while (i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1]))) ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    if (j - i > 3 || j >= s.size()) {
      i = j;
      continue;
    }
    char d = s[j];
    bool delim = d == ')' || d == '.' || d == ':';
    bool followed = j + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[j + 1]));
    if (delim && followed) {
      out.push_back({i, j + 1, std::stoi(std::string(s.substr(i, j - i))), d});
    }
    i = j;
  }
  return out;
}

}  // namespace

std::vector<std::string> parse_numbered_list(std::string_view s) {
  std::vector<Marker> markers = find_markers(s);
  std::vector<Marker> run;
  std::vector<Marker> last;
  for (const auto& m : markers) {
    if (m.number == 1) {
      if (!run.empty()) last = run;
      run = {m};
    } else if (!run.empty() && m.number == run.back().number + 1 &&
               m.delimiter == run.front().delimiter) {
      run.push_back(m);
    }
  }
  if (!run.empty()) last = run;

  std::vector<std::string> items;
  for (std::size_t k = 0; k < last.size(); ++k) {
    std::size_t b = last[k].end;
    std::size_t e;
    if (k + 1 < last.size()) {
      e = last[k + 1].begin;
    } else {
      while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
      e = s.find('\n', b);
      if (e == std::string_view::npos) e = s.size();
    }
    // A stray marker opening a line ends the item even when it is not part of the run.
    for (const auto& m : markers) {
      if (m.begin >= b && m.begin < e && m.begin > 0 && s[m.begin - 1] == '\n') {
        e = m.begin;
        break;
      }
    }
    std::string item = text::collapse_whitespace(s.substr(b, e - b));
    item = text::trim(item);
    if (!item.empty()) items.push_back(std::move(item));
  }
  return items;
}

}  // namespace followup
