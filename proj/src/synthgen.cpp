#include "followup/synthgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <regex>

#include "followup/evaluation.hpp"
#include "followup/text.hpp"

namespace followup {

namespace {

void check_table(const std::string& name, const std::vector<WeightedValue>& table) {
  if (table.empty()) throw ConfigError("category table '" + name + "' is empty");
  double sum = 0.0;
  for (const auto& v : table) {
    if (text::is_blank(v.value)) throw ConfigError("category table '" + name + "' has a blank value");
    if (!(v.weight >= 0.0) || !std::isfinite(v.weight))
      throw ConfigError("category table '" + name + "' has an invalid weight for '" + v.value + "'");
    sum += v.weight;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", sum);
    throw ConfigError("weights of category table '" + name + "' sum to " + buf + ", not 1");
  }
}

std::vector<WeightedValue> parse_table(const nlohmann::json& j, const std::string& name) {
  if (!j.contains(name) || !j[name].is_array()) throw ConfigError("category table '" + name + "' missing");
  std::vector<WeightedValue> out;
  for (const auto& e : j[name]) {
    if (!e.is_object() || !e.contains("value") || !e.contains("weight") || !e["value"].is_string() ||
        !e["weight"].is_number())
      throw ConfigError("category table '" + name + "' entries need a string value and a numeric weight");
    out.push_back({e["value"].get<std::string>(), e["weight"].get<double>()});
  }
  return out;
}

}  // namespace

void CategoryTables::validate() const {
  if (topics.empty()) throw ConfigError("topic list is empty");
  for (const auto& t : topics) {
    if (text::is_blank(t)) throw ConfigError("topic list has a blank entry");
  }
  check_table("duration", duration);
  check_table("urgency", urgency);
  check_table("reporting_level", reporting_level);
  check_table("health_literacy", health_literacy);
}

CategoryTables parse_category_tables(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("category config must be a JSON object");
  CategoryTables t;
  if (!j.contains("topics") || !j["topics"].is_array()) throw ConfigError("category config lacks topics");
  for (const auto& topic : j["topics"]) {
    if (!topic.is_string()) throw ConfigError("topics must be strings");
    t.topics.push_back(topic.get<std::string>());
  }
  t.duration = parse_table(j, "duration");
  t.urgency = parse_table(j, "urgency");
  t.reporting_level = parse_table(j, "reporting_level");
  t.health_literacy = parse_table(j, "health_literacy");
  t.note = j.value("note", std::string());
  t.validate();
  return t;
}

CategoryTables load_category_tables(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open category config " + path.string());
  try {
    return parse_category_tables(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::filesystem::path default_synth_dir() { return default_asset_dir() / "synth"; }

nlohmann::ordered_json spec_to_json(const MessageSpec& spec) {
  return {{"topics", spec.topics},
          {"duration", spec.duration},
          {"urgency", spec.urgency},
          {"reporting_level", spec.reporting_level},
          {"health_literacy", spec.health_literacy},
          {"age", spec.age},
          {"gender", spec.gender}};
}

MessageSpec spec_from_json(const nlohmann::json& j) {
  MessageSpec s;
  s.topics = j.at("topics").get<std::vector<std::string>>();
  s.duration = j.at("duration").get<std::string>();
  s.urgency = j.at("urgency").get<std::string>();
  s.reporting_level = j.at("reporting_level").get<std::string>();
  s.health_literacy = j.at("health_literacy").get<std::string>();
  s.age = j.at("age").get<int>();
  s.gender = j.at("gender").get<std::string>();
  return s;
}

std::pair<int, std::string> parse_age_gender(const std::string& demographics) {
  static const std::regex age_re(R"((?:^|\n)\s*age\s*[:=]\s*(\d{1,3}))", std::regex::icase);
  static const std::regex gender_re(R"((?:^|\n)\s*(?:gender|sex)\s*[:=][ \t]*([^\n]*))", std::regex::icase);
  std::smatch m;
  if (!std::regex_search(demographics, m, age_re))
    throw ValidationError("demographics lack an 'Age:' line");
  int age = std::stoi(m[1].str());
  if (!std::regex_search(demographics, m, gender_re) || text::is_blank(m[1].str()))
    throw ValidationError("demographics lack a 'Gender:' line");
  return {age, text::trim(m[1].str())};
}

std::size_t sample_weighted(Rng& rng, std::span<const WeightedValue> table) {
  const double u = rng.uniform01();
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].weight <= 0.0) continue;
    cum += table[i].weight;
    last_positive = i;
    if (u < cum) return i;
  }
  return last_positive;
}

MessageSpec sample_message_spec(Rng& rng, const EhrRecord& ehr, const CategoryTables& tables) {
  tables.validate();
  MessageSpec spec;
  auto [age, gender] = parse_age_gender(ehr.demographics);
  std::size_t count = tables.topics.size() == 1 ? 1 : 1 + rng.index(2);
  std::vector<std::size_t> order(tables.topics.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + rng.index(order.size() - i);
    std::swap(order[i], order[j]);
    spec.topics.push_back(tables.topics[order[i]]);
  }
  spec.duration = tables.duration[sample_weighted(rng, tables.duration)].value;
  spec.urgency = tables.urgency[sample_weighted(rng, tables.urgency)].value;
  spec.reporting_level = tables.reporting_level[sample_weighted(rng, tables.reporting_level)].value;
  spec.health_literacy = tables.health_literacy[sample_weighted(rng, tables.health_literacy)].value;
  spec.age = age;
  spec.gender = gender;
  return spec;
}

MessageSpec sample_message_spec(std::uint64_t seed, const EhrRecord& ehr, const CategoryTables& tables) {
  Rng rng(seed);
  return sample_message_spec(rng, ehr, tables);
}

std::vector<SynthExemplar> load_synth_exemplars(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synth exemplars " + path.string());
  std::vector<SynthExemplar> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank(line)) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({spec_from_json(j.at("features")), j.at("message").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

namespace {

std::string feature_lines(const MessageSpec& s) {
  return "Topics: " + text::join(s.topics, ", ") + "\nDuration: " + s.duration + "\nUrgency: " + s.urgency +
         "\nReporting level: " + s.reporting_level + "\nHealth literacy: " + s.health_literacy +
         "\nAge: " + std::to_string(s.age) + "\nGender: " + s.gender + "\n";
}

}  // namespace

std::string render_synth_prompt(const MessageSpec& spec, std::span<const SynthExemplar> exemplars,
                                const PromptKit& prompts) {
  std::string block;
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    block += "### Example " + std::to_string(i + 1) + " ###\n" + feature_lines(exemplars[i].spec) +
             "Message:\n" + exemplars[i].message + "\n\n";
  }
  return prompts.render(PromptTemplateId::synth_message,
                        {{"examples", block},
                         {"topics", text::join(spec.topics, ", ")},
                         {"duration", spec.duration},
                         {"urgency", spec.urgency},
                         {"reporting_level", spec.reporting_level},
                         {"health_literacy", spec.health_literacy},
                         {"age", std::to_string(spec.age)},
                         {"gender", spec.gender}});
}

PatientMessage generate_synthetic_message(const MessageSpec& spec, std::span<const SynthExemplar> exemplars,
                                          Gateway& gateway, const SynthOptions& options) {
  if (exemplars.size() != options.expected_exemplars)
    throw ValidationError("expected " + std::to_string(options.expected_exemplars) + " exemplars, got " +
                          std::to_string(exemplars.size()));
  if (spec.topics.empty()) throw ValidationError("message spec has no topics");
  const PromptKit& kit = options.prompts ? *options.prompts : PromptKit::shared();
  auto resp = gateway.complete_retrying_empty(PromptTemplateId::synth_message,
                                              render_synth_prompt(spec, exemplars, kit),
                                              options.temperature, options.max_tokens);
  return PatientMessage(text::trim(resp.text));
}

SynthBatch generate_synth_batch(std::span<const EhrRecord> ehr_pool, std::size_t n, std::uint64_t seed,
                                const CategoryTables& tables, std::span<const SynthExemplar> exemplars,
                                Gateway& gateway, const SynthOptions& options) {
  if (ehr_pool.empty()) throw ValidationError("EHR pool is empty");
  tables.validate();
  struct Draw {
    std::size_t ehr_index;
    MessageSpec spec;
  };
  std::vector<Draw> draws;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    std::size_t idx = rng.index(ehr_pool.size());
    draws.push_back({idx, sample_message_spec(rng, ehr_pool[idx], tables)});
  }
  struct Generated {
    std::string message;
    std::string error;
  };
  auto generated = parallel_map(n, gateway.concurrency(), [&](std::size_t i) {
    try {
      return Generated{generate_synthetic_message(draws[i].spec, exemplars, gateway, options).text(), {}};
    } catch (const AuthError&) {
      throw;
    } catch (const BackendError& e) {
      return Generated{{}, e.what()};
    }
  });
  SynthBatch batch;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "synth-%04zu", i + 1);
    if (!generated[i].error.empty()) {
      batch.failures.push_back(std::string(id) + ": " + generated[i].error);
      continue;
    }
    batch.records.push_back(
        {{id, PatientMessage(generated[i].message), ehr_pool[draws[i].ehr_index], {}}, draws[i].spec});
  }
  return batch;
}

std::optional<ContrastiveSample> parse_contrastive(std::string_view completion, const std::string& topic) {
  std::optional<std::string> root, positive, negative;
  std::string all(completion);
  std::size_t pos = 0;
  while (pos <= all.size()) {
    std::size_t nl = all.find('\n', pos);
    std::string line = all.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? all.size() + 1 : nl + 1;
    line.erase(std::remove(line.begin(), line.end(), '*'), line.end());
    line = text::trim(line);
    while (!line.empty() && (line.front() == '-' || line.front() == '#')) line = text::trim(line.substr(1));
    auto take = [&](std::string_view label, std::optional<std::string>& slot) {
      if (slot || !text::starts_with_ci(line, label)) return;
      std::string v = text::trim(line.substr(label.size()));
      if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = text::trim(v.substr(1, v.size() - 2));
      slot = v;
    };
    take("root:", root);
    take("positive:", positive);
    take("negative:", negative);
  }
  if (!root || !positive || !negative) return std::nullopt;
  if (text::is_blank(*root) || text::is_blank(*positive) || text::is_blank(*negative)) return std::nullopt;
  auto r = normalize_question(*root);
  auto p = normalize_question(*positive);
  auto n = normalize_question(*negative);
  if (r == p || r == n || p == n) return std::nullopt;
  return ContrastiveSample{*root, *positive, *negative, topic};
}

std::optional<ContrastiveSample> generate_contrastive_sample(const std::string& topic, Gateway& gateway,
                                                             double temperature, const PromptKit& prompts) {
  if (text::is_blank(topic)) throw ValidationError("contrastive topic is empty");
  const std::string prompt = prompts.render(PromptTemplateId::contrastive_gen, {{"topic", topic}});
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      auto resp = gateway.complete(PromptTemplateId::contrastive_gen, prompt, temperature);
      if (auto s = parse_contrastive(resp.text, topic)) return s;
    } catch (const EmptyCompletionError&) {
    }
  }
  return std::nullopt;
}

std::vector<std::string> ngram_tokens(std::string_view text_in) {
  std::vector<std::string> out;
  for (const auto& raw : text::split_whitespace(text_in)) {
    std::string t;
    for (unsigned char c : raw) {
      if (!std::ispunct(c)) t.push_back(static_cast<char>(std::tolower(c)));
    }
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

namespace {

template <typename Fn>
void for_each_ngram(const std::vector<std::string>& toks, std::size_t n, Fn fn) {
  if (toks.size() < n) return;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string g = toks[i];
    for (std::size_t k = 1; k < n; ++k) g += ' ' + toks[i + k];
    if (fn(g)) return;
  }
}

}  // namespace

NgramIndex::NgramIndex(std::span<const std::string> corpus, std::size_t n) : n_(n) {
  if (n < 1) throw ValidationError("n-gram size must be >= 1");
  for (const auto& s : corpus) {
    for_each_ngram(ngram_tokens(s), n, [&](const std::string& g) {
      grams_.insert(g);
      return false;
    });
  }
}

bool NgramIndex::leaks(std::string_view candidate) const {
  bool hit = false;
  for_each_ngram(ngram_tokens(candidate), n_, [&](const std::string& g) { return hit = grams_.contains(g); });
  return hit;
}

bool ngram_leak_filter(std::string_view candidate, std::span<const std::string> protected_corpus,
                       std::size_t n) {
  return NgramIndex(protected_corpus, n).leaks(candidate);
}

std::vector<std::string> load_protected_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open protected set " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = text::trim(line);
    if (t.empty()) continue;
    if (t.front() == '{') {
      auto j = nlohmann::json::parse(t, nullptr, false);
      if (!j.is_discarded() && j.is_object()) {
        for (const char* key : {"a", "b", "root", "positive", "negative", "message"}) {
          if (j.contains(key) && j[key].is_string()) out.push_back(j[key].get<std::string>());
        }
        if (j.contains("ground_truth_questions") && j["ground_truth_questions"].is_array()) {
          for (const auto& q : j["ground_truth_questions"]) {
            if (q.is_string()) out.push_back(q.get<std::string>());
          }
        }
        continue;
      }
    }
    out.push_back(t);
  }
  return out;
}

JudgeDataResult generate_judge_data(std::span<const std::string> topics, std::size_t n,
                                    const NgramIndex& protected_index, Gateway& gateway,
                                    const JudgeDataOptions& options) {
  if (topics.empty()) throw ValidationError("topic list is empty");
  const PromptKit& kit = options.prompts ? *options.prompts : PromptKit::shared();
  struct Outcome {
    std::optional<ContrastiveSample> sample;
    bool backend_failed = false;
  };
  JudgeDataResult result;
  const std::size_t budget = n * std::max<std::size_t>(options.attempts_per_sample, 1);
  while (result.accepted.size() < n && result.attempts < budget) {
    const std::size_t base = result.attempts;
    const std::size_t batch = std::min(n - result.accepted.size(), budget - base);
    auto outcomes = parallel_map(batch, options.concurrency, [&](std::size_t k) {
      Rng rng(derive_seed(options.seed, base + k));
      const std::string& topic = topics[rng.index(topics.size())];
      try {
        return Outcome{generate_contrastive_sample(topic, gateway, options.temperature, kit), false};
      } catch (const AuthError&) {
        throw;
      } catch (const BackendError&) {
        return Outcome{std::nullopt, true};
      }
    });
    for (auto& o : outcomes) {
      ++result.attempts;
      if (o.backend_failed) {
        ++result.backend_failures;
      } else if (!o.sample) {
        ++result.rejected_malformed;
      } else if (protected_index.leaks(o.sample->root) || protected_index.leaks(o.sample->positive) ||
                 protected_index.leaks(o.sample->negative)) {
        ++result.rejected_leak;
      } else if (result.accepted.size() < n) {
        result.accepted.push_back(std::move(*o.sample));
      }
    }
  }
  return result;
}

std::vector<nlohmann::ordered_json> judge_training_pairs(std::span<const ContrastiveSample> samples,
                                                         const PromptKit& prompts) {
  std::vector<nlohmann::ordered_json> out;
  out.reserve(samples.size() * 2);
  for (const auto& s : samples) {
    const Question root(s.root);
    out.push_back({{"prompt", render_judge_prompt(root, Question(s.positive), prompts)},
                   {"completion", "yes"},
                   {"label", true},
                   {"topic", s.topic}});
    out.push_back({{"prompt", render_judge_prompt(root, Question(s.negative), prompts)},
                   {"completion", "no"},
                   {"label", false},
                   {"topic", s.topic}});
  }
  return out;
}

}  // namespace followup
