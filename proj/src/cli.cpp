#include "followup/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "followup/baselines.hpp"
#include "followup/dataset.hpp"
#include "followup/evaluation.hpp"
#include "followup/filtration.hpp"
#include "followup/http_backend.hpp"
#include "followup/manifest.hpp"
#include "followup/mock_backend.hpp"
#include "followup/pipeline.hpp"
#include "followup/records.hpp"
#include "followup/synthgen.hpp"
#include "followup/text.hpp"

namespace followup {

namespace {

using ojson = nlohmann::ordered_json;

// JSON-lines log on stderr.
class Logger {
 public:
  Logger(std::ostream& err, std::string level) : err_(err), level_(rank(level)) {}

  void info(const std::string& event, ojson fields = ojson::object()) { emit(1, "info", event, std::move(fields)); }
  void warn(const std::string& event, ojson fields = ojson::object()) { emit(2, "warn", event, std::move(fields)); }
  void error(const std::string& event, ojson fields = ojson::object()) { emit(3, "error", event, std::move(fields)); }

 private:
  static int rank(const std::string& level) {
    if (level == "debug") return 0;
    if (level == "info") return 1;
    if (level == "warn") return 2;
    if (level == "error") return 3;
    return 4;  // quiet
  }
  void emit(int rank, const char* name, const std::string& event, ojson fields) {
    if (rank < level_) return;
    ojson line;
    line["level"] = name;
    line["event"] = event;
    for (auto& [k, v] : fields.items()) line[k] = v;
    err_ << line.dump() << '\n';
  }

  std::ostream& err_;
  int level_;
};

// Every tunable is bound once: CLI flag, config-file key and optionally an env var.
// Resolution order is flag > config file > env > built-in default.
class Binder {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* sub, const std::string& key, T& var, const std::string& desc,
                   const std::string& env = {}) {
    std::string flag = "--" + text::replace_all(key, "_", "-");
    CLI::Option* opt;
    if constexpr (std::is_same_v<T, bool>) {
      opt = sub->add_flag(flag, var, desc);
    } else {
      opt = sub->add_option(flag, var, desc);
      if constexpr (!std::is_same_v<T, std::vector<std::string>>) opt->capture_default_str();
    }
    bindings_.push_back({sub, key, env, opt,
                         [&var](const nlohmann::json& j) { var = j.get<T>(); },
                         [&var](const std::string& s) { var = from_env<T>(s); },
                         [&var]() { return ojson(var); }});
    known_.insert(key);
    return opt;
  }

  void apply(CLI::App* sub, const nlohmann::json& config) {
    if (!config.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& [k, v] : config.items()) {
      if (!known_.contains(k)) throw ConfigError("unknown config key '" + k + "'");
    }
    for (auto& b : bindings_) {
      if (b.sub != sub) continue;
      if (b.opt->count() > 0) {
        set_.insert(b.key);
        continue;
      }
      if (config.contains(b.key)) {
        try {
          b.from_json(config[b.key]);
        } catch (const nlohmann::json::exception&) {
          throw ConfigError("config key '" + b.key + "' has the wrong type");
        }
        set_.insert(b.key);
      } else if (!b.env.empty()) {
        if (const char* v = std::getenv(b.env.c_str()); v && *v) {
          b.from_env(v);
          set_.insert(b.key);
        }
      }
    }
  }

  bool explicitly_set(const std::string& key) const { return set_.contains(key); }

  ojson snapshot(CLI::App* sub) const {
    ojson j = ojson::object();
    for (const auto& b : bindings_) {
      if (b.sub == sub) j[b.key] = b.to_json();
    }
    return j;
  }

 private:
  template <typename T>
  static T from_env(const std::string& s) {
    if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else if constexpr (std::is_same_v<T, bool>) {
      return s == "1" || s == "true" || s == "yes";
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      return {s};
    } else {
      std::istringstream in(s);
      T v{};
      if (!(in >> v)) throw ConfigError("cannot parse environment value '" + s + "'");
      return v;
    }
  }

  struct Binding {
    CLI::App* sub;
    std::string key;
    std::string env;
    CLI::Option* opt;
    std::function<void(const nlohmann::json&)> from_json;
    std::function<void(const std::string&)> from_env;
    std::function<ojson()> to_json;
  };
  std::vector<Binding> bindings_;
  std::set<std::string> known_;
  std::set<std::string> set_;
};

struct BackendSettings {
  std::string backend = "mock";
  std::string mock_script;
  std::string endpoint;
  std::string model = "default";
  std::string embedding_model = "default-embedding";
  std::string api_key_env = "FOLLOWUP_API_KEY";
  int concurrency = 4;
  int timeout_ms = 120000;
  int max_retries = 3;
  int retry_backoff_ms = 500;
  std::string request_log;
};

void bind_backend(Binder& b, CLI::App* sub, BackendSettings& s) {
  b.add(sub, "backend", s.backend, "mock | http", "FOLLOWUP_BACKEND")
      ->check(CLI::IsMember({"mock", "http"}));
  b.add(sub, "mock_script", s.mock_script, "JSON script for the mock backend", "FOLLOWUP_MOCK_SCRIPT");
  b.add(sub, "endpoint", s.endpoint, "OpenAI-compatible base URL, e.g. http://host:8000/v1", "FOLLOWUP_ENDPOINT");
  b.add(sub, "model", s.model, "chat model name", "FOLLOWUP_MODEL");
  b.add(sub, "embedding_model", s.embedding_model, "embedding model name", "FOLLOWUP_EMBEDDING_MODEL");
  b.add(sub, "api_key_env", s.api_key_env, "environment variable holding the API key");
  b.add(sub, "concurrency", s.concurrency, "maximum in-flight model calls")->check(CLI::Range(1, 256));
  b.add(sub, "timeout_ms", s.timeout_ms, "per-request timeout");
  b.add(sub, "max_retries", s.max_retries, "transport retries per request");
  b.add(sub, "retry_backoff_ms", s.retry_backoff_ms, "initial retry backoff");
  b.add(sub, "request_log", s.request_log, "append every model exchange to this JSON-lines file");
}

struct Backend {
  std::shared_ptr<ChatModel> chat;
  std::shared_ptr<EmbeddingModel> embedder;
  std::unique_ptr<Gateway> gateway;
};

Backend open_backend(const BackendSettings& s, int max_tokens, RunManifest& manifest, Logger& log) {
  Backend b;
  std::string secret;
  if (s.backend == "mock") {
    if (s.mock_script.empty()) throw ConfigError("--backend mock needs --mock-script");
    std::ifstream in(s.mock_script);
    if (!in) throw ConfigError("cannot open mock script " + s.mock_script);
    nlohmann::json script;
    try {
      script = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("mock script " + s.mock_script + ": " + e.what());
    }
    manifest.add_input(s.mock_script);
    b.chat = MockChatModel::from_json(script);
    b.embedder = MockEmbeddingModel::from_json(script.value("embedding", nlohmann::json::object()));
  } else {
    BackendConfig cfg;
    cfg.endpoint = s.endpoint;
    if (const char* key = std::getenv(s.api_key_env.c_str()); key && *key) {
      cfg.api_key = key;
      secret = key;
    }
    cfg.timeout_ms = s.timeout_ms;
    cfg.max_retries = s.max_retries;
    cfg.retry_backoff_ms = s.retry_backoff_ms;
    cfg.validate();
    log.info("probe", {{"endpoint", cfg.endpoint}});
    probe_endpoint(cfg);
    b.chat = std::make_shared<HttpChatModel>(cfg);
    b.embedder = std::make_shared<HttpEmbeddingModel>(cfg, s.embedding_model);
  }
  GatewayOptions opts;
  opts.model_name = s.model;
  opts.max_tokens = max_tokens;
  opts.concurrency = s.concurrency;
  if (!s.request_log.empty()) opts.log = std::make_shared<RequestLog>(s.request_log, secret);
  b.gateway = std::make_unique<Gateway>(b.chat, b.embedder, opts);
  manifest.backends["chat"] = b.gateway->chat_identity() + " model=" + s.model;
  manifest.backends["embedding"] = b.gateway->embedding_identity() + " model=" + s.embedding_model;
  return b;
}

nlohmann::json read_config_file(const std::string& path, RunManifest& manifest) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    auto j = nlohmann::json::parse(in);
    manifest.add_input(path);
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

RecordStatus status_for(const QuestionSet& questions, const std::vector<AgentIssue>& errors) {
  if (errors.empty()) return RecordStatus::ok;
  return questions.empty() ? RecordStatus::failed : RecordStatus::partial;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << content;
}

std::string issues_text(const std::vector<AgentIssue>& issues) {
  std::vector<std::string> parts;
  for (const auto& i : issues) parts.push_back(i.agent + "/" + i.stage + ": " + i.message);
  return text::join(parts, "; ");
}

struct GenerateSettings {
  std::string dataset;
  std::string out;
  std::string mode = "followupq";
  int k = 40;
  int shots = -1;
  std::string example_bank;
  int k_ehr = 1;
  int k_diff = 3;
  int k_symptom = 2;
  int k_ambiguity = 3;
  int k_temporal = 3;
  int k_selftreat = 2;
  double temperature = 0.6;
  std::uint64_t seed = 20250101;
  int max_tokens = 1024;
  bool ehr_in_clarification = false;
};

int cmd_generate(const GenerateSettings& g, const BackendSettings& bs, const Binder& binder,
                 RunManifest& manifest, Logger& log, std::ostream& out) {
  Dataset ds = load_dataset(g.dataset);
  manifest.add_input(g.dataset);
  manifest.seeds["pipeline"] = g.seed;

  int max_tokens = g.max_tokens;
  if (g.mode == "long-thought" && !binder.explicitly_set("max_tokens")) max_tokens = 8192;
  manifest.summary["effective_max_tokens"] = max_tokens;
  Backend backend = open_backend(bs, max_tokens, manifest, log);

  std::vector<PredictionRecord> records;
  if (g.mode == "followupq") {
    PipelineConfig cfg;
    cfg.k_ehr = g.k_ehr;
    cfg.k_diff = g.k_diff;
    cfg.k_symptom = g.k_symptom;
    cfg.k_ambiguity = g.k_ambiguity;
    cfg.k_temporal = g.k_temporal;
    cfg.k_selftreat = g.k_selftreat;
    cfg.temperature = g.temperature;
    cfg.seed = g.seed;
    cfg.max_tokens = max_tokens;
    cfg.ehr_in_clarification = g.ehr_in_clarification;
    cfg.validate();
    for (const auto& c : ds.cases) {
      PredictionRecord r;
      r.case_id = c.id;
      r.mode = g.mode;
      r.message = c.message.text();
      try {
        QuestionPool pool = build_question_pool(c, {cfg, *backend.gateway});
        r.questions = pool.questions;
        r.agent_counts = pool.source_breakdown;
        for (const auto& d : pool.diagnoses) r.diagnoses.push_back(d.label);
        r.symptoms = pool.symptoms;
        r.errors = pool.errors;
        r.warnings = pool.warnings;
      } catch (const PipelineError& e) {
        r.errors = e.issues();
        r.errors.push_back({"pipeline", "pool", e.what()});
      }
      r.status = status_for(r.questions, r.errors);
      log.info("case", {{"case_id", c.id}, {"status", to_string(r.status)}, {"questions", r.questions.size()}});
      records.push_back(std::move(r));
    }
  } else {
    BaselineConfig cfg;
    if (g.mode == "k-fixed") cfg.mode = BaselineMode::k_fixed;
    else if (g.mode == "long-thought") cfg.mode = BaselineMode::long_thought;
    else cfg.mode = BaselineMode::unbounded;
    cfg.k = g.k;
    cfg.shots = g.shots >= 0 ? g.shots : (g.mode == "few-shot" ? 3 : 0);
    if (g.mode == "zero-shot" && cfg.shots != 0) throw ValidationError("zero-shot mode takes no exemplars");
    cfg.temperature = g.temperature;
    cfg.max_tokens = max_tokens;
    if (cfg.shots > 0) {
      std::filesystem::path bank = g.example_bank.empty() ? default_example_bank_path() : std::filesystem::path(g.example_bank);
      cfg.example_bank = load_example_bank(bank);
      manifest.add_input(bank);
    }
    cfg.validate();
    manifest.summary["shots"] = cfg.shots;
    for (const auto& c : ds.cases) {
      BaselineResult res = generate_baseline(c, cfg, *backend.gateway);
      PredictionRecord r;
      r.case_id = c.id;
      r.mode = g.mode;
      r.message = c.message.text();
      r.questions = res.questions;
      r.agent_counts["baseline"] = res.raw_count;
      r.errors = res.errors;
      r.warnings = res.warnings;
      r.status = status_for(r.questions, r.errors);
      log.info("case", {{"case_id", c.id}, {"status", to_string(r.status)}, {"questions", r.questions.size()}});
      records.push_back(std::move(r));
    }
  }

  save_predictions(records, g.out);
  manifest.add_output(g.out);
  std::size_t not_ok = 0;
  for (const auto& r : records) not_ok += r.status == RecordStatus::ok ? 0 : 1;
  manifest.summary["records"] = records.size();
  manifest.summary["records_not_ok"] = not_ok;
  out << "wrote " << records.size() << " records to " << g.out;
  if (not_ok) out << " (" << not_ok << " with errors)";
  out << '\n';
  return not_ok ? kExitPartial : kExitOk;
}

struct FilterSettings {
  std::string pool;
  std::string out;
  int target_k = 10;
  std::uint64_t seed = 20250101;
  int clusters = 0;
  double temperature = 0.6;
  int max_tokens = 1024;
};

int cmd_filter(const FilterSettings& f, const BackendSettings& bs, RunManifest& manifest, Logger& log,
               std::ostream& out) {
  if (f.target_k < 1) throw ValidationError("--target-k must be >= 1");
  auto records = load_predictions(f.pool);
  manifest.add_input(f.pool);
  manifest.seeds["kmeans"] = f.seed;
  Backend backend = open_backend(bs, f.max_tokens, manifest, log);

  FiltrationOptions opts;
  opts.temperature = f.temperature;
  opts.max_tokens = f.max_tokens;
  if (f.clusters > 0) opts.n_clusters = static_cast<std::size_t>(f.clusters);

  ojson reports = ojson::array();
  std::size_t failures = 0;
  for (auto& r : records) {
    ojson rep;
    rep["case_id"] = r.case_id;
    if (r.questions.empty()) {
      rep["skipped"] = "empty pool";
      reports.push_back(std::move(rep));
      continue;
    }
    try {
      FilterResult res = filter_pipeline(PatientMessage(r.message), r.questions, f.target_k, f.seed,
                                         *backend.gateway, opts);
      r.questions = res.questions;
      const auto& fr = res.report;
      rep["input_size"] = fr.input_size;
      rep["post_dedup_size"] = fr.post_dedup_size;
      rep["final_size"] = fr.final_size;
      rep["cluster_count"] = fr.cluster_count;
      rep["target_k"] = fr.target_k;
      auto& removed = rep["removed"] = ojson::array();
      for (const auto& rm : fr.removed) removed.push_back({{"question", rm.question}, {"reason", to_string(rm.reason)}});
      rep["warnings"] = fr.warnings;
    } catch (const AuthError&) {
      throw;
    } catch (const BackendError& e) {
      ++failures;
      rep["error"] = e.what();
      log.warn("filter_failed", {{"case_id", r.case_id}, {"error", e.what()}});
    }
    reports.push_back(std::move(rep));
  }
  save_predictions(records, f.out);
  manifest.add_output(f.out);
  const std::string report_path = f.out + ".report.json";
  write_text(report_path, reports.dump(2) + "\n");
  manifest.add_output(report_path);
  manifest.summary["records"] = records.size();
  manifest.summary["failed_cases"] = failures;
  out << "filtered " << records.size() << " records into " << f.out << '\n';
  return failures ? kExitPartial : kExitOk;
}

struct EvaluateSettings {
  std::string dataset;
  std::string predictions;
  std::string out;
  std::string judge = "llm";
  bool coverage_only = false;
  double judge_temperature = 0.0;
  int judge_max_tokens = 16;
  std::string label = "system";
  double unreliable_fraction = 0.10;
};

int cmd_evaluate(const EvaluateSettings& e, const BackendSettings& bs, RunManifest& manifest, Logger& log,
                 std::ostream& out) {
  Dataset ds = load_dataset(e.dataset);
  manifest.add_input(e.dataset);
  auto preds = predictions_by_case(load_predictions(e.predictions));
  manifest.add_input(e.predictions);

  std::optional<Backend> backend;
  std::unique_ptr<Judge> judge;
  if (e.judge == "exact") {
    judge = std::make_unique<ExactMatchJudge>();
    manifest.backends["judge"] = "exact-match";
  } else {
    backend = open_backend(bs, e.judge_max_tokens, manifest, log);
    judge = std::make_unique<LlmJudge>(*backend->gateway, LlmJudgeOptions{e.judge_temperature, e.judge_max_tokens});
  }
  EvalOptions opts;
  opts.match.coverage_only = e.coverage_only;
  opts.match.concurrency = bs.concurrency;
  opts.unreliable_fraction = e.unreliable_fraction;
  EvaluationReport report = evaluate_dataset(ds, preds, *judge, opts);

  write_text(e.out, report_to_json(report).dump(2) + "\n");
  manifest.add_output(e.out);
  const std::string table = render_report_table(report, e.label);
  const std::string table_path = e.out + ".table.txt";
  write_text(table_path, table);
  manifest.add_output(table_path);
  out << table;
  manifest.summary["mr_percent"] = report.mr_percent;
  manifest.summary["global_match"] = report.global_match;
  manifest.summary["flagged_pairs"] = report.flagged_pairs;
  if (report.unreliable) {
    log.error("unreliable_evaluation",
              {{"flagged_pairs", report.flagged_pairs}, {"judged_pairs", report.judged_pairs}});
    return kExitBackend;
  }
  return kExitOk;
}

struct SynthSettings {
  std::string ehr_pool;
  std::string out;
  int n = 250;
  std::uint64_t seed = 20250101;
  std::string categories;
  std::string exemplars;
  int exemplar_count = 3;
  double temperature = 0.6;
  int max_tokens = 1024;
};

int cmd_synth(const SynthSettings& s, const BackendSettings& bs, RunManifest& manifest, Logger& log,
              std::ostream& out) {
  if (s.n < 1) throw ValidationError("--n must be >= 1");
  Dataset pool = load_dataset(s.ehr_pool);
  manifest.add_input(s.ehr_pool);
  std::vector<EhrRecord> ehrs;
  for (const auto& c : pool.cases) ehrs.push_back(c.ehr);
  std::filesystem::path cat_path = s.categories.empty() ? default_synth_dir() / "categories.json" : std::filesystem::path(s.categories);
  std::filesystem::path ex_path = s.exemplars.empty() ? default_synth_dir() / "exemplars.jsonl" : std::filesystem::path(s.exemplars);
  CategoryTables tables = load_category_tables(cat_path);
  auto exemplars = load_synth_exemplars(ex_path);
  manifest.add_input(cat_path);
  manifest.add_input(ex_path);
  manifest.seeds["synth"] = s.seed;
  Backend backend = open_backend(bs, s.max_tokens, manifest, log);

  SynthOptions opts;
  opts.expected_exemplars = static_cast<std::size_t>(s.exemplar_count);
  opts.temperature = s.temperature;
  opts.max_tokens = s.max_tokens;
  SynthBatch batch = generate_synth_batch(ehrs, static_cast<std::size_t>(s.n), s.seed, tables, exemplars,
                                          *backend.gateway, opts);
  Dataset outds;
  outds.source_tag = "synthetic";
  std::ofstream f(s.out, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + s.out);
  for (const auto& r : batch.records) {
    auto j = case_to_json(r.patient, outds);
    j["features"] = spec_to_json(r.spec);
    f << j.dump() << '\n';
  }
  f.close();
  manifest.add_output(s.out);
  for (const auto& fail : batch.failures) log.warn("synth_failed", {{"detail", fail}});
  manifest.summary["records"] = batch.records.size();
  manifest.summary["failures"] = batch.failures.size();
  out << "wrote " << batch.records.size() << " synthetic cases to " << s.out << '\n';
  return batch.failures.empty() ? kExitOk : kExitPartial;
}

struct JudgeDataSettings {
  std::string out;
  int n = 1000;
  std::vector<std::string> protect;
  std::string topics;
  std::uint64_t seed = 20250101;
  int ngram = 5;
  int attempts_per_sample = 3;
  double temperature = 0.6;
};

int cmd_judge_data(const JudgeDataSettings& s, const BackendSettings& bs, RunManifest& manifest, Logger& log,
                   std::ostream& out) {
  if (s.n < 1) throw ValidationError("--n must be >= 1");
  if (s.ngram < 1) throw ValidationError("--ngram must be >= 1");
  std::vector<std::string> topics;
  if (s.topics.empty()) {
    auto path = default_synth_dir() / "categories.json";
    topics = load_category_tables(path).topics;
    manifest.add_input(path);
  } else {
    std::ifstream in(s.topics);
    if (!in) throw ValidationError("cannot open topics file " + s.topics);
    for (std::string line; std::getline(in, line);) {
      if (!text::is_blank(line)) topics.push_back(text::trim(line));
    }
    manifest.add_input(s.topics);
  }
  std::vector<std::string> corpus;
  for (const auto& p : s.protect) {
    auto part = load_protected_corpus(p);
    corpus.insert(corpus.end(), part.begin(), part.end());
    manifest.add_input(p);
  }
  NgramIndex index(corpus, static_cast<std::size_t>(s.ngram));
  manifest.seeds["topics"] = s.seed;
  Backend backend = open_backend(bs, 1024, manifest, log);

  JudgeDataOptions opts;
  opts.ngram_n = static_cast<std::size_t>(s.ngram);
  opts.seed = s.seed;
  opts.temperature = s.temperature;
  opts.attempts_per_sample = static_cast<std::size_t>(s.attempts_per_sample);
  opts.concurrency = bs.concurrency;
  JudgeDataResult res = generate_judge_data(topics, static_cast<std::size_t>(s.n), index, *backend.gateway, opts);
  auto pairs = judge_training_pairs(res.accepted);
  std::ofstream f(s.out, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + s.out);
  for (const auto& p : pairs) f << p.dump() << '\n';
  f.close();
  manifest.add_output(s.out);
  manifest.summary["accepted"] = res.accepted.size();
  manifest.summary["pairs"] = pairs.size();
  manifest.summary["rejected_malformed"] = res.rejected_malformed;
  manifest.summary["rejected_leak"] = res.rejected_leak;
  manifest.summary["backend_failures"] = res.backend_failures;
  out << "accepted " << res.accepted.size() << " samples (" << res.rejected_malformed << " malformed, "
      << res.rejected_leak << " leaking); wrote " << pairs.size() << " pairs to " << s.out << '\n';
  return res.accepted.size() == static_cast<std::size_t>(s.n) ? kExitOk : kExitPartial;
}

struct ValidateSettings {
  std::string dataset;
  bool split_compound = false;
  std::string out;
};

int cmd_validate(const ValidateSettings& v, RunManifest& manifest, std::ostream& out) {
  Dataset ds = load_dataset(v.dataset);
  manifest.add_input(v.dataset);
  std::size_t questions = 0;
  for (const auto& c : ds.cases) questions += c.ground_truth.size();
  out << "ok: " << ds.cases.size() << " cases, " << questions << " ground-truth questions\n";
  if (v.split_compound) {
    if (v.out.empty()) throw ValidationError("--split-compound needs --out");
    Dataset split = split_ground_truth(ds);
    save_dataset(split, v.out);
    manifest.add_output(v.out);
    std::size_t after = 0;
    for (const auto& c : split.cases) after += c.ground_truth.size();
    out << "split compound questions: " << questions << " -> " << after << '\n';
  }
  manifest.summary["cases"] = ds.cases.size();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Follow-up question generation and evaluation toolkit", "followup"};
  app.require_subcommand(1);
  std::string config_path;
  std::string log_level = "info";
  app.add_option("--config", config_path, "JSON file of settings (keys match long flag names)");
  app.add_option("--log-level", log_level, "debug | info | warn | error | quiet")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "quiet"}));

  Binder binder;
  BackendSettings backend;

  GenerateSettings gen;
  auto* generate = app.add_subcommand("generate", "generate a question set per case");
  generate->add_option("--dataset", gen.dataset, "dataset JSON-lines file")->required();
  generate->add_option("--out", gen.out, "prediction file to write")->required();
  binder.add(generate, "mode", gen.mode, "followupq | zero-shot | few-shot | k-fixed | long-thought")
      ->check(CLI::IsMember({"followupq", "zero-shot", "few-shot", "k-fixed", "long-thought"}));
  binder.add(generate, "k", gen.k, "question count for k-fixed mode");
  binder.add(generate, "shots", gen.shots, "few-shot exemplars (default: 3 for few-shot, else 0)");
  binder.add(generate, "example_bank", gen.example_bank, "few-shot exemplar bank");
  binder.add(generate, "k_ehr", gen.k_ehr, "questions per EHR agent");
  binder.add(generate, "k_diff", gen.k_diff, "rule-out questions per diagnosis");
  binder.add(generate, "k_symptom", gen.k_symptom, "questions per extracted symptom");
  binder.add(generate, "k_ambiguity", gen.k_ambiguity, "ambiguity questions");
  binder.add(generate, "k_temporal", gen.k_temporal, "temporal questions");
  binder.add(generate, "k_selftreat", gen.k_selftreat, "self-treatment questions");
  binder.add(generate, "temperature", gen.temperature, "sampling temperature");
  binder.add(generate, "seed", gen.seed, "run seed");
  binder.add(generate, "max_tokens", gen.max_tokens, "completion token limit");
  binder.add(generate, "ehr_in_clarification", gen.ehr_in_clarification, "show the chart to clarification agents");
  bind_backend(binder, generate, backend);

  FilterSettings fil;
  auto* filter = app.add_subcommand("filter", "reduce each question pool to at most k questions");
  filter->add_option("--pool", fil.pool, "pool file written by generate")->required();
  filter->add_option("--out", fil.out, "filtered file to write")->required();
  binder.add(filter, "target_k", fil.target_k, "maximum questions per case");
  binder.add(filter, "seed", fil.seed, "k-means seed");
  binder.add(filter, "clusters", fil.clusters, "cluster count (0: ceil(pool/5))");
  binder.add(filter, "temperature", fil.temperature, "sampling temperature");
  binder.add(filter, "max_tokens", fil.max_tokens, "completion token limit");
  bind_backend(binder, filter, backend);

  EvaluateSettings ev;
  auto* evaluate = app.add_subcommand("evaluate", "score predictions against ground truth");
  evaluate->add_option("--dataset", ev.dataset, "dataset with ground-truth questions")->required();
  evaluate->add_option("--predictions", ev.predictions, "prediction file")->required();
  evaluate->add_option("--out", ev.out, "report JSON to write")->required();
  binder.add(evaluate, "judge", ev.judge, "llm | exact")->check(CLI::IsMember({"llm", "exact"}));
  binder.add(evaluate, "coverage_only", ev.coverage_only, "stop judging a truth question at its first match");
  binder.add(evaluate, "judge_temperature", ev.judge_temperature, "judge sampling temperature");
  binder.add(evaluate, "judge_max_tokens", ev.judge_max_tokens, "judge completion token limit");
  binder.add(evaluate, "label", ev.label, "system name in the table");
  binder.add(evaluate, "unreliable_fraction", ev.unreliable_fraction, "flagged-verdict fraction that fails the run");
  bind_backend(binder, evaluate, backend);

  SynthSettings syn;
  auto* synth = app.add_subcommand("synth", "generate synthetic patient messages for sampled charts");
  synth->add_option("--ehr-pool", syn.ehr_pool, "dataset whose charts are sampled")->required();
  synth->add_option("--out", syn.out, "dataset file to write")->required();
  binder.add(synth, "n", syn.n, "cases to generate");
  binder.add(synth, "seed", syn.seed, "sampling seed");
  binder.add(synth, "categories", syn.categories, "category tables JSON");
  binder.add(synth, "exemplars", syn.exemplars, "in-context exemplars JSON-lines");
  binder.add(synth, "exemplar_count", syn.exemplar_count, "required exemplar count");
  binder.add(synth, "temperature", syn.temperature, "sampling temperature");
  binder.add(synth, "max_tokens", syn.max_tokens, "completion token limit");
  bind_backend(binder, synth, backend);

  JudgeDataSettings jd;
  auto* judge_data = app.add_subcommand("judge-data", "generate contrastive judge training pairs");
  judge_data->add_option("--out", jd.out, "pairs JSON-lines file to write")->required();
  binder.add(judge_data, "n", jd.n, "accepted samples wanted");
  binder.add(judge_data, "protect", jd.protect, "protected test-set file (repeatable)");
  binder.add(judge_data, "topics", jd.topics, "topic list, one per line");
  binder.add(judge_data, "seed", jd.seed, "topic sampling seed");
  binder.add(judge_data, "ngram", jd.ngram, "leak-filter n-gram size");
  binder.add(judge_data, "attempts_per_sample", jd.attempts_per_sample, "generation budget per sample");
  binder.add(judge_data, "temperature", jd.temperature, "sampling temperature");
  bind_backend(binder, judge_data, backend);

  ValidateSettings val;
  auto* validate = app.add_subcommand("validate", "check a dataset file against the schema");
  validate->add_option("dataset", val.dataset, "dataset JSON-lines file")->required();
  validate->add_flag("--split-compound", val.split_compound, "also split compound ground-truth questions");
  validate->add_option("--out", val.out, "where to write the split dataset");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  Logger log(err, log_level);
  CLI::App* sub = app.get_subcommands().front();
  RunManifest manifest;
  manifest.command = sub->get_name();
  manifest.argv = args;
  manifest.started_at = utc_timestamp();
  std::string out_path;
  if (sub == generate) out_path = gen.out;
  else if (sub == filter) out_path = fil.out;
  else if (sub == evaluate) out_path = ev.out;
  else if (sub == synth) out_path = syn.out;
  else if (sub == judge_data) out_path = jd.out;
  else out_path = val.out.empty() ? val.dataset + ".validate" : val.out;

  int code = kExitOk;
  try {
    binder.apply(sub, read_config_file(config_path, manifest));
    manifest.config = binder.snapshot(sub);
    if (sub == generate) code = cmd_generate(gen, backend, binder, manifest, log, out);
    else if (sub == filter) code = cmd_filter(fil, backend, manifest, log, out);
    else if (sub == evaluate) code = cmd_evaluate(ev, backend, manifest, log, out);
    else if (sub == synth) code = cmd_synth(syn, backend, manifest, log, out);
    else if (sub == judge_data) code = cmd_judge_data(jd, backend, manifest, log, out);
    else code = cmd_validate(val, manifest, out);
  } catch (const BackendError& e) {
    log.error("backend_error", {{"message", e.what()}});
    err << "error: " << e.what() << '\n';
    code = kExitBackend;
  } catch (const PipelineError& e) {
    log.error("pipeline_error", {{"message", e.what()}, {"issues", issues_text(e.issues())}});
    err << "error: " << e.what() << '\n';
    code = kExitPartial;
  } catch (const std::exception& e) {
    log.error("invalid_input", {{"message", e.what()}});
    err << "error: " << e.what() << '\n';
    code = kExitValidation;
  }
  manifest.exit_code = code;
  manifest.finished_at = utc_timestamp();
  try {
    write_manifest(manifest, manifest_path_for(out_path));
  } catch (const std::exception& e) {
    err << "error: cannot write manifest: " << e.what() << '\n';
    if (code == kExitOk) code = kExitValidation;
  }
  return code;
}

}  // namespace followup
