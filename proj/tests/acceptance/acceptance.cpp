// One PASS/FAIL/SKIP line per acceptance criterion. Exit status is non-zero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "followup/cli.hpp"
#include "followup/evaluation.hpp"
#include "followup/filtration.hpp"
#include "followup/http_backend.hpp"
#include "followup/kmeans.hpp"
#include "followup/pipeline.hpp"
#include "followup/rng.hpp"
#include "followup/synthgen.hpp"
#include "support.hpp"

using namespace followup;
using T = PromptTemplateId;

namespace {

struct Outcome {
  enum Kind { pass, fail, skip } kind = pass;
  std::string detail;
};

// Collects the first failing check of a criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && first_.empty()) first_ = what;
  }
  Outcome outcome(std::string detail = {}) const {
    if (!first_.empty()) return {Outcome::fail, first_};
    return {Outcome::pass, std::move(detail)};
  }

 private:
  std::string first_;
};

std::vector<std::vector<bool>> random_rows(Rng& gen, std::size_t r, std::size_t c, double p) {
  std::vector<std::vector<bool>> rows(r, std::vector<bool>(c));
  for (auto& row : rows)
    for (std::size_t j = 0; j < c; ++j) row[j] = gen.uniform01() < p;
  return rows;
}

std::size_t scan_covered(const std::vector<std::vector<bool>>& rows) {
  std::size_t n = 0;
  for (const auto& row : rows) {
    bool hit = false;
    for (bool b : row) hit = hit || b;
    n += hit;
  }
  return n;
}

Outcome metric_oracle() {
  Check check;
  Rng gen(1001);
  std::vector<SampleScore> scores;
  std::size_t perfect = 0, matched = 0, truth = 0;
  for (int i = 0; i < 1000; ++i) {
    std::size_t r = 1 + gen.index(10), c = gen.index(51);
    auto rows = random_rows(gen, r, c, gen.uniform01() * 0.25);
    auto m = MatchMatrix::from_rows(rows);
    std::size_t covered = scan_covered(rows);
    double rim = compute_rim(m);
    check.expect(rim == static_cast<double>(covered) / static_cast<double>(r), "rim differs from row scan");
    scores.push_back({"m" + std::to_string(i), rim, m.covered_rows(), r, c, m.judged_count(), 0});
    perfect += covered == r;
    matched += covered;
    truth += r;
  }
  auto agg = compute_aggregates(scores);
  double mr = 100.0 * static_cast<double>(perfect) / 1000.0;
  double global = static_cast<double>(matched) / static_cast<double>(truth);
  check.expect(std::abs(agg.mr_percent - mr) <= 1e-12, "MR% differs from oracle");
  check.expect(std::abs(agg.global_match - global) <= 1e-12, "global match differs from oracle");
  char buf[96];
  std::snprintf(buf, sizeof buf, "1000 matrices, MR%% %.1f, global %.4f", mr, global);
  return check.outcome(buf);
}

Outcome rim_monotone() {
  Check check;
  Rng gen(2002);
  for (int i = 0; i < 500; ++i) {
    std::size_t r = 1 + gen.index(10), c = gen.index(50);
    auto m = c == 0 ? MatchMatrix(r, 0) : MatchMatrix::from_rows(random_rows(gen, r, c, 0.08));
    double before = c == 0 ? 0.0 : compute_rim(m);
    std::vector<bool> col(r);
    for (std::size_t k = 0; k < r; ++k) col[k] = gen.uniform01() < 0.25;
    m.add_column(col);
    check.expect(compute_rim(m) >= before, "rim decreased after adding a column");
  }
  return check.outcome("500 pairs");
}

Outcome pool_composition() {
  Check check;
  testsupport::PoolScript script;
  PipelineConfig config;
  check.expect(config.k_ehr == 1 && config.k_diff == 3 && config.k_symptom == 2 && config.k_ambiguity == 3 &&
                   config.k_temporal == 3 && config.k_selftreat == 2,
               "default k values changed");
  auto gw = testsupport::make_gateway(script.build(), 4);
  auto c = testsupport::make_case("acceptance-pool");
  auto pool = build_question_pool(c, {config, *gw});
  check.expect(pool.questions.size() == 32, "pool size " + std::to_string(pool.questions.size()));
  check.expect(pool_size_bound(config, 2) == 32, "bound formula");
  check.expect(pool.questions.texts() == script.expected_pool(), "pool order");
  return check.outcome("|pool| = " + std::to_string(pool.questions.size()));
}

QuestionSet numbered_pool(std::size_t n, std::size_t salt) {
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < n; ++i)
    texts.push_back("Pool " + std::to_string(salt) + " question " + std::to_string(i) + "?");
  return QuestionSet::from_texts(texts, AgentId::external);
}

Outcome filtration_contract() {
  Check check;
  const PatientMessage message("My knee has been swelling since the weekend.");
  Rng gen(4004);
  for (std::size_t p = 0; p < 100; ++p) {
    auto pool = numbered_pool(1 + gen.index(45), p);
    const std::uint64_t seed = gen.next();
    for (int k : {5, 10, 20}) {
      auto identity = std::make_shared<MockChatModel>();
      identity->set_responder(T::redundant_filter, responders::echo_list());
      identity->set_responder(T::top_k, responders::echo_list());
      auto gw = testsupport::make_gateway(identity, 4);
      auto r = filter_pipeline(message, pool, k, seed, *gw);
      auto all = pool.texts();
      std::vector<std::string> first_k(all.begin(), all.begin() + std::min<std::size_t>(all.size(), k));
      check.expect(r.questions.size() <= static_cast<std::size_t>(k), "final size above target_k");
      check.expect(r.questions.texts() == first_k, "identity mocks did not keep first-k");

      // A model that drops and invents items still cannot exceed target_k.
      auto noisy = std::make_shared<MockChatModel>();
      auto state = std::make_shared<std::pair<std::mutex, Rng>>(std::piecewise_construct, std::forward_as_tuple(),
                                                               std::forward_as_tuple(seed));
      auto subset = [state](const ModelRequest& req) {
        auto items = parse_numbered_list(req.rendered_prompt);
        std::lock_guard lock(state->first);
        std::vector<std::string> keep;
        for (auto& it : items)
          if (state->second.index(3) != 0) keep.push_back(it);
        keep.push_back("Question nobody asked?");
        return MockReply::ok(text::format_numbered_list(keep));
      };
      noisy->set_responder(T::redundant_filter, subset);
      noisy->set_responder(T::top_k, subset);
      auto gw2 = testsupport::make_gateway(noisy, 4);
      check.expect(filter_pipeline(message, pool, k, seed, *gw2).questions.size() <= static_cast<std::size_t>(k),
                   "noisy model exceeded target_k");
    }
    auto gw = testsupport::make_gateway(std::make_shared<MockChatModel>(), 4);
    auto clusters = default_cluster_count(pool.size());
    auto a = cluster_questions(pool, clusters, seed, *gw);
    auto b = cluster_questions(pool, clusters, seed, *gw);
    check.expect(a.size() == b.size(), "cluster count differs between runs");
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
      check.expect(a[i].pool_indices == b[i].pool_indices, "clustering differs between runs");
  }
  return check.outcome("100 pools x 3 targets");
}

// Same-cluster relation over all point pairs; equal for equal partitions regardless of labels.
std::vector<bool> co_membership(const std::vector<std::size_t>& assign) {
  std::vector<bool> out;
  for (std::size_t i = 0; i < assign.size(); ++i)
    for (std::size_t j = i + 1; j < assign.size(); ++j) out.push_back(assign[i] == assign[j]);
  return out;
}

std::vector<std::size_t> brute_force_partition(const std::vector<std::vector<double>>& pts) {
  const std::size_t n = pts.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_assign;
  for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
    std::vector<std::size_t> assign(n);
    for (std::size_t i = 0; i < n; ++i) assign[i] = (mask >> i) & 1u;
    double sse = 0;
    for (std::size_t c = 0; c < 2; ++c) {
      std::vector<double> mean(pts[0].size(), 0.0);
      double cnt = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (assign[i] == c) {
          cnt += 1;
          for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += pts[i][d];
        }
      for (auto& m : mean) m /= cnt;
      for (std::size_t i = 0; i < n; ++i)
        if (assign[i] == c)
          for (std::size_t d = 0; d < mean.size(); ++d) sse += (pts[i][d] - mean[d]) * (pts[i][d] - mean[d]);
    }
    if (sse < best) {
      best = sse;
      best_assign = assign;
    }
  }
  return best_assign;
}

Outcome kmeans_oracle() {
  Check check;
  Rng gen(5005);
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t n = 3 + gen.index(6);  // 3..8 points
    const std::size_t left = 1 + gen.index(n - 1);
    std::vector<std::vector<double>> pts;
    std::vector<std::string> texts;
    auto embed = std::make_shared<MockEmbeddingModel>(3, 0);
    for (std::size_t i = 0; i < n; ++i) {
      double base = i < left ? 0.0 : 10.0;
      std::vector<double> v = {base + gen.uniform01(), -base + gen.uniform01(), 0.5 * gen.uniform01()};
      texts.push_back("Instance " + std::to_string(inst) + " point " + std::to_string(i) + "?");
      embed->pin(texts.back(), v);
      pts.push_back(v);
    }
    // Interleave the two groups so pool order does not reveal the answer.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[gen.index(i)]);
    std::vector<std::string> shuffled_texts;
    std::vector<std::vector<double>> shuffled_pts;
    for (auto i : order) {
      shuffled_texts.push_back(texts[i]);
      shuffled_pts.push_back(pts[i]);
    }
    auto want = co_membership(brute_force_partition(shuffled_pts));

    Gateway gw(std::make_shared<MockChatModel>(), embed);
    auto clusters = cluster_questions(QuestionSet::from_texts(shuffled_texts, AgentId::external), 2, gen.next(), gw);
    std::vector<std::size_t> assign(n);
    for (const auto& cl : clusters)
      for (auto idx : cl.pool_indices) assign[idx] = static_cast<std::size_t>(cl.cluster_id);
    check.expect(co_membership(assign) == want, "instance " + std::to_string(inst) + " partition differs");
  }
  return check.outcome("20 instances");
}

Outcome judge_fidelity() {
  Check check;
  auto mock = std::make_shared<MockChatModel>();
  mock->on_substring(T::judge_match,
                     "Question A: Was your workout more intense than usual?\n\nQuestion B: Have you been exercising?",
                     MockReply::ok("No"));
  mock->on_substring(T::judge_match,
                     "Question A: Does it hurt to touch?\n\nQuestion B: If you apply pressure on it with your "
                     "fingers does the pain increase?",
                     MockReply::ok("Yes"));
  auto gw = testsupport::make_gateway(mock);
  auto no = judge_pair(Question("Was your workout more intense than usual?"), Question("Have you been exercising?"), *gw);
  auto yes = judge_pair(Question("Does it hurt to touch?"),
                        Question("If you apply pressure on it with your fingers does the pain increase?"), *gw);
  check.expect(!no.match && !no.flagged(), "workout/exercising should be a clean No");
  check.expect(yes.match && !yes.flagged(), "touch/pressure should be a clean Yes");

  const std::string expected =
      "You are presented with two medical questions written by two different doctors. Determine if the answer to "
      "question B will elicit the information required to answer question A. Keep in mind that question B should be "
      "equally as specific or vague as question A in order for two questions to elicit the same information.\n\n"
      "Output yes or no and nothing else.\n\nQuestion A: Does it hurt to touch?\n\nQuestion B: If you apply pressure "
      "on it with your fingers does the pain increase?\n\nAnswer:";
  check.expect(render_judge_prompt(Question("Does it hurt to touch?"),
                                   Question("If you apply pressure on it with your fingers does the pain increase?")) ==
                   expected,
               "judge prompt bytes differ");
  return check.outcome("2 examples, prompt byte-exact");
}

bool brute_force_leak(const std::string& cand, const std::vector<std::string>& corpus, std::size_t n) {
  auto grams = [n](const std::string& s) {
    auto toks = ngram_tokens(s);
    std::set<std::vector<std::string>> out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) out.insert({toks.begin() + i, toks.begin() + i + n});
    return out;
  };
  auto mine = grams(cand);
  for (const auto& c : corpus)
    for (const auto& g : grams(c))
      if (mine.contains(g)) return true;
  return false;
}

Outcome judge_data() {
  Check check;
  const std::vector<std::string> topics = {"cough", "fever", "rash", "headache", "ankle swelling", "back pain"};
  const std::vector<std::string> protected_set = {"When did the cough begin and is it worse at night?",
                                                  "Is the rash on your arm itchy?",
                                                  "Does the headache wake you up at night?"};
  NgramIndex index(protected_set, 5);
  auto mock = std::make_shared<MockChatModel>();
  mock->set_responder(T::contrastive_gen, responders::contrastive_from_topic());
  auto gw = testsupport::make_gateway(mock, 8);
  JudgeDataOptions opts;
  opts.concurrency = 8;
  auto result = generate_judge_data(topics, 1000, index, *gw, opts);
  check.expect(result.accepted.size() == 1000, "accepted " + std::to_string(result.accepted.size()));
  auto pairs = judge_training_pairs(result.accepted);
  check.expect(pairs.size() == 2000, "pairs " + std::to_string(pairs.size()));
  std::size_t leaks = 0;
  for (const auto& s : result.accepted)
    for (const auto& t : {s.root, s.positive, s.negative}) leaks += brute_force_leak(t, protected_set, 5);
  check.expect(leaks == 0, std::to_string(leaks) + " exported texts leak");
  return check.outcome(std::to_string(pairs.size()) + " pairs, " + std::to_string(result.rejected_leak) +
                       " leaking candidates rejected");
}

Outcome synth_statistics() {
  Check check;
  auto tables = load_category_tables(default_synth_dir() / "categories.json");
  const std::vector<EhrRecord> charts = {{"Age: 34\nGender: Female", "", ""},
                                         {"Age: 71\nGender: Male", "Hypertension.", ""},
                                         {"Name: R\nAge: 9\nSex: Male", "", ""}};
  const std::pair<int, std::string> expected[] = {{34, "Female"}, {71, "Male"}, {9, "Male"}};
  Rng rng(8008);
  const int draws = 10000;
  std::map<std::string, int> dur, urg, rep, lit;
  for (int i = 0; i < draws; ++i) {
    const std::size_t c = static_cast<std::size_t>(i) % charts.size();
    auto s = sample_message_spec(rng, charts[c], tables);
    check.expect(s.age == expected[c].first && s.gender == expected[c].second, "demographics not copied");
    ++dur[s.duration];
    ++urg[s.urgency];
    ++rep[s.reporting_level];
    ++lit[s.health_literacy];
  }
  double worst = 0;
  auto within = [&](const std::vector<WeightedValue>& table, std::map<std::string, int>& counts) {
    double total = 0;
    for (const auto& wv : table) total += wv.weight;
    for (const auto& wv : table) {
      double dev = std::abs(counts[wv.value] / static_cast<double>(draws) - wv.weight / total);
      worst = std::max(worst, dev);
      check.expect(dev <= 0.02, "frequency of " + wv.value + " off by more than 0.02");
    }
  };
  within(tables.duration, dur);
  within(tables.urgency, urg);
  within(tables.reporting_level, rep);
  within(tables.health_literacy, lit);
  char buf[64];
  std::snprintf(buf, sizeof buf, "10000 draws, max deviation %.4f", worst);
  return check.outcome(buf);
}

struct CliRun {
  int code = 0;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  args.insert(args.begin(), {"--log-level", "error"});
  int code = run_cli(args, out, err);
  return {code, err.str()};
}

Outcome end_to_end() {
  Check check;
  const std::string fixtures = std::string(FOLLOWUP_TEST_FIXTURES) + "/e2e/";
  const std::string dataset = fixtures + "dataset.jsonl", mock = fixtures + "mock.json";
  auto run = [&](const testsupport::TempDir& dir) {
    const std::string pool = (dir / "pool.jsonl").string(), filtered = (dir / "filtered.jsonl").string(),
                      report = (dir / "report.json").string();
    auto g = cli({"generate", "--dataset", dataset, "--out", pool, "--mock-script", mock});
    check.expect(g.code == kExitOk, "generate exited " + std::to_string(g.code) + ": " + g.err);
    auto f = cli({"filter", "--pool", pool, "--out", filtered, "--target-k", "10", "--mock-script", mock});
    check.expect(f.code == kExitOk, "filter exited " + std::to_string(f.code) + ": " + f.err);
    auto e = cli({"evaluate", "--dataset", dataset, "--predictions", filtered, "--out", report, "--mock-script", mock});
    check.expect(e.code == kExitOk, "evaluate exited " + std::to_string(e.code) + ": " + e.err);
    std::vector<std::string> bytes;
    for (const auto& p : {pool, filtered, filtered + ".report.json", report, report + ".table.txt"})
      bytes.push_back(testsupport::read_file(p));
    return bytes;
  };
  testsupport::TempDir a, b;
  auto first = run(a);
  auto second = run(b);
  check.expect(first == second, "outputs differ between runs");
  auto report = nlohmann::json::parse(first[3]);
  check.expect(report["table_cell"] == "0.67 / 10", "unexpected table cell " + report["table_cell"].dump());
  check.expect(report["mr_percent"] == 40.0, "unexpected MR%");
  return check.outcome("5 cases, MR% 40, cell " + report["table_cell"].get<std::string>());
}

Outcome live_judge() {
  const char* endpoint = std::getenv("FOLLOWUP_JUDGE_ENDPOINT");
  const char* pairs_path = std::getenv("FOLLOWUP_JUDGE_PAIRS");
  if (!endpoint || !*endpoint || !pairs_path || !*pairs_path)
    return {Outcome::skip, "set FOLLOWUP_JUDGE_ENDPOINT and FOLLOWUP_JUDGE_PAIRS to run"};
  BackendConfig config;
  config.endpoint = endpoint;
  if (const char* key = std::getenv("FOLLOWUP_API_KEY"); key && *key) config.api_key = key;
  GatewayOptions opts;
  if (const char* model = std::getenv("FOLLOWUP_JUDGE_MODEL"); model && *model) opts.model_name = model;
  Gateway gw(std::make_shared<HttpChatModel>(config), {}, opts);
  LlmJudge judge(gw);
  auto pairs = load_labeled_pairs(pairs_path);
  auto score = score_judge(judge, pairs, 4);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu pairs, macro F1 %.3f, %zu flagged", pairs.size(), score.macro_f1, score.flagged);
  return {score.macro_f1 >= 0.85 ? Outcome::pass : Outcome::fail, buf};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 means no runtime bound
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, "metric oracle equivalence", 5.0, metric_oracle},
      {2, "RIM monotonicity", 0, rim_monotone},
      {3, "pool composition", 1.0, pool_composition},
      {4, "filtration contract", 10.0, filtration_contract},
      {5, "k-means oracle", 0, kmeans_oracle},
      {6, "judge plumbing fidelity", 0, judge_fidelity},
      {7, "judge-data export and leak filter", 0, judge_data},
      {8, "synth sampling statistics", 5.0, synth_statistics},
      {9, "end-to-end determinism", 10.0, end_to_end},
      {10, "live judge macro F1", 0, live_judge},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Outcome::fail, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.kind == Outcome::pass && c.budget_s > 0 && secs >= c.budget_s) {
      o.kind = Outcome::fail;
      o.detail += " (over the runtime budget)";
    }
    const char* tag = o.kind == Outcome::pass ? "PASS" : o.kind == Outcome::fail ? "FAIL" : "SKIP";
    failures += o.kind == Outcome::fail;
    std::printf("%s  %2d  %-36s %7.3fs  %s\n", tag, c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
