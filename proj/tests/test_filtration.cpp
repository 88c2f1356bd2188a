#include <gtest/gtest.h>

#include <algorithm>
#include <mutex>

#include "followup/filtration.hpp"
#include "followup/rng.hpp"
#include "support.hpp"

using namespace followup;
using testsupport::numbered;
using T = PromptTemplateId;

namespace {

QuestionSet make_pool(std::size_t n) {
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < n; ++i) texts.push_back("Question number " + std::to_string(i) + "?");
  return QuestionSet::from_texts(texts, AgentId::external);
}

std::shared_ptr<MockChatModel> identity_mock() {
  auto m = std::make_shared<MockChatModel>();
  m->set_responder(T::redundant_filter, responders::echo_list());
  m->set_responder(T::top_k, responders::echo_list());
  return m;
}

const PatientMessage kMessage("My chest has felt tight since yesterday.");

}  // namespace

TEST(Filtration, DefaultClusterCount) {
  const std::pair<std::size_t, std::size_t> cases[] = {{0, 1}, {1, 1}, {5, 1}, {6, 2}, {10, 2}, {32, 7}};
  for (auto [n, want] : cases) EXPECT_EQ(default_cluster_count(n), want) << n;
}

TEST(Filtration, IdentityModelsKeepTheFirstKInPoolOrder) {
  auto pool = make_pool(32);
  auto mock = identity_mock();
  auto gw = testsupport::make_gateway(mock);
  auto r = filter_pipeline(kMessage, pool, 10, 7, *gw);
  auto all = pool.texts();
  std::vector<std::string> want(all.begin(), all.begin() + 10);
  EXPECT_EQ(r.questions.texts(), want);
  EXPECT_EQ(r.report.input_size, 32u);
  EXPECT_EQ(r.report.post_dedup_size, 32u);
  EXPECT_EQ(r.report.final_size, 10u);
  EXPECT_EQ(r.report.cluster_count, 7u);
  EXPECT_EQ(r.report.removed.size(), 22u);
  for (const auto& rm : r.report.removed) EXPECT_EQ(rm.reason, RemovalReason::not_top_k);
  EXPECT_EQ(mock->calls(T::top_k), 1u);
}

TEST(Filtration, LargeKReturnsPoolUnchanged) {
  auto pool = make_pool(12);
  auto mock = identity_mock();
  auto gw = testsupport::make_gateway(mock);
  auto r = filter_pipeline(kMessage, pool, 50, 1, *gw);
  EXPECT_EQ(r.questions, pool);
  EXPECT_EQ(mock->calls(T::top_k), 0u);
}

TEST(Filtration, DeterministicForSeed) {
  auto pool = make_pool(25);
  auto run = [&](std::uint64_t seed) {
    auto mock = std::make_shared<MockChatModel>();
    // Keeps only the first question of every cluster; selection echoes.
    mock->set_responder(T::redundant_filter, [](const ModelRequest& r) {
      return MockReply::ok(numbered({parse_numbered_list(r.rendered_prompt).front()}));
    });
    mock->set_responder(T::top_k, responders::echo_list());
    auto gw = testsupport::make_gateway(mock, 8);
    return filter_pipeline(kMessage, pool, 4, seed, *gw);
  };
  auto a = run(123), b = run(123);
  EXPECT_EQ(a.questions, b.questions);
  EXPECT_EQ(a.report.removed, b.report.removed);
  EXPECT_EQ(a.report.post_dedup_size, a.report.cluster_count);
}

TEST(Filtration, ClustersFollowEmbeddingGeometry) {
  auto pool = QuestionSet::from_texts({"a?", "b?", "c?", "d?"}, AgentId::external);
  auto emb = std::make_shared<MockEmbeddingModel>(2);
  emb->pin("a?", {1.0, 0.0});
  emb->pin("b?", {0.0, 1.0});
  emb->pin("c?", {0.99, 0.01});
  emb->pin("d?", {0.01, 0.99});
  Gateway gw(identity_mock(), emb);
  auto clusters = cluster_questions(pool, 2, 5, gw);
  ASSERT_EQ(clusters.size(), 2u);
  for (const auto& cl : clusters) {
    ASSERT_EQ(cl.members.size(), 2u);
    bool ac = cl.members.texts() == std::vector<std::string>{"a?", "c?"};
    bool bd = cl.members.texts() == std::vector<std::string>{"b?", "d?"};
    EXPECT_TRUE(ac || bd);
  }
  EXPECT_THROW(cluster_questions(pool, 5, 5, gw), ValidationError);
  EXPECT_THROW(cluster_questions(QuestionSet{}, 1, 5, gw), ValidationError);
}

TEST(Dedup, MergedQuestionTakesTheClusterSlot) {
  QuestionCluster cl;
  cl.members = QuestionSet::from_texts({"Any fever?", "Have you had chills?", "Any night sweats?"},
                                       AgentId::external);
  cl.pool_indices = {0, 1, 2};
  auto mock = std::make_shared<MockChatModel>();
  mock->set_default(T::redundant_filter, MockReply::ok(numbered({"Any fever or chills?", "Any night sweats?"})));
  auto gw = testsupport::make_gateway(mock);
  auto r = deduplicate_cluster(cl, *gw);
  ASSERT_EQ(r.questions.size(), 2u);
  EXPECT_EQ(r.questions[0].text(), "Any fever or chills?");
  EXPECT_FALSE(r.passthrough);

  mock->set_default(T::redundant_filter, MockReply::ok(numbered({"a", "b", "c", "d"})));
  auto over = deduplicate_cluster(cl, *gw);
  EXPECT_TRUE(over.passthrough);
  EXPECT_EQ(over.questions, cl.members.items());
  EXPECT_EQ(over.warnings.size(), 1u);

  mock->set_default(T::redundant_filter, MockReply::ok("I could not decide."));
  EXPECT_TRUE(deduplicate_cluster(cl, *gw).passthrough);
}

TEST(Dedup, SingletonSkipsTheModel) {
  QuestionCluster cl;
  cl.members = QuestionSet::from_texts({"Any fever?"}, AgentId::external);
  cl.pool_indices = {4};
  auto mock = std::make_shared<MockChatModel>();
  auto gw = testsupport::make_gateway(mock);
  EXPECT_EQ(deduplicate_cluster(cl, *gw).questions.size(), 1u);
  EXPECT_EQ(mock->total_calls(), 0u);
}

TEST(TopK, KeepsInputOrderAndDropsUnknownSelections) {
  auto qs = make_pool(6);
  auto mock = std::make_shared<MockChatModel>();
  mock->set_default(T::top_k, MockReply::ok(numbered(
                                  {"question number 4", "Something invented?", "Question number 1?", "Question number 4?"})));
  auto gw = testsupport::make_gateway(mock);
  auto r = select_top_k(kMessage, qs, 3, *gw);
  EXPECT_EQ(r.selected.texts(), (std::vector<std::string>{"Question number 1?", "Question number 4?"}));
  EXPECT_EQ(r.dropped, std::vector<std::string>{"Something invented?"});
  EXPECT_TRUE(r.model_called);
  EXPECT_FALSE(r.fell_back);
  auto prompt = mock->requests(T::top_k)[0].rendered_prompt;
  EXPECT_NE(prompt.find(kMessage.text()), std::string::npos);
}

TEST(TopK, FallsBackToFirstKAfterRetry) {
  auto qs = make_pool(6);
  auto mock = std::make_shared<MockChatModel>();
  mock->set_default(T::top_k, MockReply::ok(numbered({"Nope?"})));
  auto gw = testsupport::make_gateway(mock);
  auto r = select_top_k(kMessage, qs, 2, *gw);
  EXPECT_TRUE(r.fell_back);
  EXPECT_EQ(mock->calls(T::top_k), 2u);
  EXPECT_EQ(r.selected.texts(), (std::vector<std::string>{"Question number 0?", "Question number 1?"}));
  EXPECT_THROW(select_top_k(kMessage, qs, 0, *gw), ValidationError);
}

// Property: the output never exceeds k, is a subset of pool-or-rewrites, and the report
// accounts for every pool question.
TEST(FiltrationProperty, SizeBoundAndAccounting) {
  Rng gen(17);
  for (int trial = 0; trial < 30; ++trial) {
    std::size_t n = 1 + gen.index(30);
    int k = 1 + static_cast<int>(gen.index(12));
    auto pool = make_pool(n);
    auto state = std::make_shared<std::pair<std::mutex, Rng>>(std::piecewise_construct, std::forward_as_tuple(),
                                                             std::forward_as_tuple(gen.next()));
    auto subset = [state](const ModelRequest& r) {
      auto items = parse_numbered_list(r.rendered_prompt);
      std::lock_guard lock(state->first);
      std::vector<std::string> keep;
      for (auto& it : items)
        if (state->second.index(2) == 0) keep.push_back(it);
      if (state->second.index(4) == 0) keep.push_back("Invented question?");
      return MockReply::ok(keep.empty() ? std::string("none") : numbered(keep));
    };
    auto mock = std::make_shared<MockChatModel>();
    mock->set_responder(T::redundant_filter, subset);
    mock->set_responder(T::top_k, subset);
    auto gw = testsupport::make_gateway(mock, 4);
    auto r = filter_pipeline(kMessage, pool, k, gen.next(), *gw);
    EXPECT_LE(r.questions.size(), static_cast<std::size_t>(k));
    EXPECT_GE(r.questions.size(), 1u);
    EXPECT_EQ(r.report.final_size, r.questions.size());
    std::size_t redundant = 0;
    for (const auto& rm : r.report.removed) redundant += rm.reason == RemovalReason::redundant;
    for (const auto& q : pool.items()) {
      bool kept = r.questions.contains(q.normalized());
      bool listed = std::any_of(r.report.removed.begin(), r.report.removed.end(),
                                [&](const Removal& rm) { return rm.question == q.text(); });
      EXPECT_NE(kept, listed) << q.text();
    }
    EXPECT_EQ(r.report.removed.size() - redundant, r.report.post_dedup_size - r.report.final_size);
  }
}
