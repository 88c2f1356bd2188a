#include <gtest/gtest.h>

#include "followup/baselines.hpp"
#include "support.hpp"

using namespace followup;
using testsupport::numbered;
using T = PromptTemplateId;

namespace {

std::vector<std::string> questions(std::size_t n, const std::string& stem = "Question") {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back(stem + " " + std::to_string(i) + "?");
  return out;
}

BaselineResult run(const BaselineConfig& config, const std::string& completion,
                   std::shared_ptr<MockChatModel>* keep = nullptr) {
  auto mock = std::make_shared<MockChatModel>();
  mock->set_default(T::baseline_core, MockReply::ok(completion));
  auto gw = testsupport::make_gateway(mock);
  if (keep) *keep = mock;
  return generate_baseline(testsupport::make_case("b1"), config, *gw);
}

}  // namespace

TEST(Baselines, KFixedPromptCarriesExactInstruction) {
  BaselineConfig config;
  config.mode = BaselineMode::k_fixed;
  config.k = 40;
  auto prompt = render_baseline_prompt(testsupport::make_case("b1"), config);
  EXPECT_NE(prompt.find("write exactly 40 questions"), std::string::npos);
  EXPECT_EQ(prompt.find("as many questions as you need"), std::string::npos);
  EXPECT_NE(prompt.find("Lisinopril 10 mg daily."), std::string::npos);
  EXPECT_NE(prompt.find("Age: 50"), std::string::npos);

  config.mode = BaselineMode::long_thought;
  EXPECT_EQ(length_instruction(config), "Write as many questions as you need.");
}

TEST(Baselines, UnboundedZeroShotReturnsWhatParses) {
  BaselineConfig config;
  auto r = run(config, "Here are my questions:\n" + numbered(questions(11)));
  EXPECT_EQ(r.questions.size(), 11u);
  EXPECT_EQ(r.raw_count, 11u);
  EXPECT_TRUE(r.errors.empty());
  for (const auto& p : r.questions.provenance()) EXPECT_EQ(p.agent, AgentId::baseline);
}

TEST(Baselines, LongThoughtParsesTheLastList) {
  std::string reasoning;
  for (int i = 0; i < 30; ++i) reasoning += "I should consider the chart and message carefully here. ";
  reasoning += "\nDraft:\n" + numbered(questions(4, "Draft")) + "\nOn reflection the final list is:\n";
  BaselineConfig config;
  config.mode = BaselineMode::long_thought;
  auto r = run(config, reasoning + numbered(questions(10, "Final")));
  ASSERT_EQ(r.questions.size(), 10u);
  EXPECT_EQ(r.questions.items()[0].text(), "Final 1?");
  EXPECT_EQ(r.questions.items()[9].text(), "Final 10?");
}

TEST(Baselines, KFixedTruncatesOverLongOutput) {
  BaselineConfig config;
  config.mode = BaselineMode::k_fixed;
  config.k = 5;
  auto r = run(config, numbered(questions(8)));
  EXPECT_EQ(r.questions.size(), 5u);
  EXPECT_EQ(r.warnings.size(), 1u);
  auto short_r = run(config, numbered(questions(3)));
  EXPECT_EQ(short_r.questions.size(), 3u);
  EXPECT_TRUE(short_r.warnings.empty());
}

TEST(Baselines, NoListAfterRetryGivesEmptySetAndError) {
  BaselineConfig config;
  std::shared_ptr<MockChatModel> mock;
  auto r = run(config, "I am not able to help with that.", &mock);
  EXPECT_TRUE(r.questions.empty());
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].agent, "baseline");
  EXPECT_EQ(mock->calls(T::baseline_core), 2u);

  auto failing = std::make_shared<MockChatModel>();
  failing->set_default(T::baseline_core, MockReply::transport(500));
  auto gw = testsupport::make_gateway(failing);
  auto t = generate_baseline(testsupport::make_case("b1"), config, *gw);
  EXPECT_TRUE(t.questions.empty());
  EXPECT_EQ(t.errors.size(), 1u);
}

TEST(Baselines, ConfigValidation) {
  BaselineConfig config;
  config.mode = BaselineMode::k_fixed;
  config.k = 0;
  EXPECT_THROW(config.validate(), ValidationError);
  config.k = 3;
  config.shots = 1;
  EXPECT_THROW(config.validate(), ValidationError);  // empty bank
  config.shots = -1;
  EXPECT_THROW(config.validate(), ValidationError);
}

TEST(Baselines, DefaultBankLoads) {
  auto bank = load_example_bank(default_example_bank_path());
  ASSERT_GE(bank.size(), 3u);
  for (const auto& ex : bank) {
    EXPECT_FALSE(ex.message.empty());
    EXPECT_FALSE(ex.questions.empty());
    EXPECT_EQ(ex.provenance, "reconstructed");
  }
  EXPECT_EQ(bank[0].questions.size(), 8u);
  EXPECT_THROW(load_example_bank("/nonexistent/bank.jsonl"), ConfigError);
}

// Property: adding shots changes the prompt only by inserting the exemplar block.
TEST(BaselinesProperty, ShotsOnlyAddTheExemplarBlock) {
  auto bank = load_example_bank(default_example_bank_path());
  auto c = testsupport::make_case("b1");
  for (auto mode : {BaselineMode::unbounded, BaselineMode::k_fixed, BaselineMode::long_thought}) {
    BaselineConfig zero;
    zero.mode = mode;
    zero.example_bank = bank;
    const std::string p0 = render_baseline_prompt(c, zero);
    EXPECT_EQ(p0.find("### Example"), std::string::npos);
    for (int n = 1; n <= static_cast<int>(bank.size()); ++n) {
      BaselineConfig with = zero;
      with.shots = n;
      std::string pn = render_baseline_prompt(c, with);
      const std::string block =
          render_examples_block(std::span<const FewShotExample>(bank.data(), static_cast<std::size_t>(n)));
      auto at = pn.find(block);
      ASSERT_NE(at, std::string::npos);
      EXPECT_NE(block.find("### Example " + std::to_string(n) + " ###"), std::string::npos);
      pn.erase(at, block.size());
      EXPECT_EQ(pn, p0) << "shots=" << n;
    }
  }
}

TEST(Baselines, ExamplesBlockShape) {
  EXPECT_EQ(render_examples_block({}), "");
  FewShotExample ex{"e", EhrRecord{"Age: 30", "", "Ibuprofen"}, "My wrist hurts.", {"Did you fall?"}, "reconstructed"};
  auto block = render_examples_block(std::span<const FewShotExample>(&ex, 1));
  EXPECT_NE(block.find("### Example 1 ###"), std::string::npos);
  EXPECT_NE(block.find("My wrist hurts."), std::string::npos);
  EXPECT_NE(block.find("1) Did you fall?"), std::string::npos);
  EXPECT_NE(block.find("None listed."), std::string::npos);
}
