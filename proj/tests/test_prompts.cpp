#include <gtest/gtest.h>

#include "followup/prompts.hpp"
#include "support.hpp"

using namespace followup;

TEST(PromptTemplate, RendersAndCollectsPlaceholders) {
  PromptTemplate t(PromptTemplateId::judge_match, PromptProvenance::reconstructed, "A={A} B={B} A again={A} {{lit}}");
  EXPECT_EQ(t.placeholders(), (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(t.render({{"A", "x"}, {"B", "{A}"}}), "A=x B={A} A again=x {lit}");
}

TEST(PromptTemplate, UnboundPlaceholderNamesIt) {
  PromptTemplate t(PromptTemplateId::top_k, PromptProvenance::reconstructed, "{msg} and {k}");
  try {
    t.render({{"msg", "m"}});
    FAIL() << "expected RenderError";
  } catch (const RenderError& e) {
    EXPECT_EQ(e.placeholder(), "k");
  }
}

TEST(PromptKit, LoadsEveryTemplate) {
  const auto& kit = PromptKit::shared();
  for (auto id : all_template_ids()) {
    const auto& t = kit.get(id);
    EXPECT_FALSE(t.body().empty()) << to_string(id);
    EXPECT_EQ(template_from_string(to_string(id)), id);
  }
  EXPECT_THROW(template_from_string("nope"), ConfigError);
}

TEST(PromptKit, ExpectedBindingsPerTemplate) {
  const auto& kit = PromptKit::shared();
  using V = std::vector<std::string>;
  auto sorted = [](V v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  EXPECT_EQ(sorted(kit.get(PromptTemplateId::rule_out).placeholders()), sorted({"msg", "k", "suspected_issue"}));
  EXPECT_EQ(sorted(kit.get(PromptTemplateId::judge_match).placeholders()), sorted({"A", "B"}));
  EXPECT_EQ(sorted(kit.get(PromptTemplateId::top_k).placeholders()), sorted({"msg", "questions", "k"}));
  EXPECT_EQ(sorted(kit.get(PromptTemplateId::clar_symptom).placeholders()), sorted({"msg", "symptom", "k"}));
  EXPECT_EQ(sorted(kit.get(PromptTemplateId::baseline_core).placeholders()),
            sorted({"length_instruction", "examples", "demographics", "history", "medications", "msg"}));
  EXPECT_EQ(sorted(kit.get(PromptTemplateId::contrastive_gen).placeholders()), sorted({"topic"}));
}

TEST(PromptKit, JudgeTemplateIsByteExact) {
  const auto& t = PromptKit::shared().get(PromptTemplateId::judge_match);
  EXPECT_EQ(t.provenance(), PromptProvenance::verbatim);
  const std::string expected =
      "You are presented with two medical questions written by two different doctors. Determine if the answer "
      "to question B will elicit the information required to answer question A. Keep in mind that question B "
      "should be equally as specific or vague as question A in order for two questions to elicit the same "
      "information.\n\nOutput yes or no and nothing else.\n\nQuestion A: {A}\n\nQuestion B: {B}\n\nAnswer:";
  EXPECT_EQ(t.body(), expected);
}

TEST(PromptKit, RejectsMissingProvenanceHeader) {
  testsupport::TempDir dir;
  for (auto id : all_template_ids())
    testsupport::write_file(dir / (std::string(to_string(id)) + ".txt"), "# provenance: reconstructed\nbody {x}\n");
  EXPECT_NO_THROW(PromptKit::load(dir.path()));
  testsupport::write_file(dir / "top_k.txt", "no header\n");
  EXPECT_THROW(PromptKit::load(dir.path()), ConfigError);
}

struct ListCase {
  const char* input;
  std::vector<std::string> expected;
};

TEST(ParseNumberedList, Table) {
  const ListCase cases[] = {
      {"1) a\n2) b\n3) c", {"a", "b", "c"}},
      {"1. a 2. b", {"a", "b"}},
      {"1: first\n2: second", {"first", "second"}},
      {"Sure! Here you go:\n1) Any fever?\n2) Any cough?\nLet me know.", {"Any fever?", "Any cough?"}},
      {"reasoning 1) x 2) y\nmore thinking\n1) final a\n2) final b", {"final a", "final b"}},
      {"1) a\n2. b\n2) c", {"a", "c"}},
      {"no list here", {}},
      {"", {}},
      {"1)\n2) b", {"b"}},
      {"1) Rate it from 1 to 10?\n2) Since 2.5 days?", {"Rate it from 1 to 10?", "Since 2.5 days?"}},
  };
  for (const auto& c : cases) EXPECT_EQ(parse_numbered_list(c.input), c.expected) << c.input;
}

TEST(ParseNumberedList, RoundTripsFormattedLists) {
  std::vector<std::string> items = {"Do you have a fever?", "How long, and how often?", "Any rash?"};
  EXPECT_EQ(parse_numbered_list(text::format_numbered_list(items)), items);
}
