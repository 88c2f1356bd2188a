#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "followup/dataset.hpp"
#include "followup/domain.hpp"
#include "followup/gateway.hpp"
#include "followup/mock_backend.hpp"
#include "followup/text.hpp"

namespace testsupport {

using namespace followup;

inline PatientCase make_case(const std::string& id,
                             const std::string& message = "I have felt unwell for three days and it keeps getting worse.",
                             const std::vector<std::string>& truth = {}) {
  return {id, PatientMessage(message),
          EhrRecord{"Age: 50\nGender: Male", "Hypertension.", "Lisinopril 10 mg daily."},
          QuestionSet::from_texts(truth, AgentId::external)};
}

inline std::string numbered(const std::vector<std::string>& items) { return text::format_numbered_list(items); }

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / ("followup-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Disjoint scripted agents: 2 symptoms, 6 diagnoses. With the default config the pool
// holds 1 + 1 + 18 + 4 + 2 + 3 + 3 = 32 questions.
struct PoolScript {
  std::vector<std::string> history = {"Has your blood pressure been higher than usual at home?"};
  std::vector<std::string> meds = {"Did you take your lisinopril today?"};
  std::vector<std::string> best = {"Viral bronchitis", "Seasonal allergies", "Acid reflux"};
  std::vector<std::string> worst = {"Pulmonary embolism", "Community acquired pneumonia", "Heart failure"};
  std::vector<std::string> symptoms = {"chest tightness", "night sweats"};
  std::vector<std::string> selftreat = {"What have you taken for this so far?", "Did any remedy help even briefly?"};
  std::vector<std::string> temporal = {"When did this first start?", "Is it getting better or worse?",
                                       "Does it come and go?"};
  std::vector<std::string> ambiguity = {"What do you mean by unwell?", "Which activity makes it worse?",
                                        "How would you rate it from 1 to 10?"};

  std::vector<std::string> ruleout_for(const std::string& label) const {
    return {"Regarding " + label + ", do you have a fever?", "Regarding " + label + ", is it worse lying down?",
            "Regarding " + label + ", has anyone around you been sick?"};
  }
  std::vector<std::string> symptom_questions(const std::string& symptom) const {
    return {"How severe is the " + symptom + "?", "What makes the " + symptom + " better?"};
  }

  std::shared_ptr<MockChatModel> build() const {
    auto m = std::make_shared<MockChatModel>();
    using T = PromptTemplateId;
    m->set_default(T::extract_history, MockReply::ok("Hypertension diagnosed in 2015."));
    m->set_default(T::extract_meds, MockReply::ok("Lisinopril 10 mg daily."));
    m->set_default(T::gen_history, MockReply::ok(numbered(history)));
    m->set_default(T::gen_meds, MockReply::ok(numbered(meds)));
    m->set_default(T::best_case, MockReply::ok(numbered(best)));
    m->set_default(T::worst_case, MockReply::ok(numbered(worst)));
    for (const auto& label : best) m->on_substring(T::rule_out, label, MockReply::ok(numbered(ruleout_for(label))));
    for (const auto& label : worst) m->on_substring(T::rule_out, label, MockReply::ok(numbered(ruleout_for(label))));
    m->set_default(T::extract_symptoms, MockReply::ok(numbered(symptoms)));
    for (const auto& s : symptoms)
      m->on_substring(T::clar_symptom, "### Symptom ###\n" + s, MockReply::ok(numbered(symptom_questions(s))));
    m->set_default(T::clar_selftreat, MockReply::ok(numbered(selftreat)));
    m->set_default(T::clar_temporal, MockReply::ok(numbered(temporal)));
    m->set_default(T::clar_ambiguity, MockReply::ok(numbered(ambiguity)));
    return m;
  }

  /// Every question in canonical agent order.
  std::vector<std::string> expected_pool() const {
    std::vector<std::string> out = history;
    out.insert(out.end(), meds.begin(), meds.end());
    for (const auto& l : best) {
      auto q = ruleout_for(l);
      out.insert(out.end(), q.begin(), q.end());
    }
    for (const auto& l : worst) {
      auto q = ruleout_for(l);
      out.insert(out.end(), q.begin(), q.end());
    }
    for (const auto& s : symptoms) {
      auto q = symptom_questions(s);
      out.insert(out.end(), q.begin(), q.end());
    }
    out.insert(out.end(), selftreat.begin(), selftreat.end());
    out.insert(out.end(), temporal.begin(), temporal.end());
    out.insert(out.end(), ambiguity.begin(), ambiguity.end());
    return out;
  }
};

inline std::unique_ptr<Gateway> make_gateway(std::shared_ptr<ChatModel> chat, int concurrency = 4,
                                             std::size_t dim = 8) {
  GatewayOptions opts;
  opts.concurrency = concurrency;
  return std::make_unique<Gateway>(std::move(chat), std::make_shared<MockEmbeddingModel>(dim, 0), opts);
}

}  // namespace testsupport
