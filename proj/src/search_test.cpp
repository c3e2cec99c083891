#include "panel/search.hpp"

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace panel {
namespace {

// Step number from the stop string "\n\nStep {k+1}:".
int step_of(const ChatRequest& r) {
  for (const auto& s : r.stop) {
    auto pos = s.find("Step ");
    if (pos != std::string::npos) return std::stoi(s.substr(pos + 5)) - 1;
  }
  return 0;
}

// Two-step script: slot i at step k says "s{k}c{i}"; step 2 candidates end the
// solution. Critiques approve only slot `good`; decisions follow critiques.
std::shared_ptr<ScriptedProvider> two_step_script(int good) {
  auto p = std::make_shared<ScriptedProvider>();
  p->set_handler([good](const ChatRequest& r) -> std::optional<std::string> {
    const std::string& tag = r.tag;
    auto slot = [&](std::string_view prefix) { return std::stoi(tag.substr(prefix.size())); };
    if (tag == "stage1-greedy" || tag.starts_with("stage1-sample-")) {
      int i = tag == "stage1-greedy" ? 0 : slot("stage1-sample-");
      int k = step_of(r);
      std::string text = "s" + std::to_string(k) + "c" + std::to_string(i);
      if (k == 2) text += " FINAL ANSWER: " + std::to_string(40 + i);
      return text;
    }
    if (tag.starts_with("stage2-critique-")) {
      return slot("stage2-critique-") == good ? R"({"correctness":"correct","critique":""})"
                                              : R"({"correctness":"incorrect","critique":"off"})";
    }
    if (tag == "stage3-decision") return "SELECTED: " + std::to_string(good);
    if (tag == "stage3-decision-nocritique") return "SELECTED: 0";
    return std::nullopt;
  });
  return p;
}

SearchConfig small_config() {
  SearchConfig c;
  c.candidates = 3;
  c.concurrency_limit = 2;
  return c;
}

TEST(SearchHelpersTest, DelimiterAndTerminal) {
  EXPECT_EQ(step_delimiter(2), "\n\nStep 2:");
  EXPECT_TRUE(is_terminal("so FINAL ANSWER: 3"));
  EXPECT_TRUE(is_terminal("final answer: 3"));
  EXPECT_FALSE(is_terminal("the final answer is 3"));
  std::vector<std::string> steps{"a", "b"};
  EXPECT_EQ(join_steps(steps), "a\n\nb");
}

TEST(SearchConfigTest, Validation) {
  SearchConfig c;
  EXPECT_NO_THROW(c.validate());
  c.candidates = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SearchConfig{};
  c.max_steps = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  SearchConfig back = SearchConfig::from_json(nlohmann::json::parse(SearchConfig{}.to_json().dump()));
  EXPECT_EQ(back.to_json(), SearchConfig{}.to_json());
}

TEST(SampleCandidatesTest, GreedyFirstThenSampled) {
  auto p = two_step_script(1);
  Engine e = testing::engine_with(p);
  SearchConfig c = small_config();
  CandidateSet set = sample_candidates(testing::integer_task(), {}, c, e);
  ASSERT_EQ(set.size(), 3u);
  EXPECT_EQ(set.step_index, 1);
  EXPECT_EQ(set.candidates[0].origin, CandidateOrigin::greedy);
  EXPECT_EQ(set.candidates[0].text, "s1c0");
  EXPECT_EQ(set.candidates[2].text, "s1c2");
  for (const auto& r : p->requests()) {
    EXPECT_EQ(r.temperature, r.tag == "stage1-greedy" ? 0.0 : 0.6);
    EXPECT_EQ(r.stop, std::vector<std::string>{"\n\nStep 2:"});
    EXPECT_EQ(r.max_tokens, 512);
  }
}

TEST(SampleCandidatesTest, DuplicatesAndSubstitution) {
  auto p = std::make_shared<ScriptedProvider>();
  p->enqueue("stage1-greedy", "same");
  p->enqueue("stage1-sample-1", "same");
  p->enqueue("stage1-sample-2", ProviderErrorKind::timeout);
  p->enqueue("stage1-sample-2-retry", ProviderErrorKind::timeout);
  Engine e = testing::engine_with(p);
  CandidateSet set = sample_candidates(testing::integer_task(), {}, small_config(), e);
  EXPECT_EQ(set.candidates[1].duplicate_of, 0);
  EXPECT_TRUE(set.candidates[2].substituted);
  EXPECT_EQ(set.candidates[2].text, "same");
  EXPECT_EQ(set.candidates[2].duplicate_of, 0);
}

TEST(SampleCandidatesTest, GreedyFailureKeepsKind) {
  auto p = std::make_shared<ScriptedProvider>();
  p->enqueue("stage1-greedy", ProviderErrorKind::http_status);
  p->enqueue("stage1-sample-1", "x");
  p->enqueue("stage1-sample-2", "y");
  Engine e = testing::engine_with(p);
  try {
    sample_candidates(testing::integer_task(), {}, small_config(), e);
    FAIL();
  } catch (const ProviderError& err) {
    EXPECT_EQ(err.kind(), ProviderErrorKind::http_status);
  }
}

TEST(RunPanelTest, FollowsCritiqueGuidedSelection) {
  auto p = two_step_script(2);
  Engine e = testing::engine_with(p);
  Task t = testing::integer_task("t", "42");
  SearchTrace trace = run_panel(t, small_config(), e);
  ASSERT_EQ(trace.steps.size(), 2u);
  EXPECT_EQ(trace.terminated_by, TerminatedBy::final_answer);
  EXPECT_EQ(trace.steps[0].chosen_index(), 2);
  EXPECT_EQ(trace.steps[0].counterfactual_index(), 0);
  EXPECT_EQ(trace.final_text, "s1c2\n\ns2c2 FINAL ANSWER: 42");
  EXPECT_TRUE(trace.grade.correct);
  EXPECT_EQ(trace.method, "panel");
  EXPECT_EQ(trace.steps[1].critiques.size(), 3u);
}

TEST(RunPanelTest, CounterfactualDoesNotSteer) {
  SearchConfig on = small_config();
  SearchConfig off = small_config();
  off.compute_counterfactual = false;
  auto p1 = two_step_script(1);
  auto p2 = two_step_script(1);
  Engine e1 = testing::engine_with(p1);
  Engine e2 = testing::engine_with(p2);
  SearchTrace a = run_panel(testing::integer_task(), on, e1);
  SearchTrace b = run_panel(testing::integer_task(), off, e2);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_EQ(a.steps[i].chosen_index(), b.steps[i].chosen_index());
    EXPECT_FALSE(b.steps[i].counterfactual);
  }
  for (const auto& r : p2->requests()) EXPECT_NE(r.tag, "stage3-decision-nocritique");
}

TEST(RunPanelTest, StopsAtMaxSteps) {
  auto p = std::make_shared<ScriptedProvider>();
  p->set_handler([](const ChatRequest& r) -> std::optional<std::string> {
    if (r.tag.starts_with("stage1")) return "keep going " + r.tag;
    if (r.tag.starts_with("stage2")) return R"({"correctness":"correct","critique":""})";
    return "SELECTED: 1";
  });
  SearchConfig c = small_config();
  c.max_steps = 3;
  Engine e = testing::engine_with(p);
  SearchTrace trace = run_panel(testing::integer_task(), c, e);
  EXPECT_EQ(trace.steps.size(), 3u);
  EXPECT_EQ(trace.terminated_by, TerminatedBy::max_steps);
  EXPECT_EQ(trace.grade.failure_reason, GradeFailure::no_answer_found);
}

TEST(RunPanelTest, ProviderErrorEndsTrace) {
  auto p = std::make_shared<ScriptedProvider>();
  p->enqueue("stage1-greedy", ProviderErrorKind::transport);
  p->enqueue("stage1-sample-1", "a");
  p->enqueue("stage1-sample-2", "b");
  Engine e = testing::engine_with(p);
  SearchTrace trace = run_panel(testing::integer_task(), small_config(), e);
  EXPECT_EQ(trace.terminated_by, TerminatedBy::provider_error);
  EXPECT_TRUE(trace.error);
  EXPECT_TRUE(trace.steps.empty());
  EXPECT_FALSE(trace.grade.correct);
}

TEST(RunStepSelfEvalTest, ArgmaxOfScores) {
  auto p = std::make_shared<ScriptedProvider>();
  p->set_handler([](const ChatRequest& r) -> std::optional<std::string> {
    if (r.tag == "stage1-greedy") return "g FINAL ANSWER: 1";
    if (r.tag.starts_with("stage1-sample-")) return r.tag + " FINAL ANSWER: 42";
    if (r.tag == "stepeval-score-0") return "5";
    if (r.tag == "stepeval-score-1") return "9";
    if (r.tag == "stepeval-score-2") return "9";
    return std::nullopt;
  });
  Engine e = testing::engine_with(p);
  SearchTrace trace = run_step_self_eval(testing::integer_task(), small_config(), e);
  ASSERT_EQ(trace.steps.size(), 1u);
  EXPECT_EQ(trace.steps[0].chosen_index(), 1);
  EXPECT_EQ(trace.steps[0].scores.size(), 3u);
  EXPECT_TRUE(trace.steps[0].critiques.empty());
  EXPECT_TRUE(trace.grade.correct);
  EXPECT_EQ(trace.method, "step_self_eval");
}

TEST(GreedyBaselineTest, SingleCompletion) {
  auto p = std::make_shared<ScriptedProvider>();
  p->enqueue("greedy-solution", "6*7=42\nFINAL ANSWER: 42");
  Engine e = testing::engine_with(p);
  SearchTrace trace = run_greedy_baseline(testing::integer_task(), 4096, e);
  EXPECT_TRUE(trace.grade.correct);
  EXPECT_EQ(trace.terminated_by, TerminatedBy::final_answer);
  ASSERT_EQ(p->call_count(), 1u);
  EXPECT_EQ(p->requests()[0].temperature, 0.0);
  EXPECT_EQ(p->requests()[0].max_tokens, 4096);
}

TEST(TraceJsonTest, CarriesSchemaAndSteps) {
  auto p = two_step_script(1);
  Engine e = testing::engine_with(p);
  auto j = to_json(run_panel(testing::integer_task(), small_config(), e));
  EXPECT_EQ(j["schema_version"], kTraceSchemaVersion);
  EXPECT_EQ(j["terminated_by"], "final_answer");
  EXPECT_EQ(j["steps"].size(), 2u);
  EXPECT_EQ(j["steps"][0]["chosen_index"], 1);
  EXPECT_EQ(j["steps"][0]["counterfactual_index"], 0);
  EXPECT_EQ(j["config"]["candidates"], 3);
}

}  // namespace
}  // namespace panel
