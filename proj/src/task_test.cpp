#include "panel/task.hpp"

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace panel {
namespace {

TEST(NormalizeAnswerTest, IntegerForms) {
  auto spec = AnswerSpec::integer();
  EXPECT_EQ(normalize_answer("42", spec), "42");
  EXPECT_EQ(normalize_answer(" \\boxed{042}. ", spec), "42");
  EXPECT_EQ(normalize_answer("**7**", spec), "7");
  EXPECT_EQ(normalize_answer("$0$", spec), "0");
  EXPECT_EQ(normalize_answer("000", spec), "0");
  EXPECT_EQ(normalize_answer("(999)", spec), "999");
  EXPECT_EQ(normalize_answer("1000", spec), std::nullopt);
  EXPECT_EQ(normalize_answer("-3", spec), std::nullopt);
  EXPECT_EQ(normalize_answer("4.5", spec), std::nullopt);
  EXPECT_EQ(normalize_answer("", spec), std::nullopt);
  EXPECT_EQ(normalize_answer("forty", spec), std::nullopt);
}

TEST(NormalizeAnswerTest, ChoiceForms) {
  auto spec = AnswerSpec::multiple_choice({"A", "B", "C", "D"});
  EXPECT_EQ(normalize_answer("b", spec), "B");
  EXPECT_EQ(normalize_answer("(C)", spec), "C");
  EXPECT_EQ(normalize_answer("**D**.", spec), "D");
  EXPECT_EQ(normalize_answer("E", spec), std::nullopt);
  EXPECT_EQ(normalize_answer("AB", spec), std::nullopt);
}

TEST(FinalAnswerTest, LastSentinelWinsCaseInsensitive) {
  auto spec = AnswerSpec::integer();
  EXPECT_EQ(extract_final_answer("FINAL ANSWER: 1\nmore\nfinal answer: 2", spec), "2");
  EXPECT_EQ(extract_final_answer("Final Answer: 12\nThat is all.", spec), "12");
  EXPECT_EQ(extract_final_answer("The answer is 12", spec), std::nullopt);
  EXPECT_EQ(find_final_answer_text("x FINAL ANSWER:   7  \ny"), "   7  ");
}

TEST(GradeTest, DistinguishesFailureKinds) {
  Task t = testing::integer_task();
  GradeResult ok = grade("Step 1: 6*7=42. FINAL ANSWER: 42", t);
  EXPECT_TRUE(ok.correct);
  EXPECT_EQ(ok.extracted, "42");
  EXPECT_FALSE(ok.failure_reason);

  GradeResult wrong = grade("FINAL ANSWER: 41", t);
  EXPECT_FALSE(wrong.correct);
  EXPECT_EQ(wrong.extracted, "41");
  EXPECT_FALSE(wrong.failure_reason);

  EXPECT_EQ(grade("no sentinel", t).failure_reason, GradeFailure::no_answer_found);
  EXPECT_EQ(grade("FINAL ANSWER: lots", t).failure_reason, GradeFailure::normalization_failed);
}

TEST(DatasetTest, ParsesRecordsAndDefaults) {
  std::string text =
      R"({"id":"q1","prompt":"p1","domain":"math","answer_kind":"integer_0_999","gold":7})"
      "\n\n"
      R"({"id":"q2","prompt":"p2","domain":"chemistry","answer_kind":"multiple_choice","gold":"c","source":"gpqa"})"
      "\n";
  Dataset d = parse_dataset(text, "mini");
  ASSERT_EQ(d.tasks.size(), 2u);
  EXPECT_EQ(d.name, "mini");
  EXPECT_EQ(d.tasks[0].gold, "7");
  EXPECT_EQ(d.tasks[1].gold, "C");
  EXPECT_EQ(d.tasks[1].answer_spec.choices, (std::vector<std::string>{"A", "B", "C", "D"}));
  EXPECT_EQ(d.tasks[1].source, "gpqa");
  ASSERT_NE(d.find("q2"), nullptr);
  EXPECT_EQ(d.find("zz"), nullptr);
}

TEST(DatasetTest, RejectsBadInput) {
  auto line_of = [](const std::string& text) {
    try {
      parse_dataset(text, "x");
    } catch (const DatasetError& e) {
      return e.line();
    }
    return std::size_t{999};
  };
  std::string good = R"({"id":"q1","prompt":"p","domain":"math","answer_kind":"integer_0_999","gold":"1"})";
  EXPECT_EQ(line_of(good + "\n" + good), 2u);                         // duplicate id
  EXPECT_EQ(line_of(good + "\n{not json"), 2u);                       // parse error
  EXPECT_EQ(line_of(R"({"id":"q","prompt":"p","domain":"math","answer_kind":"integer_0_999","gold":"1000"})"), 1u);
  EXPECT_EQ(line_of(R"({"id":"q","prompt":"p","domain":"law","answer_kind":"integer_0_999","gold":"1"})"), 1u);
  EXPECT_EQ(line_of(R"({"id":"q","prompt":"p","domain":"math","answer_kind":"multiple_choice","choices":["A","A"],"gold":"A"})"), 1u);
  EXPECT_THROW(parse_dataset("\n\n", "x"), DatasetError);
}

TEST(DatasetTest, WriteThenParseIsStable) {
  Dataset d{"mini", {testing::integer_task("a"), testing::choice_task("b")}};
  std::string once = write_dataset(d);
  Dataset back = parse_dataset(once, "mini");
  EXPECT_EQ(write_dataset(back), once);
}

TEST(DatasetTest, LoadUsesFileStem) {
  auto dir = testing::scratch_dir("dataset");
  auto path = dir / "gpqa_small.tasks";
  std::ofstream(path) << write_dataset(Dataset{"ignored", {testing::choice_task()}});
  Dataset d = load_dataset(path);
  EXPECT_EQ(d.name, "gpqa_small");
  EXPECT_THROW(load_dataset(dir / "missing.tasks"), std::exception);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace panel
