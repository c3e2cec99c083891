#include "panel/report.hpp"

#include <fstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace panel {
namespace {

RunRecord record(Method m, std::vector<std::pair<Domain, bool>> outcomes, std::string dataset = "gpqa") {
  RunRecord r;
  r.method = m;
  r.dataset = dataset;
  r.run_id = std::string(to_string(m)) + "-" + dataset;
  int i = 0;
  for (auto [d, ok] : outcomes) {
    TaskResult t;
    t.task_id = "q" + std::to_string(i++);
    t.method = m;
    t.domain = d;
    t.correct = ok;
    r.results.push_back(t);
  }
  return r;
}

TEST(ReportTest, SingleRunHasOneRowAndNoEmphasis) {
  std::vector<RunRecord> runs{record(Method::panel, {{Domain::biology, true}, {Domain::physics, false}})};
  std::string t = render_accuracy_table(runs);
  EXPECT_EQ(t,
            "| Method | Biol. | Phys. | All |\n"
            "|---|---:|---:|---:|\n"
            "| PANEL | 100.0 | 0.0 | 50.0 |\n");
}

TEST(ReportTest, RowsFollowMethodOrderAndBestIsMarked) {
  std::vector<RunRecord> runs{record(Method::panel, {{Domain::biology, true}, {Domain::chemistry, true}}),
                              record(Method::greedy, {{Domain::biology, true}, {Domain::chemistry, false}})};
  std::string t = render_accuracy_table(runs);
  EXPECT_LT(t.find("Baseline"), t.find("PANEL"));
  EXPECT_NE(t.find("| PANEL | *100.0* | *100.0* | **100.0** |"), std::string::npos) << t;
  EXPECT_NE(t.find("| Baseline | *100.0* | 0.0 | 50.0 |"), std::string::npos) << t;
  ReportOptions plain;
  plain.emphasis = false;
  EXPECT_EQ(render_accuracy_table(runs, plain).find('*'), std::string::npos);
}

TEST(ReportTest, MissingGroupRendersDash) {
  std::vector<RunRecord> runs{record(Method::panel, {{Domain::biology, true}}),
                              record(Method::greedy, {{Domain::physics, true}})};
  EXPECT_NE(render_accuracy_table(runs).find("| PANEL | *100.0* | - |"), std::string::npos);
}

TEST(ReportTest, RejectsMixedDatasetsAndDuplicateMethods) {
  std::vector<RunRecord> mixed{record(Method::panel, {{Domain::math, true}}, "aime"),
                               record(Method::greedy, {{Domain::math, true}}, "gpqa")};
  EXPECT_THROW(render_accuracy_table(mixed), ReportError);
  std::vector<RunRecord> dup{record(Method::panel, {{Domain::math, true}}),
                             record(Method::panel, {{Domain::math, false}})};
  EXPECT_THROW(render_report(dup), ReportError);
  EXPECT_THROW(render_report(std::vector<RunRecord>{}), ReportError);
}

TEST(ReportTest, PassAtKRowsAreNonDecreasing) {
  RunRecord r = record(Method::panel, {{Domain::math, true}, {Domain::math, false}, {Domain::math, false}});
  r.results[0].sample_outcomes = {true, false, true, false};
  r.results[1].sample_outcomes = {false, false, false, true};
  r.results[2].sample_outcomes = {false, false, false, false};
  std::vector<RunRecord> runs{r};
  auto rows = pass_at_k_rows(runs);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(rows[i].value, rows[i - 1].value);
  EXPECT_NEAR(rows[0].value, 0.25, 1e-12);
  EXPECT_NEAR(rows[3].value, 2.0 / 3.0, 1e-12);
  runs[0].results[2].sample_outcomes.pop_back();
  EXPECT_THROW(pass_at_k_rows(runs), ReportError);
}

TEST(ReportTest, DivergenceSection) {
  RunRecord r = record(Method::panel, {{Domain::math, true}});
  r.divergence = {{"q0", 1, 2, 0}, {"q0", 2, 1, 1}};
  std::vector<RunRecord> runs{r};
  std::string d = render_divergence(runs);
  EXPECT_NE(d.find("| 1 | 1 | 1 | 1.000 |"), std::string::npos) << d;
  EXPECT_NE(d.find("| 2 | 0 | 1 | 0.000 |"), std::string::npos) << d;
}

TEST(ReportTest, WritesExports) {
  auto dir = testing::scratch_dir("report");
  std::vector<RunRecord> runs{record(Method::panel, {{Domain::biology, true}, {Domain::physics, false}})};
  write_report(runs, {}, dir);
  for (const char* f : {"report.md", "accuracy.tsv", "pass_at_k.tsv", "divergence.tsv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "accuracy.tsv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(first, "panel\tbiology\t1\t1\t100.0");
}

TEST(CompareTest, ListsFlips) {
  RunRecord a = record(Method::greedy, {{Domain::math, true}, {Domain::math, false}, {Domain::math, true}});
  RunRecord b = record(Method::panel, {{Domain::math, true}, {Domain::math, true}, {Domain::math, false}});
  Comparison c = compare_runs(a, b);
  EXPECT_EQ(c.both_correct, 1);
  EXPECT_EQ(c.both_wrong, 0);
  EXPECT_EQ(c.only_a, std::vector<std::string>{"q2"});
  EXPECT_EQ(c.only_b, std::vector<std::string>{"q1"});
  EXPECT_NE(render_comparison(c).find("- correct only in B: 1"), std::string::npos);
  RunRecord other = record(Method::panel, {{Domain::math, true}}, "aime");
  EXPECT_THROW(compare_runs(a, other), ReportError);
  RunRecord shorter = record(Method::panel, {{Domain::math, true}});
  EXPECT_THROW(compare_runs(a, shorter), ReportError);
}

TEST(GroupLabelTest, DomainsAndSources) {
  EXPECT_EQ(group_label("biology", GroupBy::domain), "Biol.");
  EXPECT_EQ(group_label("2024", GroupBy::source), "2024");
}

}  // namespace
}  // namespace panel
