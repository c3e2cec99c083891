#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "panel/baselines.hpp"
#include "panel/decision.hpp"
#include "panel/metrics.hpp"
#include "panel/replay.hpp"
#include "panel/search.hpp"
#include "panel/synth.hpp"

namespace panel {
namespace {

constexpr std::uint64_t kSeed = 0x5eed;

TEST(PassAtKProperty, BoundedAndMonotone) {
  std::mt19937_64 rng(kSeed);
  for (int trial = 0; trial < 2000; ++trial) {
    int n = std::uniform_int_distribution<int>(1, 60)(rng);
    int c = std::uniform_int_distribution<int>(0, n)(rng);
    int k = std::uniform_int_distribution<int>(1, n)(rng);
    double v = pass_at_k(n, c, k);
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
    if (k < n) ASSERT_LE(v, pass_at_k(n, c, k + 1) + 1e-12) << n << " " << c << " " << k;
    if (c < n) ASSERT_LE(v, pass_at_k(n, c + 1, k) + 1e-12) << n << " " << c << " " << k;
    if (k == 1) ASSERT_NEAR(v, static_cast<double>(c) / n, 1e-12);
  }
}

TEST(SelectionProperty, ChosenIndexAlwaysInRange) {
  std::mt19937_64 rng(kSeed);
  const std::vector<std::string> pieces{"SELECTED:", "selected: ", "-1", "0", "3", "17", " ", "\n", "x",
                                        "SELECTED: 99", "**", "2"};
  for (int trial = 0; trial < 5000; ++trial) {
    std::string reply;
    int parts = std::uniform_int_distribution<int>(0, 6)(rng);
    for (int p = 0; p < parts; ++p) reply += pieces[rng() % pieces.size()];
    std::size_t count = 1 + rng() % 7;
    int fallback = static_cast<int>(rng() % count);
    Decision d = decision_from_reply(reply, count, fallback);
    ASSERT_GE(d.chosen_index, 0) << reply;
    ASSERT_LT(d.chosen_index, static_cast<int>(count)) << reply;
    if (!d.parse_ok) ASSERT_EQ(d.chosen_index, fallback) << reply;
    auto parsed = parse_selection(reply, count);
    ASSERT_EQ(parsed.has_value(), d.parse_ok);
  }
}

TEST(DedupeProperty, DuplicatePointsAtLowestIdenticalIndex) {
  std::mt19937_64 rng(kSeed);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<StepCandidate> cs;
    int k = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < k; ++i) cs.push_back({i, std::string(1, static_cast<char>('a' + rng() % 3))});
    mark_duplicates(cs);
    for (int i = 0; i < k; ++i) {
      int first = 0;
      while (cs[first].text != cs[i].text) ++first;
      if (first == i) {
        ASSERT_FALSE(cs[i].duplicate_of);
      } else {
        ASSERT_EQ(cs[i].duplicate_of, first);
      }
    }
  }
}

TEST(VoteProperty, WinnerHasMaximalCount) {
  std::mt19937_64 rng(kSeed);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::optional<std::string>> answers;
    int n = static_cast<int>(rng() % 9);
    for (int i = 0; i < n; ++i) {
      if (rng() % 5 == 0) {
        answers.push_back(std::nullopt);
      } else {
        answers.push_back(std::string(1, static_cast<char>('A' + rng() % 4)));
      }
    }
    std::map<std::string, int> counts;
    for (const auto& a : answers) {
      if (a) ++counts[*a];
    }
    VoteResult v = majority_vote(answers);
    if (counts.empty()) {
      ASSERT_FALSE(v.answer);
      continue;
    }
    int best = 0;
    for (const auto& [_, c] : counts) best = std::max(best, c);
    ASSERT_TRUE(v.answer);
    ASSERT_EQ(counts[*v.answer], best);
    // Ties go to whichever top answer appeared first.
    for (const auto& a : answers) {
      if (a && counts[*a] == best) {
        ASSERT_EQ(*a, *v.answer);
        break;
      }
    }
  }
}

TEST(ReplayProperty, FirstResponseWinsPerDigest) {
  std::mt19937_64 rng(kSeed);
  ReplayLog log;
  std::map<std::string, std::string> first;
  for (int i = 0; i < 3000; ++i) {
    std::string digest = "d" + std::to_string(rng() % 400);
    ChatResponse r;
    r.content = "reply " + std::to_string(i);
    ChatResponse stored = log.append(digest, "tag", r);
    first.emplace(digest, r.content);
    ASSERT_EQ(stored.content, first[digest]);
  }
  EXPECT_EQ(log.size(), first.size());
  for (const auto& [digest, content] : first) EXPECT_EQ(log.lookup(digest)->content, content);
}

// The no-critique selector's reply is replaced by an arbitrary index; the
// followed path must not move.
TEST(CounterfactualProperty, DoesNotSteerThePath) {
  std::mt19937_64 rng(kSeed);
  Dataset d = synth::generate_dataset(60);
  auto oracle = synth::make_oracle_handler({});
  for (int trial = 0; trial < 40; ++trial) {
    const Task& task = d.tasks[rng() % d.tasks.size()];
    auto plain = std::make_shared<ScriptedProvider>();
    plain->set_handler(oracle);
    auto noisy = std::make_shared<ScriptedProvider>();
    std::uint64_t salt = rng();
    noisy->set_handler([&, salt](const ChatRequest& r) -> std::optional<std::string> {
      if (r.tag.find("stage3-decision-nocritique") != std::string::npos) {
        return "SELECTED: " + std::to_string((salt + r.messages.back().content.size()) % 5);
      }
      return oracle(r);
    });
    SearchConfig config;
    SearchTrace a = run_panel(task, config, testing::engine_with(plain));
    SearchTrace b = run_panel(task, config, testing::engine_with(noisy));
    ASSERT_EQ(a.chosen_texts(), b.chosen_texts()) << task.id;
    ASSERT_EQ(a.final_text, b.final_text);
    ASSERT_EQ(a.grade.correct, b.grade.correct);
    for (const auto& s : a.steps) ASSERT_TRUE(s.counterfactual_index());
  }
}

TEST(DeterminismProperty, SameInputsSameTrace) {
  Dataset d = synth::generate_dataset(25);
  SearchConfig config;
  for (const Task& task : d.tasks) {
    auto run = [&] {
      auto p = synth::make_oracle_provider({});
      return to_json(run_panel(task, config, testing::engine_with(p))).dump();
    };
    ASSERT_EQ(run(), run()) << task.id;
  }
}

TEST(SynthProperty, OracleSeparationHoldsOnRandomSubsets) {
  std::mt19937_64 rng(kSeed);
  Dataset d = synth::generate_dataset(200);
  SearchConfig config;
  for (int trial = 0; trial < 30; ++trial) {
    const Task& task = d.tasks[rng() % d.tasks.size()];
    auto p = synth::make_oracle_provider({});
    Engine e = testing::engine_with(p);
    EXPECT_TRUE(run_panel(task, config, e).grade.correct) << task.id;
    EXPECT_FALSE(run_greedy_baseline(task, 512, e).grade.correct) << task.id;
  }
}

}  // namespace
}  // namespace panel
