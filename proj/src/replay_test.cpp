#include "panel/replay.hpp"

#include <fstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace panel {
namespace {

ChatRequest request(std::string tag) {
  ChatRequest r;
  r.messages = {{Role::user, "question"}};
  r.tag = std::move(tag);
  return r;
}

TEST(ReplayModeTest, Parse) {
  EXPECT_EQ(parse_replay_mode("strict"), ReplayMode::strict);
  EXPECT_EQ(parse_replay_mode("record"), ReplayMode::record);
  EXPECT_EQ(parse_replay_mode("off"), ReplayMode::off);
  EXPECT_EQ(parse_replay_mode("on"), std::nullopt);
}

TEST(ReplayLogTest, FirstAppendWins) {
  ReplayLog log;
  ChatResponse a{"first", FinishReason::stop, std::nullopt, "x"};
  ChatResponse b{"second", FinishReason::stop, std::nullopt, "x"};
  EXPECT_EQ(log.append("d1", "t", a).content, "first");
  EXPECT_EQ(log.append("d1", "t", b).content, "first");
  EXPECT_EQ(log.size(), 1u);
  EXPECT_EQ(log.lookup("d1")->content, "first");
  EXPECT_FALSE(log.lookup("d2"));
}

TEST(ReplayProviderTest, RecordThenStrictServesSameBytes) {
  auto dir = testing::scratch_dir("replay");
  auto inner = std::make_shared<ScriptedProvider>();
  inner->enqueue("a", "alpha");
  inner->enqueue("b", "beta");
  auto log = std::make_shared<ReplayLog>();
  ReplayProvider recorder(log, ReplayMode::record, inner);
  EXPECT_EQ(recorder.complete(request("a")).content, "alpha");
  EXPECT_EQ(recorder.complete(request("b")).content, "beta");
  EXPECT_EQ(recorder.complete(request("a")).content, "alpha");  // served from the log
  EXPECT_EQ(inner->call_count(), 2u);
  log->save(dir / "log.jsonl");

  auto loaded = ReplayLog::load(dir / "log.jsonl");
  EXPECT_EQ(loaded->size(), 2u);
  ReplayProvider strict(loaded, ReplayMode::strict);
  ChatResponse r = strict.complete(request("b"));
  EXPECT_EQ(r.content, "beta");
  EXPECT_EQ(r.usage, log->lookup(digest(request("b")))->usage);
  try {
    strict.complete(request("c"));
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ProviderErrorKind::replay_miss);
  }
  std::filesystem::remove_all(dir);
}

TEST(ReplayLogTest, SaveIsSortedByDigest) {
  auto dir = testing::scratch_dir("replay-sort");
  ReplayLog log;
  for (const char* tag : {"z", "a", "m"}) log.append(digest(request(tag)), tag, ChatResponse{tag});
  auto entries = log.entries();
  ASSERT_EQ(entries.size(), 3u);
  EXPECT_LT(entries[0].request_digest, entries[1].request_digest);
  EXPECT_LT(entries[1].request_digest, entries[2].request_digest);
  log.save(dir / "a.jsonl");
  ReplayLog::load(dir / "a.jsonl")->save(dir / "b.jsonl");
  std::ifstream a(dir / "a.jsonl"), b(dir / "b.jsonl");
  std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
  std::filesystem::remove_all(dir);
}

TEST(ReplayLogTest, MalformedLogIsRejected) {
  auto dir = testing::scratch_dir("replay-bad");
  std::ofstream(dir / "bad.jsonl") << "{\"digest\":\"x\"}\n";
  EXPECT_THROW(ReplayLog::load(dir / "bad.jsonl"), std::runtime_error);
  EXPECT_THROW(ReplayLog::load(dir / "missing.jsonl"), std::runtime_error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace panel
