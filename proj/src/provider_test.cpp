#include "panel/provider.hpp"

#include <gtest/gtest.h>

namespace panel {
namespace {

ChatRequest request(std::string tag = "t", std::string content = "hello") {
  ChatRequest r;
  r.messages = {{Role::system, "sys"}, {Role::user, std::move(content)}};
  r.tag = std::move(tag);
  return r;
}

TEST(ChatRequestTest, ValidateRejectsBadRequests) {
  ChatRequest r = request();
  EXPECT_NO_THROW(r.validate());
  r.temperature = -0.1;
  EXPECT_THROW(r.validate(), ProviderError);
  r = request();
  r.max_tokens = 0;
  EXPECT_THROW(r.validate(), ProviderError);
  r = request();
  r.messages.clear();
  EXPECT_THROW(r.validate(), ProviderError);
  r = request();
  r.messages.insert(r.messages.begin(), {Role::assistant, "x"});
  EXPECT_THROW(r.validate(), ProviderError);
}

TEST(DigestTest, CoversEveryField) {
  ChatRequest base = request();
  std::string d = digest(base);
  EXPECT_EQ(d.size(), 64u);
  EXPECT_EQ(digest(request()), d);

  ChatRequest r = base;
  r.tag = "other";
  EXPECT_NE(digest(r), d);
  r = base;
  r.temperature = 0.6;
  EXPECT_NE(digest(r), d);
  r = base;
  r.max_tokens = 513;
  EXPECT_NE(digest(r), d);
  r = base;
  r.stop = {"\n\nStep 2:"};
  EXPECT_NE(digest(r), d);
  r = base;
  r.messages[1].content += " ";
  EXPECT_NE(digest(r), d);
  r = base;
  r.messages[0].role = Role::user;
  EXPECT_NE(digest(r), d);
}

TEST(DigestTest, KnownSha256) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(ResponseJsonTest, RoundTrip) {
  ChatResponse r{"text", FinishReason::length, Usage{3, 4}, "p"};
  ChatResponse back = response_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.content, "text");
  EXPECT_EQ(back.finish_reason, FinishReason::length);
  EXPECT_EQ(back.usage, (Usage{3, 4}));
  EXPECT_EQ(back.provider_id, "p");
}

TEST(ScriptedProviderTest, TagQueueThenGlobalThenHandler) {
  ScriptedProvider p;
  p.enqueue("a", "from tag");
  p.enqueue("global");
  p.set_handler([](const ChatRequest& r) -> std::optional<std::string> {
    if (r.tag == "h") return "handled";
    return std::nullopt;
  });
  EXPECT_EQ(p.complete(request("a")).content, "from tag");
  EXPECT_EQ(p.complete(request("a")).content, "global");
  EXPECT_EQ(p.complete(request("h")).content, "handled");
  try {
    p.complete(request("none"));
    FAIL() << "expected script_exhausted";
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ProviderErrorKind::script_exhausted);
  }
  EXPECT_EQ(p.call_count(), 4u);
  EXPECT_EQ(p.requests()[2].tag, "h");
}

TEST(ScriptedProviderTest, ScriptedFailure) {
  ScriptedProvider p;
  p.enqueue(ProviderErrorKind::timeout);
  try {
    p.complete(request());
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ProviderErrorKind::timeout);
  }
}

TEST(MeteredProviderTest, SumsUsage) {
  auto inner = std::make_shared<ScriptedProvider>();
  inner->enqueue("abcd");
  inner->enqueue("abcdefgh");
  MeteredProvider m(inner);
  std::int64_t prompt = 0;
  std::int64_t completion = 0;
  for (int i = 0; i < 2; ++i) {
    ChatResponse r = m.complete(request());
    prompt += r.usage->prompt_tokens;
    completion += r.usage->completion_tokens;
  }
  UsageTotals t = m.totals();
  EXPECT_EQ(t.calls, 2);
  EXPECT_EQ(t.prompt_tokens, prompt);
  EXPECT_EQ(t.completion_tokens, completion);
  EXPECT_EQ(completion, 1 + 2);
}

}  // namespace
}  // namespace panel
