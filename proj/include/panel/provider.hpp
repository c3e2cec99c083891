#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace panel {

enum class Role { system, user, assistant };

std::string_view to_string(Role r);
std::optional<Role> parse_role(std::string_view s);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;  // 0 means greedy decoding
  int max_tokens = 512;
  std::vector<std::string> stop;
  std::string tag;  // purpose label, part of the request identity

  // Throws ProviderError(invalid_request) when the invariants do not hold.
  void validate() const;

  bool operator==(const ChatRequest&) const = default;
};

enum class FinishReason { stop, length, error };

std::string_view to_string(FinishReason f);
std::optional<FinishReason> parse_finish_reason(std::string_view s);

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  bool operator==(const Usage&) const = default;
};

struct ChatResponse {
  std::string content;
  FinishReason finish_reason = FinishReason::stop;
  std::optional<Usage> usage;
  std::string provider_id;

  bool operator==(const ChatResponse&) const = default;
};

nlohmann::ordered_json to_json(const ChatResponse& r);
ChatResponse response_from_json(const nlohmann::json& j);

enum class ProviderErrorKind {
  invalid_request,
  timeout,
  transport,
  http_status,
  bad_response,
  replay_miss,
  script_exhausted,
};

std::string_view to_string(ProviderErrorKind k);

class ProviderError : public std::runtime_error {
 public:
  ProviderError(ProviderErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ProviderErrorKind kind() const { return kind_; }

 private:
  ProviderErrorKind kind_;
};

/// Chat-completion backend. Implementations must tolerate concurrent calls.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;

  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

/// Stable hex digest of the canonical serialization of a request. Every field,
/// including the tag, participates.
std::string digest(const ChatRequest& request);
std::string canonical_serialization(const ChatRequest& request);
std::string sha256_hex(std::string_view payload);

// ---------------------------------------------------------------------------
// Scripted test double.

/// A queued reply: either content or a failure of the given kind.
struct ScriptedReply {
  std::variant<std::string, ProviderErrorKind> value;

  ScriptedReply(std::string content) : value(std::move(content)) {}  // NOLINT
  ScriptedReply(const char* content) : value(std::string(content)) {}  // NOLINT
  ScriptedReply(ProviderErrorKind failure) : value(failure) {}  // NOLINT
};

/// Deterministic provider that never touches the network. Replies come from
/// the queue for the request's exact tag, then the global queue, then the
/// handler. Anything else is script_exhausted.
class ScriptedProvider : public ChatProvider {
 public:
  using Handler = std::function<std::optional<std::string>(const ChatRequest&)>;

  explicit ScriptedProvider(std::string id = "scripted") : id_(std::move(id)) {}

  void enqueue(ScriptedReply reply);
  void enqueue(const std::string& tag, ScriptedReply reply);
  void set_handler(Handler handler);

  ChatResponse complete(const ChatRequest& request) override;

  std::size_t call_count() const;
  std::vector<ChatRequest> requests() const;

 private:
  ChatResponse make_response(const ChatRequest& request, std::string content) const;

  std::string id_;
  mutable std::mutex mu_;
  std::deque<ScriptedReply> global_;
  std::map<std::string, std::deque<ScriptedReply>, std::less<>> by_tag_;
  Handler handler_;
  std::vector<ChatRequest> seen_;
};

// ---------------------------------------------------------------------------
// Usage accounting.

struct UsageTotals {
  std::int64_t calls = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  bool operator==(const UsageTotals&) const = default;
};

/// Forwards to an inner provider and sums calls and token usage.
class MeteredProvider : public ChatProvider {
 public:
  explicit MeteredProvider(std::shared_ptr<ChatProvider> inner) : inner_(std::move(inner)) {}

  ChatResponse complete(const ChatRequest& request) override;

  UsageTotals totals() const;

 private:
  std::shared_ptr<ChatProvider> inner_;
  std::atomic<std::int64_t> calls_{0};
  std::atomic<std::int64_t> prompt_tokens_{0};
  std::atomic<std::int64_t> completion_tokens_{0};
};

}  // namespace panel
