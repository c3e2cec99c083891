#include "panel/provider.hpp"

#include <array>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace panel {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::optional<Role> parse_role(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  return std::nullopt;
}

std::string_view to_string(FinishReason f) {
  switch (f) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
  }
  return "error";
}

std::optional<FinishReason> parse_finish_reason(std::string_view s) {
  if (s == "stop") return FinishReason::stop;
  if (s == "length") return FinishReason::length;
  if (s == "error") return FinishReason::error;
  return std::nullopt;
}

std::string_view to_string(ProviderErrorKind k) {
  switch (k) {
    case ProviderErrorKind::invalid_request: return "invalid_request";
    case ProviderErrorKind::timeout: return "timeout";
    case ProviderErrorKind::transport: return "transport";
    case ProviderErrorKind::http_status: return "http_status";
    case ProviderErrorKind::bad_response: return "bad_response";
    case ProviderErrorKind::replay_miss: return "replay_miss";
    case ProviderErrorKind::script_exhausted: return "script_exhausted";
  }
  return "transport";
}

void ChatRequest::validate() const {
  if (messages.empty()) {
    throw ProviderError(ProviderErrorKind::invalid_request, "request has no messages");
  }
  if (messages.front().role == Role::assistant) {
    throw ProviderError(ProviderErrorKind::invalid_request,
                        "first message must have role system or user");
  }
  if (!(temperature >= 0.0)) {
    throw ProviderError(ProviderErrorKind::invalid_request, "temperature must be >= 0");
  }
  if (max_tokens <= 0) {
    throw ProviderError(ProviderErrorKind::invalid_request, "max_tokens must be positive");
  }
}

ordered_json to_json(const ChatResponse& r) {
  ordered_json j;
  j["content"] = r.content;
  j["finish_reason"] = to_string(r.finish_reason);
  if (r.usage) {
    j["usage"] = {{"prompt_tokens", r.usage->prompt_tokens},
                  {"completion_tokens", r.usage->completion_tokens}};
  } else {
    j["usage"] = nullptr;
  }
  j["provider_id"] = r.provider_id;
  return j;
}

ChatResponse response_from_json(const json& j) {
  ChatResponse r;
  r.content = j.value("content", "");
  auto finish = parse_finish_reason(j.value("finish_reason", "stop"));
  r.finish_reason = finish.value_or(FinishReason::stop);
  if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
    r.usage = Usage{it->value("prompt_tokens", std::int64_t{0}),
                    it->value("completion_tokens", std::int64_t{0})};
  }
  r.provider_id = j.value("provider_id", "");
  return r;
}

std::string canonical_serialization(const ChatRequest& request) {
  // Array form pins the field order; strings are stored byte-for-byte.
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back(json::array({to_string(m.role), m.content}));
  }
  json canonical = json::array({
      "v1",
      request.tag,
      fmt::format("{:.17g}", request.temperature),
      request.max_tokens,
      request.stop,
      std::move(messages),
  });
  return canonical.dump();
}

std::string sha256_hex(std::string_view payload) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_Digest(payload.data(), payload.size(), md.data(), &len, EVP_sha256(), nullptr);
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string digest(const ChatRequest& request) { return sha256_hex(canonical_serialization(request)); }

// ---------------------------------------------------------------------------

void ScriptedProvider::enqueue(ScriptedReply reply) {
  std::lock_guard lock(mu_);
  global_.push_back(std::move(reply));
}

void ScriptedProvider::enqueue(const std::string& tag, ScriptedReply reply) {
  std::lock_guard lock(mu_);
  by_tag_[tag].push_back(std::move(reply));
}

void ScriptedProvider::set_handler(Handler handler) {
  std::lock_guard lock(mu_);
  handler_ = std::move(handler);
}

std::size_t ScriptedProvider::call_count() const {
  std::lock_guard lock(mu_);
  return seen_.size();
}

std::vector<ChatRequest> ScriptedProvider::requests() const {
  std::lock_guard lock(mu_);
  return seen_;
}

ChatResponse ScriptedProvider::make_response(const ChatRequest& request, std::string content) const {
  std::size_t prompt_chars = 0;
  for (const auto& m : request.messages) prompt_chars += m.content.size();
  ChatResponse r;
  r.usage = Usage{static_cast<std::int64_t>((prompt_chars + 3) / 4),
                  static_cast<std::int64_t>((content.size() + 3) / 4)};
  r.content = std::move(content);
  r.finish_reason = FinishReason::stop;
  r.provider_id = id_;
  return r;
}

ChatResponse ScriptedProvider::complete(const ChatRequest& request) {
  request.validate();
  std::optional<ScriptedReply> reply;
  Handler handler;
  {
    std::lock_guard lock(mu_);
    seen_.push_back(request);
    if (auto it = by_tag_.find(request.tag); it != by_tag_.end() && !it->second.empty()) {
      reply = std::move(it->second.front());
      it->second.pop_front();
    } else if (!global_.empty()) {
      reply = std::move(global_.front());
      global_.pop_front();
    } else {
      handler = handler_;
    }
  }
  if (!reply && handler) {
    if (auto content = handler(request)) reply = ScriptedReply(std::move(*content));
  }
  if (!reply) {
    throw ProviderError(ProviderErrorKind::script_exhausted,
                        fmt::format("no scripted reply for tag \"{}\"", request.tag));
  }
  if (auto* failure = std::get_if<ProviderErrorKind>(&reply->value)) {
    throw ProviderError(*failure, fmt::format("scripted failure for tag \"{}\"", request.tag));
  }
  return make_response(request, std::get<std::string>(std::move(reply->value)));
}

// ---------------------------------------------------------------------------

ChatResponse MeteredProvider::complete(const ChatRequest& request) {
  ChatResponse r = inner_->complete(request);
  calls_.fetch_add(1, std::memory_order_relaxed);
  if (r.usage) {
    prompt_tokens_.fetch_add(r.usage->prompt_tokens, std::memory_order_relaxed);
    completion_tokens_.fetch_add(r.usage->completion_tokens, std::memory_order_relaxed);
  }
  return r;
}

UsageTotals MeteredProvider::totals() const {
  return UsageTotals{calls_.load(), prompt_tokens_.load(), completion_tokens_.load()};
}

}  // namespace panel
