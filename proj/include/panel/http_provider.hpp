#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "panel/provider.hpp"

namespace panel {

struct HttpResult {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// One HTTP POST. Throws ProviderError with kind timeout or transport when no
/// HTTP status was received.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;

  virtual HttpResult post(const std::string& url, const HttpHeaders& headers,
                          const std::string& body, std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport; http:// and https:// URLs.
class HttplibTransport : public HttpTransport {
 public:
  HttpResult post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                  std::chrono::milliseconds timeout) override;
};

enum class ProviderKind { scripted, http, replay };
enum class ProviderRole { policy, critic };

std::string_view to_string(ProviderKind k);
std::optional<ProviderKind> parse_provider_kind(std::string_view s);

struct ProviderConfig {
  ProviderKind kind = ProviderKind::scripted;
  ProviderRole role = ProviderRole::policy;
  std::optional<std::string> endpoint_url;
  std::optional<std::string> model_name;
  std::optional<std::string> api_key_env;
  std::chrono::milliseconds timeout{120'000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  // Scripted kind: name of the built-in script ("oracle" or "misleading").
  std::string script = "oracle";

  // Throws std::invalid_argument when http kind lacks endpoint or model.
  void validate() const;
};

/// OpenAI-compatible chat-completions client:
/// POST {endpoint_url}/chat/completions with model, messages, temperature,
/// max_tokens and stop. Transport failures, timeouts, 429 and 5xx are retried
/// with exponential backoff, at most max_retries + 1 attempts in total.
class HttpProvider : public ChatProvider {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  HttpProvider(ProviderConfig config, std::shared_ptr<HttpTransport> transport,
               Sleeper sleeper = {});

  ChatResponse complete(const ChatRequest& request) override;

  // Request body exactly as sent on the wire.
  std::string request_body(const ChatRequest& request) const;

 private:
  ChatResponse parse_body(const std::string& body) const;

  ProviderConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
  std::string url_;
  std::optional<std::string> api_key_;
};

}  // namespace panel
