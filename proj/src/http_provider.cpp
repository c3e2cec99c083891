#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "panel/http_provider.hpp"

#include <cstdlib>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

namespace panel {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ProviderKind k) {
  switch (k) {
    case ProviderKind::scripted: return "scripted";
    case ProviderKind::http: return "http";
    case ProviderKind::replay: return "replay";
  }
  return "scripted";
}

std::optional<ProviderKind> parse_provider_kind(std::string_view s) {
  if (s == "scripted") return ProviderKind::scripted;
  if (s == "http") return ProviderKind::http;
  if (s == "replay") return ProviderKind::replay;
  return std::nullopt;
}

void ProviderConfig::validate() const {
  if (kind == ProviderKind::http) {
    if (!endpoint_url || endpoint_url->empty()) {
      throw std::invalid_argument("http provider requires endpoint_url");
    }
    if (!model_name || model_name->empty()) {
      throw std::invalid_argument("http provider requires model_name");
    }
  }
  if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
}

HttpResult HttplibTransport::post(const std::string& url, const HttpHeaders& headers,
                                  const std::string& body, std::chrono::milliseconds timeout) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ProviderError(ProviderErrorKind::transport, fmt::format("malformed url {}", url));
  }
  auto path_begin = url.find('/', scheme_end + 3);
  std::string origin = url.substr(0, path_begin);
  std::string path = path_begin == std::string::npos ? "/" : url.substr(path_begin);

  httplib::Client client(origin);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path, h, body, "application/json");
  if (!res) {
    auto err = res.error();
    auto kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                    ? ProviderErrorKind::timeout
                    : ProviderErrorKind::transport;
    throw ProviderError(kind, fmt::format("POST {} failed: {}", url, httplib::to_string(err)));
  }
  return HttpResult{res->status, res->body};
}

HttpProvider::HttpProvider(ProviderConfig config, std::shared_ptr<HttpTransport> transport,
                           Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  config_.validate();
  if (config_.kind != ProviderKind::http) {
    throw std::invalid_argument("HttpProvider requires an http provider config");
  }
  if (!transport_) throw std::invalid_argument("HttpProvider requires a transport");
  if (!sleeper_) {
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  std::string base = *config_.endpoint_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  url_ = base + "/chat/completions";
  if (config_.api_key_env && !config_.api_key_env->empty()) {
    const char* key = std::getenv(config_.api_key_env->c_str());
    if (key == nullptr) {
      throw std::invalid_argument(
          fmt::format("environment variable {} is not set", *config_.api_key_env));
    }
    api_key_ = key;
  }
}

std::string HttpProvider::request_body(const ChatRequest& request) const {
  ordered_json body;
  body["model"] = *config_.model_name;
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  body["messages"] = std::move(messages);
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  if (!request.stop.empty()) body["stop"] = request.stop;
  return body.dump();
}

ChatResponse HttpProvider::parse_body(const std::string& body) const {
  json j = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    throw ProviderError(ProviderErrorKind::bad_response, "response body is not a JSON object");
  }
  auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    throw ProviderError(ProviderErrorKind::bad_response, "response has no choices");
  }
  const json& first = (*choices)[0];
  ChatResponse r;
  r.provider_id = fmt::format("http:{}", *config_.model_name);
  if (auto msg = first.find("message"); msg != first.end() && msg->is_object()) {
    if (auto c = msg->find("content"); c != msg->end() && c->is_string()) r.content = c->get<std::string>();
  } else {
    throw ProviderError(ProviderErrorKind::bad_response, "choices[0] has no message");
  }
  std::string finish;
  if (auto f = first.find("finish_reason"); f != first.end() && f->is_string()) finish = f->get<std::string>();
  if (finish == "length") {
    r.finish_reason = FinishReason::length;
  } else if (finish.empty() || finish == "stop" || finish == "eos") {
    r.finish_reason = FinishReason::stop;
  } else {
    r.finish_reason = FinishReason::error;
  }
  if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
    r.usage = Usage{u->value("prompt_tokens", std::int64_t{0}),
                    u->value("completion_tokens", std::int64_t{0})};
  }
  return r;
}

ChatResponse HttpProvider::complete(const ChatRequest& request) {
  request.validate();
  const std::string body = request_body(request);
  HttpHeaders headers = {{"Accept", "application/json"}};
  if (api_key_) headers.emplace_back("Authorization", "Bearer " + *api_key_);

  const int attempts = config_.max_retries + 1;
  std::optional<ProviderError> last;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      auto delay = config_.backoff_base * (1LL << (attempt - 1));
      spdlog::debug("retrying {} (attempt {}/{}) after {} ms", request.tag, attempt + 1, attempts,
                    delay.count());
      sleeper_(delay);
    }
    HttpResult result;
    try {
      result = transport_->post(url_, headers, body, config_.timeout);
    } catch (const ProviderError& e) {
      if (e.kind() != ProviderErrorKind::timeout && e.kind() != ProviderErrorKind::transport) throw;
      last = e;
      continue;
    }
    if (result.status >= 200 && result.status < 300) return parse_body(result.body);

    ProviderError status_error(ProviderErrorKind::http_status,
                               fmt::format("endpoint returned HTTP {}: {}", result.status,
                                           result.body.substr(0, 200)));
    if (result.status == 429 || result.status >= 500) {
      last = status_error;
      continue;
    }
    throw status_error;
  }
  throw *last;
}

}  // namespace panel
