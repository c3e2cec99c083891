#include "panel/replay.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <stdexcept>

#include <fmt/format.h>

namespace panel {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ReplayMode m) {
  switch (m) {
    case ReplayMode::off: return "off";
    case ReplayMode::record: return "record";
    case ReplayMode::strict: return "strict";
  }
  return "off";
}

std::optional<ReplayMode> parse_replay_mode(std::string_view s) {
  if (s == "off") return ReplayMode::off;
  if (s == "record") return ReplayMode::record;
  if (s == "strict") return ReplayMode::strict;
  return std::nullopt;
}

std::optional<ChatResponse> ReplayLog::lookup(std::string_view request_digest) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(std::string(request_digest));
  if (it == entries_.end()) return std::nullopt;
  return it->second.response;
}

ChatResponse ReplayLog::append(std::string request_digest, std::string tag, ChatResponse response) {
  std::unique_lock lock(mu_);
  std::string key = request_digest;
  auto [it, inserted] = entries_.try_emplace(
      std::move(key), ReplayEntry{std::move(request_digest), std::move(tag), std::move(response)});
  return it->second.response;
}

std::size_t ReplayLog::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

std::vector<ReplayEntry> ReplayLog::entries() const {
  std::vector<ReplayEntry> out;
  {
    std::shared_lock lock(mu_);
    out.reserve(entries_.size());
    for (const auto& [_, e] : entries_) out.push_back(e);
  }
  std::sort(out.begin(), out.end(),
            [](const ReplayEntry& a, const ReplayEntry& b) { return a.request_digest < b.request_digest; });
  return out;
}

void ReplayLog::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write replay log {}", path.string()));
  for (const auto& e : entries()) {
    ordered_json line;
    line["digest"] = e.request_digest;
    line["tag"] = e.tag;
    line["response"] = to_json(e.response);
    out << line.dump() << '\n';
  }
}

std::shared_ptr<ReplayLog> ReplayLog::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read replay log {}", path.string()));
  auto log = std::make_shared<ReplayLog>();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.contains("digest") || !j.contains("response")) {
      throw std::runtime_error(
          fmt::format("replay log {} line {}: malformed entry", path.string(), line_no));
    }
    log->append(j["digest"].get<std::string>(), j.value("tag", ""), response_from_json(j["response"]));
  }
  return log;
}

ReplayProvider::ReplayProvider(std::shared_ptr<ReplayLog> log, ReplayMode mode,
                               std::shared_ptr<ChatProvider> inner)
    : log_(std::move(log)), mode_(mode), inner_(std::move(inner)) {
  if (!log_) throw std::invalid_argument("ReplayProvider requires a log");
  if (mode_ == ReplayMode::off) throw std::invalid_argument("ReplayProvider requires record or strict mode");
  if (mode_ == ReplayMode::record && !inner_) {
    throw std::invalid_argument("record mode requires an inner provider");
  }
}

ChatResponse ReplayProvider::complete(const ChatRequest& request) {
  request.validate();
  std::string key = digest(request);
  if (auto hit = log_->lookup(key)) return *hit;
  if (mode_ == ReplayMode::strict) {
    throw ProviderError(ProviderErrorKind::replay_miss,
                        fmt::format("no recorded response for tag \"{}\" (digest {})", request.tag,
                                    key.substr(0, 16)));
  }
  return log_->append(std::move(key), request.tag, inner_->complete(request));
}

}  // namespace panel
