#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "panel/provider.hpp"

namespace panel {

enum class ReplayMode { off, record, strict };

std::string_view to_string(ReplayMode m);
std::optional<ReplayMode> parse_replay_mode(std::string_view s);

struct ReplayEntry {
  std::string request_digest;
  std::string tag;
  ChatResponse response;
};

/// Digest-keyed response log. Reads are concurrent; appends are serialized
/// and the first response recorded for a digest wins.
class ReplayLog {
 public:
  std::optional<ChatResponse> lookup(std::string_view request_digest) const;

  // Returns the entry now stored for the digest, which is the earlier one if
  // the digest was already present.
  ChatResponse append(std::string request_digest, std::string tag, ChatResponse response);

  std::size_t size() const;
  std::vector<ReplayEntry> entries() const;  // sorted by digest

  /// One JSON object per line: {"digest", "tag", "response"}.
  void save(const std::filesystem::path& path) const;
  static std::shared_ptr<ReplayLog> load(const std::filesystem::path& path);

 private:
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, ReplayEntry> entries_;
};

/// Serves requests from a ReplayLog. strict: a miss is a replay_miss error.
/// record: a miss is forwarded to the inner provider and recorded.
class ReplayProvider : public ChatProvider {
 public:
  ReplayProvider(std::shared_ptr<ReplayLog> log, ReplayMode mode,
                 std::shared_ptr<ChatProvider> inner = nullptr);

  ChatResponse complete(const ChatRequest& request) override;

 private:
  std::shared_ptr<ReplayLog> log_;
  ReplayMode mode_;
  std::shared_ptr<ChatProvider> inner_;
};

}  // namespace panel
