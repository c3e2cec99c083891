#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "panel/baselines.hpp"
#include "panel/http_provider.hpp"
#include "panel/metrics.hpp"
#include "panel/replay.hpp"
#include "panel/search.hpp"

namespace panel {

inline constexpr int kRunRecordSchemaVersion = 1;

/// Configuration or IO problem that stops a run before any task executes.
class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::ordered_json to_json(const ProviderConfig& c);
ProviderConfig provider_config_from_json(const nlohmann::json& j, ProviderRole role);

struct HarnessConfig {
  ProviderConfig policy;
  std::optional<ProviderConfig> critic;  // absent: the policy model critiques itself
  SearchConfig search;
  SolutionConfig solution;
  int k_samples = 1;  // independent reruns per task for pass@k
  int concurrency = 4;
  ReplayMode replay = ReplayMode::record;
  std::optional<std::filesystem::path> replay_log;
  std::optional<std::filesystem::path> prompts_dir;

  /// Checks ranges and that every configured API-key variable is set.
  void validate() const;

  // Everything that shapes model requests; omits concurrency, replay and paths
  // that only affect how a run is executed.
  nlohmann::ordered_json to_json() const;
  static HarnessConfig from_json(const nlohmann::json& j);
  static HarnessConfig load(const std::filesystem::path& path);
};

/// Builds the provider named by `config`. Scripted kinds never touch the
/// network; http kinds use `transport`, defaulting to cpp-httplib.
std::shared_ptr<ChatProvider> make_provider(const ProviderConfig& config, int candidates,
                                            std::shared_ptr<HttpTransport> transport = nullptr);

struct RunRecord {
  int schema_version = kRunRecordSchemaVersion;
  std::string run_id;
  Method method = Method::panel;
  std::string dataset;
  nlohmann::ordered_json config;
  std::vector<TaskResult> results;
  std::vector<DivergenceSample> divergence;
  std::vector<std::string> trace_files;  // relative to the run directory
  UsageTotals usage;
  // Wall clock, paths and execution flags; excluded from determinism checks.
  nlohmann::ordered_json invocation = nlohmann::ordered_json::object();
};

nlohmann::ordered_json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::ordered_json& j);
RunRecord load_run_record(const std::filesystem::path& path);  // a run.json file or its directory
/// Canonical record text with the invocation block removed.
std::string comparable_content(const RunRecord& record);

struct RunRequest {
  HarnessConfig config;
  std::filesystem::path dataset_path;
  Method method = Method::panel;
  std::filesystem::path out_dir;
  std::shared_ptr<HttpTransport> transport;  // optional override for http providers
};

/// Runs `method` over every task and writes run.json, traces/ and, in record
/// mode, replay.jsonl into out_dir. Throws HarnessError when the run cannot
/// start, including when out_dir already holds a run.json.
RunRecord execute_run(const RunRequest& request);

struct VerifyResult {
  bool identical = false;
  std::vector<std::string> differences;
};

/// Re-executes the run in `run_dir` under strict replay from its replay log
/// into `scratch_dir` and compares record content and trace bytes.
VerifyResult replay_verify(const std::filesystem::path& run_dir, const std::filesystem::path& scratch_dir);

}  // namespace panel
