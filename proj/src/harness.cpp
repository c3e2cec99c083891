#include "panel/harness.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "panel/parallel.hpp"
#include "panel/synth.hpp"

namespace panel {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw HarnessError(fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw HarnessError(fmt::format("cannot write {}", path.string()));
  out << content;
  if (!out) throw HarnessError(fmt::format("write failed for {}", path.string()));
}

std::string safe_file_stem(std::string_view id) {
  std::string out;
  for (char c : id) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? "task" : out;
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void check_key_env(const ProviderConfig& c, std::string_view which) {
  if (c.kind != ProviderKind::http || !c.api_key_env) return;
  if (std::getenv(c.api_key_env->c_str()) == nullptr) {
    throw HarnessError(fmt::format("{} provider: environment variable {} is not set", which, *c.api_key_env));
  }
}

struct TaskOutcome {
  bool correct = false;
  std::vector<bool> samples;
  std::vector<DivergenceSample> divergence;
  std::vector<std::pair<std::string, std::string>> traces;  // file name, content
};

struct SingleRun {
  ordered_json trace;
  bool correct = false;
  std::vector<DivergenceSample> divergence;
};

SingleRun run_method(Method method, const Task& task, const HarnessConfig& config, const Engine& engine) {
  SingleRun out;
  auto from_trace = [&](const SearchTrace& trace) {
    out.trace = to_json(trace);
    out.correct = trace.grade.correct;
    for (const auto& step : trace.steps) {
      if (auto cf = step.counterfactual_index()) {
        out.divergence.push_back({task.id, step.candidate_set.step_index, step.chosen_index(), *cf});
      }
    }
  };
  auto from_solution = [&](const SolutionRun& run) {
    out.trace = to_json(run);
    out.correct = run.grade.correct;
  };
  switch (method) {
    case Method::panel: from_trace(run_panel(task, config.search, engine)); break;
    case Method::step_self_eval: from_trace(run_step_self_eval(task, config.search, engine)); break;
    case Method::greedy: from_trace(run_greedy_baseline(task, config.solution.max_tokens, engine)); break;
    case Method::self_consistency: from_solution(self_consistency(task, config.solution, engine)); break;
    case Method::solution_select:
      from_solution(solution_level_select(task, false, config.solution, engine));
      break;
    case Method::solution_select_critique:
      from_solution(solution_level_select(task, true, config.solution, engine));
      break;
  }
  return out;
}

std::string dump_trace(const ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace

// ---------------------------------------------------------------------------
// Configuration.

ordered_json to_json(const ProviderConfig& c) {
  ordered_json j;
  j["kind"] = to_string(c.kind);
  if (c.kind == ProviderKind::scripted) j["script"] = c.script;
  if (c.endpoint_url) j["endpoint_url"] = *c.endpoint_url;
  if (c.model_name) j["model_name"] = *c.model_name;
  if (c.api_key_env) j["api_key_env"] = *c.api_key_env;
  if (c.kind == ProviderKind::http) {
    j["timeout_ms"] = c.timeout.count();
    j["max_retries"] = c.max_retries;
    j["backoff_base_ms"] = c.backoff_base.count();
  }
  return j;
}

ProviderConfig provider_config_from_json(const json& j, ProviderRole role) {
  if (!j.is_object()) throw HarnessError("provider config must be an object");
  ProviderConfig c;
  c.role = role;
  std::string kind = j.value("kind", "scripted");
  auto parsed = parse_provider_kind(kind);
  if (!parsed) throw HarnessError(fmt::format("unknown provider kind \"{}\"", kind));
  c.kind = *parsed;
  c.script = j.value("script", c.script);
  if (j.contains("endpoint_url")) c.endpoint_url = j["endpoint_url"].get<std::string>();
  if (j.contains("model_name")) c.model_name = j["model_name"].get<std::string>();
  if (j.contains("api_key_env")) c.api_key_env = j["api_key_env"].get<std::string>();
  c.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<std::int64_t>(c.timeout.count())));
  c.max_retries = j.value("max_retries", c.max_retries);
  c.backoff_base =
      std::chrono::milliseconds(j.value("backoff_base_ms", static_cast<std::int64_t>(c.backoff_base.count())));
  return c;
}

void HarnessConfig::validate() const {
  try {
    policy.validate();
    if (critic) critic->validate();
    search.validate();
    solution.validate();
  } catch (const std::invalid_argument& e) {
    throw HarnessError(e.what());
  }
  if (k_samples < 1) throw HarnessError("k_samples must be at least 1");
  if (concurrency < 1) throw HarnessError("concurrency must be at least 1");
  if (replay == ReplayMode::strict && !replay_log) throw HarnessError("strict replay needs a replay log");
  bool replay_kind = policy.kind == ProviderKind::replay || (critic && critic->kind == ProviderKind::replay);
  if (replay_kind && replay != ReplayMode::strict) {
    throw HarnessError("replay providers need --replay strict and a replay log");
  }
  check_key_env(policy, "policy");
  if (critic) check_key_env(*critic, "critic");
}

ordered_json HarnessConfig::to_json() const {
  ordered_json j;
  j["policy"] = panel::to_json(policy);
  if (critic) j["critic"] = panel::to_json(*critic);
  ordered_json s = search.to_json();
  s["concurrency_limit"] = search.concurrency_limit;
  j["search"] = std::move(s);
  ordered_json sol = solution.to_json();
  sol["concurrency_limit"] = solution.concurrency_limit;
  j["solution"] = std::move(sol);
  j["k_samples"] = k_samples;
  return j;
}

HarnessConfig HarnessConfig::from_json(const json& j) {
  if (!j.is_object()) throw HarnessError("config must be a JSON object");
  HarnessConfig c;
  try {
    if (j.contains("policy")) c.policy = provider_config_from_json(j["policy"], ProviderRole::policy);
    if (j.contains("critic") && !j["critic"].is_null()) {
      c.critic = provider_config_from_json(j["critic"], ProviderRole::critic);
    }
    if (j.contains("search")) c.search = SearchConfig::from_json(j["search"]);
    if (j.contains("solution")) c.solution = SolutionConfig::from_json(j["solution"]);
    c.k_samples = j.value("k_samples", c.k_samples);
    c.concurrency = j.value("concurrency", c.concurrency);
    if (j.contains("replay")) {
      auto mode = parse_replay_mode(j["replay"].get<std::string>());
      if (!mode) throw HarnessError("replay must be off, record or strict");
      c.replay = *mode;
    }
    if (j.contains("replay_log")) c.replay_log = j["replay_log"].get<std::string>();
    if (j.contains("prompts_dir")) c.prompts_dir = j["prompts_dir"].get<std::string>();
  } catch (const json::exception& e) {
    throw HarnessError(fmt::format("config: {}", e.what()));
  }
  return c;
}

HarnessConfig HarnessConfig::load(const fs::path& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw HarnessError(fmt::format("{}: not valid JSON", path.string()));
  HarnessConfig c = from_json(j);
  // Relative paths inside the file resolve against its directory.
  auto anchor = [&](std::optional<fs::path>& p) {
    if (p && p->is_relative()) p = path.parent_path() / *p;
  };
  anchor(c.replay_log);
  anchor(c.prompts_dir);
  return c;
}

std::shared_ptr<ChatProvider> make_provider(const ProviderConfig& config, int candidates,
                                            std::shared_ptr<HttpTransport> transport) {
  switch (config.kind) {
    case ProviderKind::scripted: {
      synth::OracleOptions options;
      options.candidates = candidates;
      if (config.script == "oracle") {
        options.scorer = synth::ScorerMode::truthful;
      } else if (config.script == "misleading") {
        options.scorer = synth::ScorerMode::misleading;
      } else {
        throw HarnessError(fmt::format("unknown scripted provider \"{}\"", config.script));
      }
      return synth::make_oracle_provider(options);
    }
    case ProviderKind::http:
      if (!transport) transport = std::make_shared<HttplibTransport>();
      try {
        return std::make_shared<HttpProvider>(config, std::move(transport));
      } catch (const std::exception& e) {
        throw HarnessError(e.what());
      }
    case ProviderKind::replay:
      break;
  }
  throw HarnessError("replay providers are served from a replay log");
}

// ---------------------------------------------------------------------------
// Run records.

ordered_json to_json(const RunRecord& r) {
  ordered_json j;
  j["schema_version"] = r.schema_version;
  j["run_id"] = r.run_id;
  j["method"] = to_string(r.method);
  j["dataset"] = r.dataset;
  j["config"] = r.config;
  int correct = 0;
  for (const auto& t : r.results) correct += t.correct ? 1 : 0;
  j["summary"] = {{"correct", correct},
                  {"total", r.results.size()},
                  {"accuracy", r.results.empty() ? "-" : format_percent(accuracy(r.results))}};
  ordered_json results = ordered_json::array();
  for (const auto& t : r.results) {
    ordered_json o;
    o["task_id"] = t.task_id;
    o["domain"] = to_string(t.domain);
    o["source"] = t.source;
    o["correct"] = t.correct;
    if (!t.sample_outcomes.empty()) o["sample_outcomes"] = t.sample_outcomes;
    results.push_back(std::move(o));
  }
  j["results"] = std::move(results);
  ordered_json divergence = ordered_json::array();
  for (const auto& d : r.divergence) {
    divergence.push_back({{"task_id", d.task_id},
                          {"step_index", d.step_index},
                          {"chosen_index", d.chosen_index},
                          {"counterfactual_index", d.counterfactual_index}});
  }
  j["divergence"] = std::move(divergence);
  j["traces"] = r.trace_files;
  j["usage"] = {{"calls", r.usage.calls},
                {"prompt_tokens", r.usage.prompt_tokens},
                {"completion_tokens", r.usage.completion_tokens}};
  j["invocation"] = r.invocation;
  return j;
}

RunRecord run_record_from_json(const ordered_json& j) {
  try {
    RunRecord r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kRunRecordSchemaVersion) {
      throw HarnessError(fmt::format("unsupported run record schema {}", r.schema_version));
    }
    r.run_id = j.at("run_id").get<std::string>();
    auto method = parse_method(j.at("method").get<std::string>());
    if (!method) throw HarnessError(fmt::format("unknown method {}", j.at("method").dump()));
    r.method = *method;
    r.dataset = j.at("dataset").get<std::string>();
    r.config = j.value("config", ordered_json::object());
    for (const auto& o : j.at("results")) {
      TaskResult t;
      t.task_id = o.at("task_id").get<std::string>();
      t.method = r.method;
      t.correct = o.at("correct").get<bool>();
      auto domain = parse_domain(o.value("domain", "other"));
      if (!domain) throw HarnessError(fmt::format("task {}: unknown domain", t.task_id));
      t.domain = *domain;
      t.source = o.value("source", "");
      if (o.contains("sample_outcomes")) t.sample_outcomes = o["sample_outcomes"].get<std::vector<bool>>();
      r.results.push_back(std::move(t));
    }
    for (const auto& o : j.value("divergence", ordered_json::array())) {
      r.divergence.push_back({o.at("task_id").get<std::string>(), o.at("step_index").get<int>(),
                              o.at("chosen_index").get<int>(), o.at("counterfactual_index").get<int>()});
    }
    r.trace_files = j.value("traces", std::vector<std::string>{});
    if (j.contains("usage")) {
      const auto& u = j["usage"];
      r.usage = UsageTotals{u.value("calls", std::int64_t{0}), u.value("prompt_tokens", std::int64_t{0}),
                            u.value("completion_tokens", std::int64_t{0})};
    }
    r.invocation = j.value("invocation", ordered_json::object());
    return r;
  } catch (const json::exception& e) {
    throw HarnessError(fmt::format("malformed run record: {}", e.what()));
  }
}

RunRecord load_run_record(const fs::path& path) {
  fs::path file = fs::is_directory(path) ? path / "run.json" : path;
  ordered_json j = ordered_json::parse(read_file(file), nullptr, false);
  if (j.is_discarded()) throw HarnessError(fmt::format("{}: not valid JSON", file.string()));
  return run_record_from_json(j);
}

std::string comparable_content(const RunRecord& record) {
  ordered_json j = to_json(record);
  j.erase("invocation");
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Execution.

RunRecord execute_run(const RunRequest& request) {
  const HarnessConfig& config = request.config;
  config.validate();
  auto started = std::chrono::steady_clock::now();

  Dataset dataset;
  try {
    dataset = load_dataset(request.dataset_path);
  } catch (const std::exception& e) {
    throw HarnessError(fmt::format("cannot load dataset {}: {}", request.dataset_path.string(), e.what()));
  }

  const fs::path& out = request.out_dir;
  if (fs::exists(out / "run.json")) {
    throw HarnessError(fmt::format("{} already holds a run; choose another --out", out.string()));
  }
  fs::create_directories(out / "traces");

  auto prompts = std::make_shared<const PromptPack>(config.prompts_dir ? PromptPack::load(*config.prompts_dir)
                                                                       : PromptPack::defaults());

  // Provider stack: base -> replay -> metering. A shared critic reuses the
  // policy stack so usage is counted once.
  const int k = config.search.candidates;
  ReplayMode mode = config.replay;
  std::shared_ptr<ReplayLog> log;
  if (mode == ReplayMode::strict) {
    try {
      log = ReplayLog::load(*config.replay_log);
    } catch (const std::exception& e) {
      throw HarnessError(e.what());
    }
  } else if (mode == ReplayMode::record) {
    log = std::make_shared<ReplayLog>();
  }
  auto stack = [&](const ProviderConfig& pc) -> std::shared_ptr<MeteredProvider> {
    std::shared_ptr<ChatProvider> base;
    if (pc.kind != ProviderKind::replay) base = make_provider(pc, k, request.transport);
    if (log) base = std::make_shared<ReplayProvider>(log, mode, base);
    return std::make_shared<MeteredProvider>(base);
  };
  auto policy = stack(config.policy);
  auto critic = config.critic ? stack(*config.critic) : policy;

  Engine engine{policy, critic, prompts, ""};

  RunRecord record;
  record.method = request.method;
  record.dataset = dataset.name;
  ordered_json snapshot;
  snapshot["method"] = to_string(request.method);
  snapshot["dataset"] = dataset.name;
  snapshot["dataset_digest"] = sha256_hex(write_dataset(dataset));
  snapshot["prompts_digest"] = prompts->digest();
  ordered_json body = config.to_json();
  for (auto& [key, value] : body.items()) snapshot[key] = value;
  record.config = snapshot;
  record.run_id = fmt::format("{}-{}-{}", to_string(request.method), dataset.name,
                              sha256_hex(snapshot.dump()).substr(0, 12));

  spdlog::info("run {}: {} tasks, method {}, replay {}", record.run_id, dataset.tasks.size(),
               to_string(request.method), to_string(mode));

  std::vector<TaskOutcome> outcomes(dataset.tasks.size());
  std::mutex write_mu;
  std::atomic<std::size_t> done{0};
  parallel_for(dataset.tasks.size(), static_cast<std::size_t>(config.concurrency), [&](std::size_t i) {
    const Task& task = dataset.tasks[i];
    TaskOutcome& outcome = outcomes[i];
    std::string stem = safe_file_stem(task.id);
    for (int j = 0; j < config.k_samples; ++j) {
      Engine rerun = engine;
      rerun.tag_prefix = j == 0 ? "" : fmt::format("rerun-{}/", j);
      SingleRun run;
      try {
        run = run_method(request.method, task, config, rerun);
      } catch (const ProviderError& e) {
        run.trace = {{"schema_version", kTraceSchemaVersion},
                     {"task_id", task.id},
                     {"method", to_string(request.method)},
                     {"error", e.what()}};
      }
      if (j == 0) {
        outcome.correct = run.correct;
        outcome.divergence = std::move(run.divergence);
      }
      if (config.k_samples > 1) outcome.samples.push_back(run.correct);
      std::string name = j == 0 ? fmt::format("traces/{}.json", stem)
                                : fmt::format("traces/{}.rerun-{}.json", stem, j);
      std::string content = dump_trace(run.trace);
      {
        std::lock_guard lock(write_mu);
        write_file(out / name, content);
      }
      outcome.traces.emplace_back(name, std::move(content));
    }
    std::size_t n = ++done;
    spdlog::info("[{}/{}] {} {}", n, dataset.tasks.size(), task.id, outcome.correct ? "correct" : "incorrect");
  });

  for (std::size_t i = 0; i < dataset.tasks.size(); ++i) {
    const Task& task = dataset.tasks[i];
    TaskOutcome& o = outcomes[i];
    record.results.push_back({task.id, request.method, o.correct, task.domain, task.source, o.samples});
    for (auto& d : o.divergence) record.divergence.push_back(std::move(d));
    for (auto& [name, _] : o.traces) record.trace_files.push_back(name);
  }

  UsageTotals usage = policy->totals();
  if (critic != policy) {
    UsageTotals c = critic->totals();
    usage.calls += c.calls;
    usage.prompt_tokens += c.prompt_tokens;
    usage.completion_tokens += c.completion_tokens;
  }
  record.usage = usage;

  std::optional<fs::path> log_path;
  if (mode == ReplayMode::record) {
    log_path = config.replay_log.value_or(out / "replay.jsonl");
    log->save(*log_path);
  } else if (mode == ReplayMode::strict) {
    log_path = config.replay_log;
  }

  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  ordered_json inv;
  inv["started_at"] = utc_timestamp();
  inv["wall_clock_seconds"] = seconds;
  inv["dataset_path"] = fs::absolute(request.dataset_path).string();
  inv["replay_mode"] = to_string(mode);
  if (log_path) inv["replay_log"] = fs::absolute(*log_path).string();
  if (config.prompts_dir) inv["prompts_dir"] = fs::absolute(*config.prompts_dir).string();
  inv["concurrency"] = config.concurrency;
  record.invocation = std::move(inv);

  write_file(out / "run.json", to_json(record).dump(2) + "\n");
  std::string tsv = "task_id\tdomain\tsource\tcorrect\n";
  for (const auto& t : record.results) {
    tsv += fmt::format("{}\t{}\t{}\t{}\n", t.task_id, to_string(t.domain), t.source, t.correct ? 1 : 0);
  }
  write_file(out / "results.tsv", tsv);

  int correct = 0;
  for (const auto& t : record.results) correct += t.correct ? 1 : 0;
  spdlog::info("run {}: {}/{} correct ({}%), {} calls, {} prompt + {} completion tokens, {:.1f}s", record.run_id,
               correct, record.results.size(),
               record.results.empty() ? "-" : format_percent(accuracy(record.results)), usage.calls,
               usage.prompt_tokens, usage.completion_tokens, seconds);
  return record;
}

VerifyResult replay_verify(const fs::path& run_dir, const fs::path& scratch_dir) {
  RunRecord original = load_run_record(run_dir);
  const auto& inv = original.invocation;
  if (!inv.contains("dataset_path")) throw HarnessError("run record lacks the dataset path");

  RunRequest request;
  request.config = HarnessConfig::from_json(original.config);
  request.config.replay = ReplayMode::strict;
  request.config.replay_log =
      inv.contains("replay_log") ? fs::path(inv["replay_log"].get<std::string>()) : run_dir / "replay.jsonl";
  if (inv.contains("prompts_dir")) request.config.prompts_dir = inv["prompts_dir"].get<std::string>();
  request.config.concurrency = inv.value("concurrency", request.config.concurrency);
  request.dataset_path = inv["dataset_path"].get<std::string>();
  request.method = original.method;
  request.out_dir = scratch_dir;

  RunRecord again = execute_run(request);

  VerifyResult result;
  if (comparable_content(original) != comparable_content(again)) {
    result.differences.push_back("run record content differs");
  }
  if (original.trace_files != again.trace_files) {
    result.differences.push_back("trace file lists differ");
  } else {
    for (const auto& name : original.trace_files) {
      if (read_file(run_dir / name) != read_file(scratch_dir / name)) {
        result.differences.push_back(fmt::format("{} differs", name));
      }
    }
  }
  result.identical = result.differences.empty();
  return result;
}

}  // namespace panel
