#include "panel/baselines.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "panel/parallel.hpp"
#include "panel/search.hpp"
#include "panel/text.hpp"

namespace panel {

using nlohmann::json;
using nlohmann::ordered_json;

void SolutionConfig::validate() const {
  if (samples < 1) throw std::invalid_argument("N must be at least 1");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  if (max_tokens <= 0 || max_tokens_critique <= 0 || max_tokens_decision <= 0) {
    throw std::invalid_argument("token budgets must be positive");
  }
  if (critique_retries < 0) throw std::invalid_argument("critique_retries must be >= 0");
  if (concurrency_limit < 1) throw std::invalid_argument("concurrency_limit must be >= 1");
}

ordered_json SolutionConfig::to_json() const {
  ordered_json j;
  j["samples"] = samples;
  j["temperature"] = temperature;
  j["max_tokens"] = max_tokens;
  j["max_tokens_critique"] = max_tokens_critique;
  j["max_tokens_decision"] = max_tokens_decision;
  j["critique_retries"] = critique_retries;
  return j;
}

SolutionConfig SolutionConfig::from_json(const json& j) {
  SolutionConfig c;
  c.samples = j.value("samples", c.samples);
  c.temperature = j.value("temperature", c.temperature);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.max_tokens_critique = j.value("max_tokens_critique", c.max_tokens_critique);
  c.max_tokens_decision = j.value("max_tokens_decision", c.max_tokens_decision);
  c.critique_retries = j.value("critique_retries", c.critique_retries);
  c.concurrency_limit = j.value("concurrency_limit", c.concurrency_limit);
  return c;
}

VoteResult majority_vote(std::span<const std::optional<std::string>> answers) {
  VoteResult result;
  for (const auto& a : answers) {
    if (!a) continue;
    auto it = std::find_if(result.votes.begin(), result.votes.end(),
                           [&](const auto& v) { return v.first == *a; });
    if (it == result.votes.end()) {
      result.votes.emplace_back(*a, 1);
    } else {
      ++it->second;
    }
  }
  if (result.votes.empty()) return result;
  int best = 0;
  for (const auto& [_, n] : result.votes) best = std::max(best, n);
  int leaders = 0;
  for (const auto& [answer, n] : result.votes) {
    if (n != best) continue;
    if (!result.answer) result.answer = answer;
    ++leaders;
  }
  result.tie = leaders > 1;
  return result;
}

std::vector<SolutionSample> sample_solutions(const Task& task, const SolutionConfig& config,
                                             const Engine& engine) {
  config.validate();
  ChatRequest base;
  base.messages = {
      {Role::system, text::render(engine.pack().solution_system,
                                  {{"answer_format", answer_format(task.answer_spec)}})},
      {Role::user, text::render(engine.pack().solution_user, {{"problem", task.prompt}})},
  };
  base.temperature = config.temperature;
  base.max_tokens = config.max_tokens;

  std::vector<SolutionSample> samples(config.samples);
  parallel_for(samples.size(), static_cast<std::size_t>(config.concurrency_limit), [&](std::size_t i) {
    SolutionSample& s = samples[i];
    s.index = static_cast<int>(i);
    ChatRequest request = base;
    request.tag = engine.tag(fmt::format("solution-sample-{}", i));
    try {
      s.full_text = std::string(text::trim(engine.policy->complete(request).content));
      s.extracted = extract_final_answer(s.full_text, task.answer_spec);
    } catch (const ProviderError& e) {
      spdlog::warn("{}: solution sample {} failed: {}", task.id, i, e.what());
      s.error = e.what();
    }
  });
  return samples;
}

SolutionRun self_consistency(const Task& task, const SolutionConfig& config, const Engine& engine) {
  SolutionRun run;
  run.task_id = task.id;
  run.method = "self_consistency";
  run.config_snapshot = config.to_json();
  run.samples = sample_solutions(task, config, engine);

  std::vector<std::optional<std::string>> answers;
  for (const auto& s : run.samples) answers.push_back(s.extracted);
  run.vote = majority_vote(answers);
  run.answer = run.vote->answer;
  run.grade.extracted = run.answer;
  run.grade.correct = run.answer && *run.answer == task.gold;
  if (!run.answer) run.grade.failure_reason = GradeFailure::no_answer_found;
  return run;
}

namespace {

std::string render_solutions(const std::vector<SolutionSample>& samples, bool with_critique) {
  std::string out;
  for (const auto& s : samples) {
    if (!out.empty()) out += "\n\n";
    out += fmt::format("[{}] {}", s.index, s.error ? "(no solution produced)" : s.full_text);
    if (!with_critique || !s.critique) continue;
    const Critique& q = *s.critique;
    if (q.error) {
      out += "\nCritique: unavailable";
    } else if (q.correctness == Correctness::correct) {
      out += "\nCritique: no issues found";
    } else if (q.correctness == Correctness::incorrect) {
      out += fmt::format("\nCritique: {}", q.text);
    } else {
      out += fmt::format("\nCritique (unstructured): {}", q.raw);
    }
  }
  return out;
}

}  // namespace

SolutionRun solution_level_select(const Task& task, bool with_critique, const SolutionConfig& config,
                                  const Engine& engine) {
  SolutionRun run;
  run.task_id = task.id;
  run.method = with_critique ? "solution_select_critique" : "solution_select";
  run.config_snapshot = config.to_json();
  run.samples = sample_solutions(task, config, engine);

  if (with_critique) {
    CritiqueOptions options;
    options.temperature = config.temperature;
    options.max_tokens = config.max_tokens_critique;
    options.retries = config.critique_retries;
    options.tag_prefix = engine.tag_prefix;
    parallel_for(run.samples.size(), static_cast<std::size_t>(config.concurrency_limit),
                 [&](std::size_t i) {
      SolutionSample& s = run.samples[i];
      if (s.error) return;
      s.critique = request_critique(*engine.critic,
                                    build_solution_critique_messages(task, s.full_text, engine.pack()),
                                    engine.tag(fmt::format("solution-critique-{}", i)),
                                    static_cast<int>(i), options);
    });
  }

  Decision decision;
  if (run.samples.size() == 1) {
    decision.chosen_index = 0;
    decision.parse_ok = true;
    decision.forced = true;
  } else {
    ChatRequest request;
    request.messages = {
        {Role::system, engine.pack().solution_select_system},
        {Role::user, text::render(engine.pack().solution_select_user,
                                  {{"problem", task.prompt},
                                   {"candidates", render_solutions(run.samples, with_critique)}})},
    };
    request.temperature = 0.0;
    request.max_tokens = config.max_tokens_decision;
    request.tag = engine.tag("solution-select");
    try {
      decision = decision_from_reply(engine.policy->complete(request).content, run.samples.size());
    } catch (const ProviderError& e) {
      spdlog::warn("{}: solution selection failed: {}", task.id, e.what());
      decision.error = e.what();
    }
  }

  run.chosen_index = decision.chosen_index;
  run.decision = std::move(decision);
  const SolutionSample& chosen = run.samples.at(*run.chosen_index);
  run.answer = chosen.extracted;
  run.grade = grade(chosen.full_text, task);
  return run;
}

ordered_json to_json(const SolutionRun& run) {
  ordered_json j;
  j["schema_version"] = kTraceSchemaVersion;
  j["task_id"] = run.task_id;
  j["method"] = run.method;
  j["config"] = run.config_snapshot;
  ordered_json samples = ordered_json::array();
  for (const auto& s : run.samples) {
    ordered_json o;
    o["index"] = s.index;
    o["full_text"] = s.full_text;
    o["extracted"] = s.extracted ? json(*s.extracted) : json(nullptr);
    if (s.critique) o["critique"] = to_json(*s.critique);
    if (s.error) o["error"] = *s.error;
    samples.push_back(std::move(o));
  }
  j["samples"] = std::move(samples);
  if (run.vote) {
    ordered_json votes = ordered_json::array();
    for (const auto& [answer, n] : run.vote->votes) votes.push_back({answer, n});
    j["votes"] = std::move(votes);
    j["tie"] = run.vote->tie;
  }
  if (run.decision) j["decision"] = to_json(*run.decision);
  j["chosen_index"] = run.chosen_index ? json(*run.chosen_index) : json(nullptr);
  j["answer"] = run.answer ? json(*run.answer) : json(nullptr);
  j["grade"] = to_json(run.grade);
  return j;
}

}  // namespace panel
