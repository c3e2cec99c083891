#include "panel/search.hpp"

#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "panel/parallel.hpp"
#include "panel/text.hpp"

namespace panel {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(CandidateOrigin o) {
  return o == CandidateOrigin::greedy ? "greedy" : "sampled";
}

std::string_view to_string(TerminatedBy t) {
  switch (t) {
    case TerminatedBy::final_answer: return "final_answer";
    case TerminatedBy::max_steps: return "max_steps";
    case TerminatedBy::provider_error: return "provider_error";
  }
  return "max_steps";
}

void mark_duplicates(std::vector<StepCandidate>& candidates) {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].duplicate_of.reset();
    for (std::size_t j = 0; j < i; ++j) {
      if (candidates[j].text == candidates[i].text) {
        candidates[i].duplicate_of = static_cast<int>(j);
        break;
      }
    }
  }
}

void SearchConfig::validate() const {
  if (candidates < 2) throw std::invalid_argument("K must be at least 2");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  if (max_tokens_step <= 0 || max_tokens_critique <= 0 || max_tokens_decision <= 0) {
    throw std::invalid_argument("token budgets must be positive");
  }
  if (critique_retries < 0) throw std::invalid_argument("critique_retries must be >= 0");
  if (concurrency_limit < 1) throw std::invalid_argument("concurrency_limit must be >= 1");
}

ordered_json SearchConfig::to_json() const {
  ordered_json j;
  j["candidates"] = candidates;
  j["temperature"] = temperature;
  j["max_steps"] = max_steps;
  j["max_tokens_step"] = max_tokens_step;
  j["max_tokens_critique"] = max_tokens_critique;
  j["max_tokens_decision"] = max_tokens_decision;
  j["critique_retries"] = critique_retries;
  j["compute_counterfactual"] = compute_counterfactual;
  return j;
}

SearchConfig SearchConfig::from_json(const json& j) {
  SearchConfig c;
  c.candidates = j.value("candidates", c.candidates);
  c.temperature = j.value("temperature", c.temperature);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.max_tokens_step = j.value("max_tokens_step", c.max_tokens_step);
  c.max_tokens_critique = j.value("max_tokens_critique", c.max_tokens_critique);
  c.max_tokens_decision = j.value("max_tokens_decision", c.max_tokens_decision);
  c.critique_retries = j.value("critique_retries", c.critique_retries);
  c.compute_counterfactual = j.value("compute_counterfactual", c.compute_counterfactual);
  c.concurrency_limit = j.value("concurrency_limit", c.concurrency_limit);
  return c;
}

std::vector<std::string> SearchTrace::chosen_texts() const {
  std::vector<std::string> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.candidate_set.candidates.at(s.chosen_index()).text);
  return out;
}

std::string join_steps(std::span<const std::string> steps) {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += steps[i];
  }
  return out;
}

bool is_terminal(std::string_view candidate_text) {
  return text::icontains(candidate_text, kFinalAnswerSentinel);
}

std::string step_delimiter(int next_step) { return fmt::format("\n\nStep {}:", next_step); }

std::vector<ChatMessage> build_step_messages(const Task& task, std::span<const std::string> history,
                                             const PromptPack& pack) {
  std::string format = answer_format(task.answer_spec);
  std::string prior = render_prior_steps(history);
  std::string number = std::to_string(history.size() + 1);
  return {
      {Role::system, text::render(pack.step_system, {{"answer_format", format}})},
      {Role::user, text::render(pack.step_user, {{"problem", task.prompt},
                                                 {"prior_steps", prior},
                                                 {"step_number", number}})},
  };
}

namespace {

std::string request_text(ChatProvider& provider, const ChatRequest& request) {
  ChatResponse r = provider.complete(request);
  if (r.finish_reason == FinishReason::error) {
    throw ProviderError(ProviderErrorKind::bad_response,
                        fmt::format("{} finished with an error", request.tag));
  }
  return std::string(text::trim(r.content));
}

CritiqueOptions critique_options(const SearchConfig& config, const Engine& engine) {
  CritiqueOptions o;
  o.temperature = config.temperature;
  o.max_tokens = config.max_tokens_critique;
  o.retries = config.critique_retries;
  o.concurrency = static_cast<std::size_t>(config.concurrency_limit);
  o.tag_prefix = engine.tag_prefix;
  return o;
}

DecisionOptions decision_options(const SearchConfig& config, const Engine& engine) {
  DecisionOptions o;
  o.temperature = 0.0;
  o.max_tokens = config.max_tokens_decision;
  o.concurrency = static_cast<std::size_t>(config.concurrency_limit);
  o.tag_prefix = engine.tag_prefix;
  return o;
}

enum class Selector { critique, self_eval };

SearchTrace run_step_search(const Task& task, const SearchConfig& config, const Engine& engine,
                            Selector selector) {
  config.validate();
  SearchTrace trace;
  trace.task_id = task.id;
  trace.method = selector == Selector::critique ? "panel" : "step_self_eval";
  trace.config_snapshot = config.to_json();

  const CritiqueOptions copts = critique_options(config, engine);
  const DecisionOptions dopts = decision_options(config, engine);
  std::vector<std::string> history;
  trace.terminated_by = TerminatedBy::max_steps;

  while (static_cast<int>(history.size()) < config.max_steps) {
    StepRecord record;
    try {
      record.candidate_set = sample_candidates(task, history, config, engine);
    } catch (const ProviderError& e) {
      spdlog::warn("{}: step {} aborted: {}", task.id, history.size() + 1, e.what());
      trace.terminated_by = TerminatedBy::provider_error;
      trace.error = e.what();
      break;
    }

    const CandidateSet& set = record.candidate_set;
    if (selector == Selector::critique) {
      record.critiques = critique_candidates(task, history, set, *engine.critic, engine.pack(), copts);
      record.decision = select_with_critiques(task, history, set, record.critiques, *engine.policy,
                                              engine.pack(), dopts);
      if (config.compute_counterfactual) {
        record.counterfactual =
            select_without_critiques(task, history, set, *engine.policy, engine.pack(), dopts);
      }
    } else {
      record.scores = score_candidates(task, history, set, *engine.policy, engine.pack(), dopts);
      record.decision.chosen_index = select_argmax(record.scores);
      record.decision.parse_ok = true;
      record.decision.rationale = "highest self-evaluation score";
    }

    history.push_back(set.candidates.at(record.chosen_index()).text);
    trace.steps.push_back(std::move(record));
    if (is_terminal(history.back())) {
      trace.terminated_by = TerminatedBy::final_answer;
      break;
    }
  }

  trace.final_text = join_steps(history);
  trace.grade = grade(trace.final_text, task);
  return trace;
}

}  // namespace

CandidateSet sample_candidates(const Task& task, std::span<const std::string> history,
                               const SearchConfig& config, const Engine& engine) {
  if (static_cast<int>(history.size()) >= config.max_steps) {
    throw std::invalid_argument("history already holds max_steps steps");
  }
  const int k = config.candidates;
  const int step_index = static_cast<int>(history.size()) + 1;

  ChatRequest base;
  base.messages = build_step_messages(task, history, engine.pack());
  base.max_tokens = config.max_tokens_step;
  base.stop = {step_delimiter(step_index + 1)};

  CandidateSet set;
  set.step_index = step_index;
  set.candidates.resize(k);
  std::vector<std::optional<ProviderError>> failures(k);

  parallel_for(static_cast<std::size_t>(k), static_cast<std::size_t>(config.concurrency_limit),
               [&](std::size_t i) {
    ChatRequest request = base;
    StepCandidate& c = set.candidates[i];
    c.index = static_cast<int>(i);
    if (i == 0) {
      c.origin = CandidateOrigin::greedy;
      request.temperature = 0.0;
      request.tag = engine.tag("stage1-greedy");
      try {
        c.text = request_text(*engine.policy, request);
      } catch (const ProviderError& e) {
        failures[i] = e;
      }
      return;
    }
    c.origin = CandidateOrigin::sampled;
    request.temperature = config.temperature;
    request.tag = engine.tag(fmt::format("stage1-sample-{}", i));
    for (int attempt = 0; attempt < 2; ++attempt) {
      if (attempt == 1) request.tag += "-retry";
      try {
        c.text = request_text(*engine.policy, request);
        failures[i].reset();
        return;
      } catch (const ProviderError& e) {
        failures[i] = e;
      }
    }
  });

  if (failures[0]) {
    throw ProviderError(failures[0]->kind(),
                        fmt::format("greedy candidate failed: {}", failures[0]->what()));
  }
  for (int i = 1; i < k; ++i) {
    if (failures[i]) {
      spdlog::warn("{}: sampled candidate {} failed twice, substituting greedy text: {}", task.id, i,
                   failures[i]->what());
      set.candidates[i].text = set.candidates[0].text;
      set.candidates[i].substituted = true;
    }
  }
  mark_duplicates(set.candidates);
  return set;
}

SearchTrace run_panel(const Task& task, const SearchConfig& config, const Engine& engine) {
  return run_step_search(task, config, engine, Selector::critique);
}

SearchTrace run_step_self_eval(const Task& task, const SearchConfig& config, const Engine& engine) {
  return run_step_search(task, config, engine, Selector::self_eval);
}

SearchTrace run_greedy_baseline(const Task& task, int max_tokens, const Engine& engine) {
  SearchTrace trace;
  trace.task_id = task.id;
  trace.method = "greedy";
  trace.config_snapshot = ordered_json{{"max_tokens_solution", max_tokens}};

  ChatRequest request;
  request.messages = {
      {Role::system, text::render(engine.pack().solution_system,
                                  {{"answer_format", answer_format(task.answer_spec)}})},
      {Role::user, text::render(engine.pack().solution_user, {{"problem", task.prompt}})},
  };
  request.temperature = 0.0;
  request.max_tokens = max_tokens;
  request.tag = engine.tag("greedy-solution");

  try {
    StepRecord record;
    record.candidate_set.step_index = 1;
    record.candidate_set.candidates.push_back(
        StepCandidate{0, request_text(*engine.policy, request), CandidateOrigin::greedy, {}, false});
    record.decision.parse_ok = true;
    record.decision.forced = true;
    trace.steps.push_back(std::move(record));
    const std::string& text_out = trace.steps.back().candidate_set.candidates[0].text;
    trace.terminated_by = is_terminal(text_out) ? TerminatedBy::final_answer : TerminatedBy::max_steps;
    trace.final_text = text_out;
  } catch (const ProviderError& e) {
    trace.terminated_by = TerminatedBy::provider_error;
    trace.error = e.what();
  }
  trace.grade = grade(trace.final_text, task);
  return trace;
}

// ---------------------------------------------------------------------------

ordered_json to_json(const GradeResult& g) {
  ordered_json j;
  j["extracted"] = g.extracted ? json(*g.extracted) : json(nullptr);
  j["correct"] = g.correct;
  j["failure_reason"] = g.failure_reason ? json(to_string(*g.failure_reason)) : json(nullptr);
  return j;
}

ordered_json to_json(const Critique& c) {
  ordered_json j;
  j["candidate_index"] = c.candidate_index;
  j["correctness"] = to_string(c.correctness);
  j["critique"] = c.text;
  j["raw"] = c.raw;
  j["attempts"] = c.attempts;
  if (c.error) j["error"] = *c.error;
  return j;
}

ordered_json to_json(const Decision& d) {
  ordered_json j;
  j["chosen_index"] = d.chosen_index;
  j["parse_ok"] = d.parse_ok;
  j["forced"] = d.forced;
  j["rationale"] = d.rationale;
  j["raw"] = d.raw;
  if (d.error) j["error"] = *d.error;
  return j;
}

namespace {

ordered_json to_json(const StepCandidate& c) {
  ordered_json j;
  j["index"] = c.index;
  j["origin"] = to_string(c.origin);
  j["text"] = c.text;
  j["duplicate_of"] = c.duplicate_of ? json(*c.duplicate_of) : json(nullptr);
  if (c.substituted) j["substituted"] = true;
  return j;
}

ordered_json to_json(const SelfEvalScore& s) {
  ordered_json j;
  j["candidate_index"] = s.candidate_index;
  j["score"] = s.score;
  j["parse_ok"] = s.parse_ok;
  j["raw"] = s.raw;
  if (s.error) j["error"] = *s.error;
  return j;
}

}  // namespace

ordered_json to_json(const SearchTrace& trace) {
  ordered_json j;
  j["schema_version"] = kTraceSchemaVersion;
  j["task_id"] = trace.task_id;
  j["method"] = trace.method;
  j["terminated_by"] = to_string(trace.terminated_by);
  if (trace.error) j["error"] = *trace.error;
  j["config"] = trace.config_snapshot;
  ordered_json steps = ordered_json::array();
  for (const auto& s : trace.steps) {
    ordered_json step;
    step["step_index"] = s.candidate_set.step_index;
    ordered_json candidates = ordered_json::array();
    for (const auto& c : s.candidate_set.candidates) candidates.push_back(to_json(c));
    step["candidates"] = std::move(candidates);
    if (!s.critiques.empty()) {
      ordered_json critiques = ordered_json::array();
      for (const auto& c : s.critiques) critiques.push_back(to_json(c));
      step["critiques"] = std::move(critiques);
    }
    if (!s.scores.empty()) {
      ordered_json scores = ordered_json::array();
      for (const auto& sc : s.scores) scores.push_back(to_json(sc));
      step["scores"] = std::move(scores);
    }
    step["chosen_index"] = s.chosen_index();
    step["decision"] = to_json(s.decision);
    if (s.counterfactual) {
      step["counterfactual_index"] = s.counterfactual->chosen_index;
      step["counterfactual"] = to_json(*s.counterfactual);
    }
    steps.push_back(std::move(step));
  }
  j["steps"] = std::move(steps);
  j["final_text"] = trace.final_text;
  j["grade"] = to_json(trace.grade);
  return j;
}

}  // namespace panel
