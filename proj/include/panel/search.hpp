#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "panel/critique.hpp"
#include "panel/decision.hpp"
#include "panel/engine.hpp"
#include "panel/task.hpp"

namespace panel {

inline constexpr int kTraceSchemaVersion = 1;

struct SearchConfig {
  int candidates = 5;        // K: one greedy plus K-1 sampled
  double temperature = 0.6;  // sampled candidates and critiques
  int max_steps = 16;
  int max_tokens_step = 512;
  int max_tokens_critique = 512;
  int max_tokens_decision = 256;
  int critique_retries = 1;
  bool compute_counterfactual = true;
  int concurrency_limit = 4;

  void validate() const;  // throws std::invalid_argument

  nlohmann::ordered_json to_json() const;
  static SearchConfig from_json(const nlohmann::json& j);
};

enum class TerminatedBy { final_answer, max_steps, provider_error };

std::string_view to_string(TerminatedBy t);

struct StepRecord {
  CandidateSet candidate_set;
  std::vector<Critique> critiques;     // PANEL
  std::vector<SelfEvalScore> scores;   // step-level self-evaluation
  Decision decision;
  std::optional<Decision> counterfactual;  // no-critique selection, not followed

  int chosen_index() const { return decision.chosen_index; }
  std::optional<int> counterfactual_index() const {
    return counterfactual ? std::optional<int>(counterfactual->chosen_index) : std::nullopt;
  }
};

struct SearchTrace {
  std::string task_id;
  std::string method;
  std::vector<StepRecord> steps;
  std::string final_text;
  GradeResult grade;
  TerminatedBy terminated_by = TerminatedBy::max_steps;
  std::optional<std::string> error;
  nlohmann::ordered_json config_snapshot;

  std::vector<std::string> chosen_texts() const;
};

nlohmann::ordered_json to_json(const SearchTrace& trace);
nlohmann::ordered_json to_json(const Critique& c);
nlohmann::ordered_json to_json(const Decision& d);
nlohmann::ordered_json to_json(const GradeResult& g);

/// Chosen step texts joined by a blank line.
std::string join_steps(std::span<const std::string> steps);

/// True iff the text contains the "FINAL ANSWER:" sentinel (any case).
bool is_terminal(std::string_view candidate_text);

/// Stop string that ends generation at the start of step `next_step`.
std::string step_delimiter(int next_step);

std::vector<ChatMessage> build_step_messages(const Task& task, std::span<const std::string> history,
                                             const PromptPack& pack);

/// Stage 1: one greedy request (temperature 0) and K-1 sampled requests.
/// Greedy comes first. A failed greedy call throws ProviderError; a sampled
/// call that fails twice is replaced by a copy of the greedy text.
CandidateSet sample_candidates(const Task& task, std::span<const std::string> history,
                               const SearchConfig& config, const Engine& engine);

/// The critique-guided step search. Never throws ProviderError; provider
/// failures end the trace with terminated_by = provider_error.
SearchTrace run_panel(const Task& task, const SearchConfig& config, const Engine& engine);

/// Same search shape with per-candidate scalar self-scores and argmax.
SearchTrace run_step_self_eval(const Task& task, const SearchConfig& config, const Engine& engine);

/// One chain-of-thought completion at temperature 0, recorded as a one-step trace.
SearchTrace run_greedy_baseline(const Task& task, int max_tokens, const Engine& engine);

}  // namespace panel
