#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "panel/critique.hpp"
#include "panel/decision.hpp"
#include "panel/engine.hpp"
#include "panel/task.hpp"

namespace panel {

// Solution-level methods: self-consistency and model-selected solutions.
struct SolutionConfig {
  int samples = 5;  // N
  double temperature = 0.6;
  int max_tokens = 4096;
  int max_tokens_critique = 512;
  int max_tokens_decision = 256;
  int critique_retries = 1;
  int concurrency_limit = 4;

  void validate() const;

  nlohmann::ordered_json to_json() const;
  static SolutionConfig from_json(const nlohmann::json& j);
};

struct SolutionSample {
  int index = 0;
  std::string full_text;
  std::optional<std::string> extracted;
  std::optional<Critique> critique;
  std::optional<std::string> error;
};

struct VoteResult {
  std::optional<std::string> answer;
  std::vector<std::pair<std::string, int>> votes;  // first-seen order
  bool tie = false;
};

/// Plurality over present answers. Ties go to the answer sampled first.
VoteResult majority_vote(std::span<const std::optional<std::string>> answers);

struct SolutionRun {
  std::string task_id;
  std::string method;
  std::vector<SolutionSample> samples;
  std::optional<VoteResult> vote;
  std::optional<Decision> decision;
  std::optional<int> chosen_index;
  std::optional<std::string> answer;
  GradeResult grade;
  nlohmann::ordered_json config_snapshot;
};

nlohmann::ordered_json to_json(const SolutionRun& run);

/// N full chain-of-thought solutions at the sampling temperature.
std::vector<SolutionSample> sample_solutions(const Task& task, const SolutionConfig& config,
                                             const Engine& engine);

SolutionRun self_consistency(const Task& task, const SolutionConfig& config, const Engine& engine);

/// The policy picks one of N sampled solutions ("SELECTED: <index>",
/// fallback 0). With `with_critique`, each solution is critiqued first and the
/// critiques are shown to the selector.
SolutionRun solution_level_select(const Task& task, bool with_critique, const SolutionConfig& config,
                                  const Engine& engine);

}  // namespace panel
