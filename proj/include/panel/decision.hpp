#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panel/critique.hpp"
#include "panel/engine.hpp"
#include "panel/prompts.hpp"
#include "panel/provider.hpp"
#include "panel/task.hpp"

namespace panel {

struct Decision {
  int chosen_index = 0;
  std::string rationale;
  bool parse_ok = false;
  std::string raw;
  // True when only one option existed and no call was made.
  bool forced = false;
  std::optional<std::string> error;
};

struct SelfEvalScore {
  int candidate_index = 0;
  double score = 0.0;  // [0, 10]
  std::string raw;
  bool parse_ok = false;
  std::optional<std::string> error;
};

struct DecisionOptions {
  double temperature = 0.0;
  int max_tokens = 256;
  std::size_t concurrency = 4;
  std::string tag_prefix;
};

/// Index after the last "SELECTED:" (case-insensitive), if it is in [0, count).
std::optional<int> parse_selection(std::string_view raw, std::size_t count);

/// Applies the selection contract: parsed index, or `fallback` with
/// parse_ok=false.
Decision decision_from_reply(std::string_view raw, std::size_t count, int fallback = 0);

/// With `critiques` null the prompt carries no critique content at all.
std::vector<ChatMessage> build_decision_messages(const Task& task,
                                                 std::span<const std::string> history,
                                                 const CandidateSet& candidates,
                                                 const std::vector<Critique>* critiques,
                                                 const PromptPack& pack);

Decision select_with_critiques(const Task& task, std::span<const std::string> history,
                               const CandidateSet& candidates,
                               const std::vector<Critique>& critiques, ChatProvider& policy,
                               const PromptPack& pack, const DecisionOptions& options);

Decision select_without_critiques(const Task& task, std::span<const std::string> history,
                                  const CandidateSet& candidates, ChatProvider& policy,
                                  const PromptPack& pack, const DecisionOptions& options);

/// First number in [0, 10] in the reply.
std::optional<double> parse_score(std::string_view raw);

std::vector<ChatMessage> build_self_eval_messages(const Task& task,
                                                  std::span<const std::string> history,
                                                  const StepCandidate& candidate,
                                                  const PromptPack& pack);

SelfEvalScore score_candidate(const Task& task, std::span<const std::string> history,
                              const StepCandidate& candidate, ChatProvider& policy,
                              const PromptPack& pack, const DecisionOptions& options);

/// Scores every distinct candidate; duplicates reuse their representative's score.
std::vector<SelfEvalScore> score_candidates(const Task& task, std::span<const std::string> history,
                                            const CandidateSet& candidates, ChatProvider& policy,
                                            const PromptPack& pack, const DecisionOptions& options);

/// Index of the maximal score; ties go to the lowest index.
int select_argmax(std::span<const double> scores);
int select_argmax(std::span<const SelfEvalScore> scores);

}  // namespace panel
