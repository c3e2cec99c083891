#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panel/engine.hpp"
#include "panel/prompts.hpp"
#include "panel/provider.hpp"
#include "panel/task.hpp"

namespace panel {

enum class Correctness { correct, incorrect, unparseable };

std::string_view to_string(Correctness c);

struct Critique {
  Correctness correctness = Correctness::unparseable;
  std::string text;  // empty when correct
  std::string raw;   // verbatim model output
  int candidate_index = 0;
  int attempts = 0;
  // Set when the critic call itself failed; raw is then empty.
  std::optional<std::string> error;
};

/// Stage-2 request for one candidate: the domain template as the system
/// message and the problem, prior steps and latest step as the user message.
std::vector<ChatMessage> build_critique_messages(const Task& task,
                                                 std::span<const std::string> history,
                                                 const StepCandidate& candidate,
                                                 const PromptPack& pack);

/// Same templates, reframed to review a complete solution.
std::vector<ChatMessage> build_solution_critique_messages(const Task& task,
                                                          std::string_view solution,
                                                          const PromptPack& pack);

/// Finds the first JSON object with "correctness" and "critique" keys,
/// tolerating surrounding prose and code fences, and falls back to loose
/// `"correctness": "..."` pairs. Never throws.
Critique parse_critique(std::string_view raw);

/// {"correctness":...,"critique":...}; unparseable critiques serialize to raw.
std::string serialize_critique(const Critique& critique);

struct CritiqueOptions {
  double temperature = 0.6;
  int max_tokens = 512;
  int retries = 1;  // extra attempts for unparseable output
  std::size_t concurrency = 4;
  std::string tag_prefix;
};

/// One critique per candidate, aligned by index. Exact duplicates reuse the
/// critique of the candidate they duplicate. Critic failures become
/// unparseable critiques; this never throws ProviderError.
std::vector<Critique> critique_candidates(const Task& task, std::span<const std::string> history,
                                          const CandidateSet& candidates, ChatProvider& critic,
                                          const PromptPack& pack, const CritiqueOptions& options);

/// Requests a critique of `messages` with retry-on-unparseable. Shared by the
/// step and solution-level critics.
Critique request_critique(ChatProvider& critic, std::vector<ChatMessage> messages,
                          const std::string& tag, int candidate_index,
                          const CritiqueOptions& options);

}  // namespace panel
