#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "panel/prompts.hpp"
#include "panel/provider.hpp"

namespace panel {

enum class CandidateOrigin { greedy, sampled };

std::string_view to_string(CandidateOrigin o);

struct StepCandidate {
  int index = 0;
  std::string text;
  CandidateOrigin origin = CandidateOrigin::sampled;
  std::optional<int> duplicate_of;  // lowest index with identical text
  // The sampled call failed twice; the slot holds a copy of the greedy text.
  bool substituted = false;
};

struct CandidateSet {
  int step_index = 1;  // 1-based
  std::vector<StepCandidate> candidates;

  std::size_t size() const { return candidates.size(); }
};

/// Sets duplicate_of on every candidate whose text equals an earlier one.
void mark_duplicates(std::vector<StepCandidate>& candidates);

/// Providers and prompts shared by every stage of a run.
struct Engine {
  std::shared_ptr<ChatProvider> policy;
  std::shared_ptr<ChatProvider> critic;  // same object as policy for self-critique
  std::shared_ptr<const PromptPack> prompts;
  // Prepended to request tags; keeps independent reruns in separate replay slots.
  std::string tag_prefix;

  std::string tag(std::string_view base) const { return tag_prefix + std::string(base); }
  const PromptPack& pack() const { return *prompts; }
};

}  // namespace panel
