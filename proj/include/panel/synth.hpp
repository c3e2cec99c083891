#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "panel/provider.hpp"
#include "panel/task.hpp"

namespace panel::synth {

// Planted-path tasks: a chain of modular arithmetic operations whose unique
// correct step sequence is known by construction. Every operation is a
// bijection mod 1000, so a single wrong step always changes the final value.

struct Operation {
  enum Kind { add, multiply } kind = add;
  int operand = 0;

  int apply(int value) const;
};

struct Problem {
  int start = 0;
  std::vector<Operation> ops;
  std::vector<int> choice_values;  // empty for integer answers; labels are A, B, C, ...
};

/// Parses the prompt text produced by generate_dataset.
std::optional<Problem> parse_problem(std::string_view prompt);

struct PlantedPath {
  std::vector<int> values;  // correct value after each step
  int trap_step = 1;        // 1-based step where the greedy candidate is wrong
  int correct_slot = 1;     // candidate index holding the correct step at the trap
};

/// Trap placement derives from a hash of the prompt, so it is stable for a
/// given prompt and candidate count `k` (k >= 2).
PlantedPath planted_path(const Problem& problem, std::string_view prompt, int k);

/// Candidate slot `slot` for step `step` (1-based) starting from `current`.
std::string candidate_text(const Problem& problem, const PlantedPath& path, int step, int slot,
                           int current);

/// Index of the correct candidate at `step`.
int correct_slot(const PlantedPath& path, int step);

std::string answer_for(const Problem& problem, int final_value);

/// The shipped dataset is generate_dataset(200, kDefaultSeed).
inline constexpr std::uint64_t kDefaultSeed = 20250401;
Dataset generate_dataset(int count, std::uint64_t seed = kDefaultSeed);

enum class ScorerMode { truthful, misleading };

struct OracleOptions {
  int candidates = 5;
  // The scalar self-evaluation scorer. Misleading ranks wrong steps above
  // correct ones.
  ScorerMode scorer = ScorerMode::truthful;
};

/// Content-based scripted replies for every request the engine issues:
/// candidates follow the planted path, critiques are truthful, the critique
/// selector picks the first candidate critiqued as correct, and the
/// no-critique selector always picks the greedy candidate.
ScriptedProvider::Handler make_oracle_handler(OracleOptions options);

std::shared_ptr<ScriptedProvider> make_oracle_provider(OracleOptions options);

}  // namespace panel::synth
