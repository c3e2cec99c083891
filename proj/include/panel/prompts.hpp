#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "panel/task.hpp"

namespace panel {

/// Editable prompt templates. On disk this is a directory with one text file
/// per entry; critique system prompts are named after the domain
/// (math.txt, physics.txt, chemistry.txt, biology.txt, other.txt).
struct PromptPack {
  std::map<Domain, std::string> critique;
  std::string critique_user;
  std::string solution_critique_user;
  std::string step_system;
  std::string step_user;
  std::string solution_system;
  std::string solution_user;
  std::string decision_system;
  std::string decision_user;
  std::string self_eval_system;
  std::string self_eval_user;
  std::string solution_select_system;
  std::string solution_select_user;

  // The built-in pack (compiled from prompts/).
  static const PromptPack& defaults();

  // Files missing from `dir` fall back to the built-in text.
  static PromptPack load(const std::filesystem::path& dir);

  // Falls back to the "other" template for domains without an entry.
  const std::string& critique_template(Domain d) const;

  std::string digest() const;
};

/// "Prior steps: (none)" or "Prior steps:\nStep 1: ...\nStep 2: ...".
std::string render_prior_steps(std::span<const std::string> history);

/// One-line description of the expected answer form.
std::string answer_format(const AnswerSpec& spec);

}  // namespace panel
