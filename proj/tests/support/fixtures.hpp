#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "panel/engine.hpp"
#include "panel/prompts.hpp"
#include "panel/provider.hpp"
#include "panel/task.hpp"

namespace panel::testing {

inline Task integer_task(std::string id = "t1", std::string gold = "42", Domain domain = Domain::math) {
  Task t;
  t.id = std::move(id);
  t.prompt = "What is six times seven?";
  t.domain = domain;
  t.answer_spec = AnswerSpec::integer();
  t.gold = std::move(gold);
  t.source = "unit";
  return t;
}

inline Task choice_task(std::string id = "c1", std::string gold = "B", Domain domain = Domain::physics) {
  Task t;
  t.id = std::move(id);
  t.prompt = "Which is heavier?\n(A) feather (B) brick (C) air (D) light";
  t.domain = domain;
  t.answer_spec = AnswerSpec::multiple_choice({"A", "B", "C", "D"});
  t.gold = std::move(gold);
  t.source = "unit";
  return t;
}

inline std::shared_ptr<const PromptPack> default_prompts() {
  return std::make_shared<const PromptPack>(PromptPack::defaults());
}

inline Engine engine_with(std::shared_ptr<ChatProvider> policy, std::shared_ptr<ChatProvider> critic = nullptr) {
  Engine e;
  e.policy = policy;
  e.critic = critic ? critic : policy;
  e.prompts = default_prompts();
  return e;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() / ("panel-test-" + name + "-" + std::to_string(rng()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace panel::testing
