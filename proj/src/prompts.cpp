#include "panel/prompts.hpp"

#include <fstream>
#include <sstream>
#include <utility>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "panel/provider.hpp"

namespace panel {

namespace {

struct EmbeddedPrompt {
  const char* file;
  const char* text;
};

constexpr EmbeddedPrompt kEmbedded[] = {
#include "prompts_default.inc"
};

std::string strip_final_newline(std::string s) {
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

using Slot = std::string PromptPack::*;

constexpr std::pair<const char*, Slot> kSlots[] = {
    {"critique_user.txt", &PromptPack::critique_user},
    {"solution_critique_user.txt", &PromptPack::solution_critique_user},
    {"step.txt", &PromptPack::step_system},
    {"step_user.txt", &PromptPack::step_user},
    {"solution.txt", &PromptPack::solution_system},
    {"solution_user.txt", &PromptPack::solution_user},
    {"decision.txt", &PromptPack::decision_system},
    {"decision_user.txt", &PromptPack::decision_user},
    {"self_eval.txt", &PromptPack::self_eval_system},
    {"self_eval_user.txt", &PromptPack::self_eval_user},
    {"solution_select.txt", &PromptPack::solution_select_system},
    {"solution_select_user.txt", &PromptPack::solution_select_user},
};

constexpr Domain kDomains[] = {Domain::math, Domain::physics, Domain::chemistry, Domain::biology,
                               Domain::other};

std::string embedded(std::string_view file) {
  for (const auto& p : kEmbedded) {
    if (file == p.file) return strip_final_newline(p.text);
  }
  throw std::logic_error(fmt::format("prompt {} is not embedded", file));
}

PromptPack build_defaults() {
  PromptPack pack;
  for (Domain d : kDomains) pack.critique[d] = embedded(fmt::format("{}.txt", to_string(d)));
  for (const auto& [file, slot] : kSlots) pack.*slot = embedded(file);
  return pack;
}

std::optional<std::string> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return strip_final_newline(buffer.str());
}

}  // namespace

const PromptPack& PromptPack::defaults() {
  static const PromptPack pack = build_defaults();
  return pack;
}

PromptPack PromptPack::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error(fmt::format("prompt pack {} is not a directory", dir.string()));
  }
  PromptPack pack = defaults();
  auto take = [&](const std::string& file, std::string& slot) {
    if (auto text = read_file(dir / file)) {
      slot = std::move(*text);
    } else {
      spdlog::info("prompt pack {}: {} not found, using built-in text", dir.string(), file);
    }
  };
  for (Domain d : kDomains) take(fmt::format("{}.txt", to_string(d)), pack.critique[d]);
  for (const auto& [file, slot] : kSlots) take(file, pack.*slot);
  return pack;
}

const std::string& PromptPack::critique_template(Domain d) const {
  if (auto it = critique.find(d); it != critique.end()) return it->second;
  return critique.at(Domain::other);
}

std::string PromptPack::digest() const {
  // Reuses the request digest so the pack hash is stable across builds.
  ChatRequest carrier;
  carrier.tag = "prompt-pack";
  for (Domain d : kDomains) carrier.messages.push_back({Role::system, critique_template(d)});
  for (const auto& [file, slot] : kSlots) carrier.messages.push_back({Role::system, this->*slot});
  return panel::digest(carrier);
}

std::string render_prior_steps(std::span<const std::string> history) {
  if (history.empty()) return "Prior steps: (none)";
  std::string out = "Prior steps:";
  for (std::size_t i = 0; i < history.size(); ++i) {
    out += fmt::format("\nStep {}: {}", i + 1, history[i]);
  }
  return out;
}

std::string answer_format(const AnswerSpec& spec) {
  if (spec.kind == AnswerKind::integer_0_999) {
    return "The answer is an integer from 0 to 999, written without leading zeros.";
  }
  std::string labels;
  for (std::size_t i = 0; i < spec.choices.size(); ++i) {
    if (i > 0) labels += ", ";
    labels += spec.choices[i];
  }
  return fmt::format("The answer is the label of one choice: {}.", labels);
}

}  // namespace panel
