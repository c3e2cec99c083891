#include "panel/synth.hpp"

#include <cctype>
#include <charconv>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "panel/text.hpp"

namespace panel::synth {

namespace {

constexpr int kModulus = 1000;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

int wrong_delta(int slot) {
  static constexpr int kDeltas[] = {1, 3, 3, 11, 29, 101, 211, 307};
  if (slot < static_cast<int>(std::size(kDeltas))) return kDeltas[slot];
  return 13 * slot + 7;
}

std::string label(std::size_t i) { return std::string(1, static_cast<char>('A' + i)); }

std::optional<int> leading_int(std::string_view s) {
  std::size_t end = 0;
  while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
  if (end == 0 || end > 9) return std::nullopt;
  int v = 0;
  std::from_chars(s.data(), s.data() + end, v);
  return v;
}

// Value after the last "= " in a step.
std::optional<int> claimed_value(std::string_view step) {
  std::size_t pos = step.rfind("= ");
  if (pos == std::string_view::npos) return std::nullopt;
  return leading_int(step.substr(pos + 2));
}

std::string_view between(std::string_view s, std::string_view begin, std::string_view end) {
  std::size_t b = s.find(begin);
  if (b == std::string_view::npos) return {};
  b += begin.size();
  std::size_t e = end.empty() ? std::string_view::npos : s.find(end, b);
  return s.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b);
}

std::string_view last_user(const ChatRequest& request) {
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
    if (it->role == Role::user) return it->content;
  }
  return {};
}

std::vector<std::string_view> lines_of(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t eol = s.find('\n', pos);
    if (eol == std::string_view::npos) eol = s.size();
    out.push_back(s.substr(pos, eol - pos));
    pos = eol + 1;
  }
  return out;
}

// Step texts listed under "Prior steps:".
std::vector<std::string_view> prior_steps(std::string_view user) {
  std::vector<std::string_view> steps;
  std::string_view section = between(user, "Prior steps:", "\n\n");
  for (std::string_view line : lines_of(section)) {
    if (!line.starts_with("Step ")) continue;
    std::size_t colon = line.find(": ");
    if (colon != std::string_view::npos) steps.push_back(line.substr(colon + 2));
  }
  return steps;
}

struct StepState {
  int step = 1;     // step about to be taken
  int current = 0;  // value before it
};

StepState state_after(const Problem& problem, const std::vector<std::string_view>& history) {
  StepState s{static_cast<int>(history.size()) + 1, problem.start};
  if (!history.empty()) {
    if (auto v = claimed_value(history.back())) s.current = *v;
  }
  return s;
}

std::optional<std::string> final_answer_of(std::string_view step) {
  auto rest = find_final_answer_text(step);
  if (!rest) return std::nullopt;
  return std::string(text::trim(*rest));
}

// Whether `latest` is the correct next step after `state`.
bool verify_step(const Problem& problem, const StepState& state, std::string_view latest) {
  const int n = static_cast<int>(problem.ops.size());
  if (state.step > n) return false;
  int expected = problem.ops[state.step - 1].apply(state.current);
  auto claimed = claimed_value(latest);
  if (!claimed || *claimed != expected) return false;
  auto answer = final_answer_of(latest);
  if (state.step < n) return !answer.has_value();
  return answer && *answer == answer_for(problem, expected);
}

std::string step_verdict(const Problem& problem, const StepState& state, std::string_view latest,
                         bool fenced) {
  nlohmann::ordered_json j;
  if (verify_step(problem, state, latest)) {
    j["correctness"] = "correct";
    j["critique"] = "";
  } else {
    j["correctness"] = "incorrect";
    if (state.step <= static_cast<int>(problem.ops.size())) {
      const Operation& op = problem.ops[state.step - 1];
      j["critique"] = fmt::format("Operation {} applied to {} should give {}.", state.step, state.current,
                                  op.apply(state.current));
    } else {
      j["critique"] = "All operations were already applied.";
    }
  }
  if (fenced) return fmt::format("Reviewing the step.\n```json\n{}\n```", j.dump(2));
  return j.dump();
}

// Index of the first listed candidate annotated "Critique: no issues found".
std::optional<int> first_clean_candidate(std::string_view listing) {
  std::optional<int> current;
  for (std::string_view line : lines_of(listing)) {
    if (line.starts_with("[")) {
      current = leading_int(line.substr(1));
    } else if (line == "Critique: no issues found" && current) {
      return current;
    }
  }
  return std::nullopt;
}

std::optional<int> suffix_index(std::string_view tag, std::string_view prefix) {
  if (!tag.starts_with(prefix)) return std::nullopt;
  return leading_int(tag.substr(prefix.size()));
}

std::string step_text(const Problem& problem, int step, int current, int delta) {
  const int n = static_cast<int>(problem.ops.size());
  if (step > n) return fmt::format("FINAL ANSWER: {}", answer_for(problem, current));
  const Operation& op = problem.ops[step - 1];
  int result = (op.apply(current) + delta) % kModulus;
  std::string t = fmt::format("{} {} {} = {} (mod 1000).", current,
                              op.kind == Operation::add ? '+' : '*', op.operand, result);
  if (step == n) t += fmt::format(" FINAL ANSWER: {}", answer_for(problem, result));
  return t;
}

// Whole solution; every step is correct except the trap step when `delta` is
// nonzero.
std::string full_solution(const Problem& problem, const PlantedPath& path, int delta) {
  std::string out;
  int current = problem.start;
  for (int step = 1; step <= static_cast<int>(problem.ops.size()); ++step) {
    std::string t = step_text(problem, step, current, step == path.trap_step ? delta : 0);
    current = claimed_value(t).value_or(current);
    if (!out.empty()) out += "\n\n";
    out += fmt::format("Step {}: {}", step, t);
  }
  return out;
}

bool verify_solution(const Problem& problem, std::string_view solution) {
  StepState state{1, problem.start};
  int seen = 0;
  for (std::string_view line : lines_of(solution)) {
    if (!line.starts_with("Step ")) continue;
    std::size_t colon = line.find(": ");
    if (colon == std::string_view::npos) return false;
    std::string_view step = line.substr(colon + 2);
    if (!verify_step(problem, state, step)) return false;
    state.current = *claimed_value(step);
    ++state.step;
    ++seen;
  }
  return seen == static_cast<int>(problem.ops.size());
}

}  // namespace

int Operation::apply(int value) const {
  long long v = kind == add ? static_cast<long long>(value) + operand
                            : static_cast<long long>(value) * operand;
  return static_cast<int>(((v % kModulus) + kModulus) % kModulus);
}

std::optional<Problem> parse_problem(std::string_view prompt) {
  Problem p;
  bool have_start = false;
  for (std::string_view line : lines_of(prompt)) {
    line = text::trim(line);
    if (line.starts_with("Start with ")) {
      auto v = leading_int(line.substr(11));
      if (!v) return std::nullopt;
      p.start = *v;
      have_start = true;
    } else if (line.starts_with("Operation ")) {
      std::size_t colon = line.find(": ");
      if (colon == std::string_view::npos) return std::nullopt;
      std::string_view body = line.substr(colon + 2);
      Operation op;
      if (body.starts_with("add ")) {
        op.kind = Operation::add;
        body.remove_prefix(4);
      } else if (body.starts_with("multiply by ")) {
        op.kind = Operation::multiply;
        body.remove_prefix(12);
      } else {
        return std::nullopt;
      }
      auto v = leading_int(body);
      if (!v) return std::nullopt;
      op.operand = *v;
      p.ops.push_back(op);
    } else if (line.starts_with("Choices:")) {
      std::string_view rest = line.substr(8);
      for (std::size_t pos = rest.find('('); pos != std::string_view::npos; pos = rest.find('(', pos + 1)) {
        std::size_t close = rest.find(')', pos);
        if (close == std::string_view::npos) return std::nullopt;
        auto v = leading_int(text::trim(rest.substr(close + 1)));
        if (!v) return std::nullopt;
        p.choice_values.push_back(*v);
      }
    }
  }
  if (!have_start || p.ops.empty()) return std::nullopt;
  return p;
}

PlantedPath planted_path(const Problem& problem, std::string_view prompt, int k) {
  PlantedPath path;
  int value = problem.start;
  for (const auto& op : problem.ops) {
    value = op.apply(value);
    path.values.push_back(value);
  }
  std::uint64_t h = fnv1a(prompt);
  path.trap_step = 1 + static_cast<int>(h % problem.ops.size());
  path.correct_slot = 1 + static_cast<int>((h / 1000003ULL) % static_cast<std::uint64_t>(std::max(1, k - 1)));
  return path;
}

int correct_slot(const PlantedPath& path, int step) {
  return step == path.trap_step ? path.correct_slot : 0;
}

std::string answer_for(const Problem& problem, int final_value) {
  if (problem.choice_values.empty()) return std::to_string(final_value);
  for (std::size_t i = 0; i < problem.choice_values.size(); ++i) {
    if (problem.choice_values[i] == final_value) return label(i);
  }
  // A value outside the choices maps to a label other than the gold one.
  int gold = problem.start;
  for (const auto& op : problem.ops) gold = op.apply(gold);
  std::vector<std::size_t> distractors;
  for (std::size_t i = 0; i < problem.choice_values.size(); ++i) {
    if (problem.choice_values[i] != gold) distractors.push_back(i);
  }
  if (distractors.empty()) return "?";
  return label(distractors[static_cast<std::size_t>(final_value) % distractors.size()]);
}

std::string candidate_text(const Problem& problem, const PlantedPath& path, int step, int slot,
                           int current) {
  return step_text(problem, step, current, slot == correct_slot(path, step) ? 0 : wrong_delta(slot));
}

Dataset generate_dataset(int count, std::uint64_t seed) {
  static constexpr Domain kCycle[] = {Domain::math, Domain::physics, Domain::chemistry,
                                      Domain::biology, Domain::other};
  std::mt19937_64 rng(seed);
  auto draw = [&](int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); };

  Dataset dataset{"synth", {}};
  for (int i = 0; i < count; ++i) {
    Problem p;
    p.start = draw(1, 999);
    int steps = draw(2, 4);
    for (int s = 0; s < steps; ++s) {
      Operation op;
      if (rng() % 2 == 0) {
        op.kind = Operation::add;
        op.operand = draw(1, 999);
      } else {
        op.kind = Operation::multiply;
        do {
          op.operand = 3 + 2 * draw(0, 497);
        } while (op.operand % 5 == 0);
      }
      p.ops.push_back(op);
    }
    int final_value = p.start;
    for (const auto& op : p.ops) final_value = op.apply(final_value);

    Task task;
    task.id = fmt::format("synth-{:03d}", i);
    task.domain = kCycle[i % std::size(kCycle)];
    task.source = "synth";
    std::string prompt = fmt::format("Start with {}.\n", p.start);
    for (std::size_t s = 0; s < p.ops.size(); ++s) {
      const Operation& op = p.ops[s];
      prompt += op.kind == Operation::add ? fmt::format("Operation {}: add {}.\n", s + 1, op.operand)
                                          : fmt::format("Operation {}: multiply by {}.\n", s + 1, op.operand);
    }
    prompt += "All arithmetic is modulo 1000. What is the final value?";

    bool choice = task.domain == Domain::physics || task.domain == Domain::chemistry ||
                  task.domain == Domain::biology;
    if (choice) {
      int gold_pos = draw(0, 3);
      std::vector<int> values;
      int offset = 0;
      for (int c = 0; c < 4; ++c) {
        if (c == gold_pos) {
          values.push_back(final_value);
          continue;
        }
        int v = 0;
        do {
          v = (final_value + 137 * (++offset) + 11) % kModulus;
        } while (v == final_value || std::find(values.begin(), values.end(), v) != values.end());
        values.push_back(v);
      }
      prompt += "\nChoices:";
      for (std::size_t c = 0; c < values.size(); ++c) prompt += fmt::format(" ({}) {}", label(c), values[c]);
      prompt += "\nAnswer with the letter of the choice equal to the final value.";
      task.answer_spec = AnswerSpec::multiple_choice({"A", "B", "C", "D"});
      task.gold = label(static_cast<std::size_t>(gold_pos));
    } else {
      task.answer_spec = AnswerSpec::integer();
      task.gold = std::to_string(final_value);
    }
    task.prompt = std::move(prompt);
    dataset.tasks.push_back(std::move(task));
  }
  return dataset;
}

ScriptedProvider::Handler make_oracle_handler(OracleOptions options) {
  return [options](const ChatRequest& request) -> std::optional<std::string> {
    std::string_view tag = request.tag;
    if (auto slash = tag.rfind('/'); slash != std::string_view::npos) tag = tag.substr(slash + 1);
    std::string_view user = last_user(request);
    std::string_view prompt = between(user, "Problem:\n", "\n\n");
    auto problem = parse_problem(prompt);
    if (!problem) return std::nullopt;
    PlantedPath path = planted_path(*problem, prompt, options.candidates);

    if (tag == "stage1-greedy" || tag.starts_with("stage1-sample-")) {
      int slot = tag == "stage1-greedy" ? 0 : suffix_index(tag, "stage1-sample-").value_or(1);
      StepState state = state_after(*problem, prior_steps(user));
      return candidate_text(*problem, path, state.step, slot, state.current);
    }
    if (tag.starts_with("stage2-critique-")) {
      StepState state = state_after(*problem, prior_steps(user));
      std::string_view latest = between(user, "Latest reasoning step:\n", "\n\n");
      bool fenced = suffix_index(tag, "stage2-critique-").value_or(0) % 2 == 1;
      return step_verdict(*problem, state, latest, fenced);
    }
    if (tag == "stage3-decision" || tag == "solution-select") {
      std::string_view listing = tag == "stage3-decision" ? between(user, "Candidate next steps:\n", "")
                                                          : between(user, "Candidate solutions:\n", "");
      if (auto clean = first_clean_candidate(listing)) {
        return fmt::format("Candidate [{}] holds up under review.\nSELECTED: {}", *clean, *clean);
      }
      return std::string("No candidate is clearly right.\nSELECTED: 0");
    }
    if (tag == "stage3-decision-nocritique") return std::string("SELECTED: 0");
    if (tag.starts_with("stepeval-score-")) {
      StepState state = state_after(*problem, prior_steps(user));
      std::string_view latest = between(user, "Latest reasoning step:\n", "\n\n");
      bool ok = verify_step(*problem, state, latest);
      if (options.scorer == ScorerMode::misleading) return std::string(ok ? "1" : "Score: 9/10");
      return std::string(ok ? "9" : "2");
    }
    if (tag == "greedy-solution") return full_solution(*problem, path, wrong_delta(0));
    if (tag.starts_with("solution-sample-")) {
      // Odd samples are right; even ones miss the trap, each by a different amount.
      int i = suffix_index(tag, "solution-sample-").value_or(0);
      return full_solution(*problem, path, i % 2 == 1 ? 0 : wrong_delta(i));
    }
    if (tag.starts_with("solution-critique-")) {
      std::string_view user_view = user;
      std::size_t begin = user_view.find("Complete solution:\n");
      std::size_t end = user_view.rfind("\n\nReturn a JSON object");
      if (begin == std::string_view::npos || end == std::string_view::npos || end < begin) return std::nullopt;
      begin += std::string_view("Complete solution:\n").size();
      bool ok = verify_solution(*problem, user_view.substr(begin, end - begin));
      nlohmann::ordered_json j;
      j["correctness"] = ok ? "correct" : "incorrect";
      j["critique"] = ok ? "" : "One of the operations was computed incorrectly.";
      return j.dump();
    }
    return std::nullopt;
  };
}

std::shared_ptr<ScriptedProvider> make_oracle_provider(OracleOptions options) {
  auto provider = std::make_shared<ScriptedProvider>(
      options.scorer == ScorerMode::misleading ? "scripted:misleading" : "scripted:oracle");
  provider->set_handler(make_oracle_handler(options));
  return provider;
}

}  // namespace panel::synth
