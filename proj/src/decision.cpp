#include "panel/decision.hpp"

#include <cctype>
#include <charconv>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "panel/parallel.hpp"
#include "panel/text.hpp"

namespace panel {

namespace {

constexpr std::string_view kSelected = "SELECTED:";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

struct SelectionToken {
  std::size_t begin = 0;  // start of "SELECTED:"
  std::size_t end = 0;    // one past the number
  std::optional<unsigned long> value;
};

std::optional<SelectionToken> last_selection(std::string_view raw) {
  std::size_t pos = text::ifind_last(raw, kSelected);
  if (pos == std::string_view::npos) return std::nullopt;
  SelectionToken tok;
  tok.begin = pos;
  std::size_t i = pos + kSelected.size();
  while (i < raw.size() && (is_space(raw[i]) && raw[i] != '\n')) ++i;
  while (i < raw.size() && (raw[i] == '[' || raw[i] == '#' || raw[i] == '*' || raw[i] == '(')) ++i;
  std::size_t digits = i;
  while (i < raw.size() && is_digit(raw[i])) ++i;
  tok.end = i;
  if (i > digits && i - digits <= 9) {
    unsigned long v = 0;
    std::from_chars(raw.data() + digits, raw.data() + i, v);
    tok.value = v;
  }
  return tok;
}

std::string rationale_around(std::string_view raw, const SelectionToken& tok) {
  std::string_view before = text::trim(raw.substr(0, tok.begin));
  std::string_view after = raw.substr(tok.end);
  std::size_t eol = after.find('\n');
  std::string_view line_rest = after.substr(0, eol);
  std::string_view tail = eol == std::string_view::npos ? std::string_view{} : after.substr(eol + 1);
  // Drop closing brackets, dashes and colons after the index.
  while (!line_rest.empty() &&
         (is_space(line_rest.front()) || std::string_view("])*:-.,").find(line_rest.front()) != std::string_view::npos)) {
    line_rest.remove_prefix(1);
  }
  for (std::string_view dash : {"—", "–"}) {
    if (line_rest.starts_with(dash)) line_rest = text::trim(line_rest.substr(dash.size()));
  }
  std::string out(before);
  for (std::string_view part : {text::trim(line_rest), text::trim(tail)}) {
    if (part.empty()) continue;
    if (!out.empty()) out += '\n';
    out += part;
  }
  return out;
}

Decision forced_choice() {
  Decision d;
  d.chosen_index = 0;
  d.parse_ok = true;
  d.forced = true;
  return d;
}

std::string render_candidates(const CandidateSet& candidates, const std::vector<Critique>* critiques) {
  std::string out;
  for (const auto& c : candidates.candidates) {
    if (!out.empty()) out += "\n\n";
    out += fmt::format("[{}] {}", c.index, c.text);
    if (critiques == nullptr) continue;
    const Critique& q = critiques->at(c.index);
    if (q.error) {
      out += "\nCritique: unavailable";
    } else if (q.correctness == Correctness::correct) {
      out += "\nCritique: no issues found";
    } else if (q.correctness == Correctness::incorrect) {
      out += fmt::format("\nCritique: {}", q.text);
    } else {
      out += fmt::format("\nCritique (unstructured): {}", q.raw);
    }
  }
  return out;
}

Decision run_selection(std::vector<ChatMessage> messages, std::size_t count, ChatProvider& policy,
                       const DecisionOptions& options, const std::string& tag) {
  ChatRequest request;
  request.messages = std::move(messages);
  request.temperature = options.temperature;
  request.max_tokens = options.max_tokens;
  request.tag = options.tag_prefix + tag;
  try {
    ChatResponse response = policy.complete(request);
    return decision_from_reply(response.content, count);
  } catch (const ProviderError& e) {
    spdlog::warn("selection call {} failed: {}", request.tag, e.what());
    Decision d;
    d.chosen_index = 0;
    d.parse_ok = false;
    d.error = e.what();
    return d;
  }
}

}  // namespace

std::optional<int> parse_selection(std::string_view raw, std::size_t count) {
  auto tok = last_selection(raw);
  if (!tok || !tok->value || *tok->value >= count) return std::nullopt;
  return static_cast<int>(*tok->value);
}

Decision decision_from_reply(std::string_view raw, std::size_t count, int fallback) {
  Decision d;
  d.raw = std::string(raw);
  auto tok = last_selection(raw);
  if (tok && tok->value && *tok->value < count) {
    d.chosen_index = static_cast<int>(*tok->value);
    d.parse_ok = true;
    d.rationale = rationale_around(raw, *tok);
  } else {
    d.chosen_index = fallback;
    d.parse_ok = false;
    d.rationale = std::string(text::trim(raw));
  }
  return d;
}

std::vector<ChatMessage> build_decision_messages(const Task& task,
                                                 std::span<const std::string> history,
                                                 const CandidateSet& candidates,
                                                 const std::vector<Critique>* critiques,
                                                 const PromptPack& pack) {
  if (critiques != nullptr && critiques->size() != candidates.size()) {
    throw std::invalid_argument("critiques are not aligned with candidates");
  }
  std::string prior = render_prior_steps(history);
  std::string listed = render_candidates(candidates, critiques);
  return {
      {Role::system, pack.decision_system},
      {Role::user, text::render(pack.decision_user,
                                {{"problem", task.prompt}, {"prior_steps", prior}, {"candidates", listed}})},
  };
}

Decision select_with_critiques(const Task& task, std::span<const std::string> history,
                               const CandidateSet& candidates,
                               const std::vector<Critique>& critiques, ChatProvider& policy,
                               const PromptPack& pack, const DecisionOptions& options) {
  if (candidates.size() <= 1) return forced_choice();
  return run_selection(build_decision_messages(task, history, candidates, &critiques, pack),
                       candidates.size(), policy, options, "stage3-decision");
}

Decision select_without_critiques(const Task& task, std::span<const std::string> history,
                                  const CandidateSet& candidates, ChatProvider& policy,
                                  const PromptPack& pack, const DecisionOptions& options) {
  if (candidates.size() <= 1) return forced_choice();
  return run_selection(build_decision_messages(task, history, candidates, nullptr, pack),
                       candidates.size(), policy, options, "stage3-decision-nocritique");
}

std::optional<double> parse_score(std::string_view raw) {
  std::size_t i = 0;
  while (i < raw.size()) {
    if (!is_digit(raw[i])) {
      ++i;
      continue;
    }
    std::size_t begin = i;
    while (i < raw.size() && is_digit(raw[i])) ++i;
    if (i + 1 < raw.size() && raw[i] == '.' && is_digit(raw[i + 1])) {
      ++i;
      while (i < raw.size() && is_digit(raw[i])) ++i;
    }
    bool negative = begin > 0 && raw[begin - 1] == '-';
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(raw.data() + begin, raw.data() + i, value);
    if (ec == std::errc() && !negative && value >= 0.0 && value <= 10.0) return value;
  }
  return std::nullopt;
}

std::vector<ChatMessage> build_self_eval_messages(const Task& task,
                                                  std::span<const std::string> history,
                                                  const StepCandidate& candidate,
                                                  const PromptPack& pack) {
  std::string prior = render_prior_steps(history);
  return {
      {Role::system, pack.self_eval_system},
      {Role::user, text::render(pack.self_eval_user, {{"problem", task.prompt},
                                                      {"prior_steps", prior},
                                                      {"latest_step", candidate.text}})},
  };
}

SelfEvalScore score_candidate(const Task& task, std::span<const std::string> history,
                              const StepCandidate& candidate, ChatProvider& policy,
                              const PromptPack& pack, const DecisionOptions& options) {
  SelfEvalScore s;
  s.candidate_index = candidate.index;
  ChatRequest request;
  request.messages = build_self_eval_messages(task, history, candidate, pack);
  request.temperature = options.temperature;
  request.max_tokens = options.max_tokens;
  request.tag = options.tag_prefix + fmt::format("stepeval-score-{}", candidate.index);
  try {
    ChatResponse response = policy.complete(request);
    s.raw = response.content;
    if (auto v = parse_score(s.raw)) {
      s.score = *v;
      s.parse_ok = true;
    }
  } catch (const ProviderError& e) {
    spdlog::warn("score call {} failed: {}", request.tag, e.what());
    s.error = e.what();
  }
  return s;
}

std::vector<SelfEvalScore> score_candidates(const Task& task, std::span<const std::string> history,
                                            const CandidateSet& candidates, ChatProvider& policy,
                                            const PromptPack& pack, const DecisionOptions& options) {
  std::vector<int> representatives;
  for (const auto& c : candidates.candidates) {
    if (!c.duplicate_of) representatives.push_back(c.index);
  }
  std::vector<SelfEvalScore> scores(candidates.size());
  parallel_for(representatives.size(), options.concurrency, [&](std::size_t r) {
    const StepCandidate& c = candidates.candidates[representatives[r]];
    scores[c.index] = score_candidate(task, history, c, policy, pack, options);
  });
  for (const auto& c : candidates.candidates) {
    if (c.duplicate_of) {
      scores[c.index] = scores[*c.duplicate_of];
      scores[c.index].candidate_index = c.index;
    }
  }
  return scores;
}

int select_argmax(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("select_argmax needs at least one score");
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = static_cast<int>(i);
  }
  return best;
}

int select_argmax(std::span<const SelfEvalScore> scores) {
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& s : scores) values.push_back(s.score);
  return select_argmax(values);
}

}  // namespace panel
