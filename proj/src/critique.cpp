#include "panel/critique.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "panel/parallel.hpp"
#include "panel/text.hpp"

namespace panel {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Correctness c) {
  switch (c) {
    case Correctness::correct: return "correct";
    case Correctness::incorrect: return "incorrect";
    case Correctness::unparseable: return "unparseable";
  }
  return "unparseable";
}

std::vector<ChatMessage> build_critique_messages(const Task& task,
                                                 std::span<const std::string> history,
                                                 const StepCandidate& candidate,
                                                 const PromptPack& pack) {
  std::string prior = render_prior_steps(history);
  return {
      {Role::system, pack.critique_template(task.domain)},
      {Role::user, text::render(pack.critique_user, {{"problem", task.prompt},
                                                     {"prior_steps", prior},
                                                     {"latest_step", candidate.text}})},
  };
}

std::vector<ChatMessage> build_solution_critique_messages(const Task& task,
                                                          std::string_view solution,
                                                          const PromptPack& pack) {
  std::string system = pack.critique_template(task.domain);
  static constexpr std::pair<std::string_view, std::string_view> kReframe[] = {
      {"**the latest reasoning step**", "**the complete solution**"},
      {"the current reasoning step", "the solution"},
      {"the current step", "the solution"},
      {"If the step is", "If the solution is"},
      {"Do not penalize the step", "Do not penalize the solution"},
  };
  for (const auto& [from, to] : kReframe) {
    for (auto pos = system.find(from); pos != std::string::npos; pos = system.find(from, pos + to.size())) {
      system.replace(pos, from.size(), to);
    }
  }
  return {
      {Role::system, std::move(system)},
      {Role::user, text::render(pack.solution_critique_user,
                                {{"problem", task.prompt}, {"solution", solution}})},
  };
}

namespace {

// End of the balanced {...} starting at `open`, honoring JSON strings.
std::size_t matching_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

std::optional<Correctness> label_of(std::string_view value) {
  std::string v = text::to_upper(text::trim(value));
  if (v == "CORRECT") return Correctness::correct;
  if (v == "INCORRECT") return Correctness::incorrect;
  return std::nullopt;
}

Critique make(Correctness c, std::string critique_text, std::string_view raw) {
  Critique out;
  out.correctness = c;
  out.raw = std::string(raw);
  if (c == Correctness::incorrect) out.text = std::move(critique_text);
  return out;
}

std::optional<Critique> from_object(std::string_view raw) {
  for (std::size_t open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
    std::size_t close = matching_brace(raw, open);
    if (close == std::string_view::npos) continue;
    json obj = json::parse(raw.substr(open, close - open + 1), nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded() || !obj.is_object()) continue;
    auto c = obj.find("correctness");
    auto q = obj.find("critique");
    if (c == obj.end() || q == obj.end()) continue;

    std::string critique_text;
    if (q->is_string()) {
      critique_text = q->get<std::string>();
    } else if (q->is_array()) {
      for (const auto& item : *q) {
        if (!critique_text.empty()) critique_text += '\n';
        critique_text += item.is_string() ? item.get<std::string>() : item.dump();
      }
    } else if (!q->is_null()) {
      critique_text = q->dump();
    }
    std::optional<Correctness> label = c->is_string() ? label_of(c->get<std::string>()) : std::nullopt;
    if (!label) return make(Correctness::unparseable, {}, raw);
    return make(*label, std::move(critique_text), raw);
  }
  return std::nullopt;
}

// Value of a quoted string after `"key"\s*:`, decoding JSON escapes.
std::optional<std::string> loose_value(std::string_view raw, std::string_view key) {
  std::string quoted = fmt::format("\"{}\"", key);
  std::size_t pos = text::ifind(raw, quoted);
  while (pos != std::string_view::npos) {
    std::size_t i = pos + quoted.size();
    while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
    if (i < raw.size() && raw[i] == ':') {
      ++i;
      while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
      if (i < raw.size() && raw[i] == '"') {
        std::size_t j = i + 1;
        bool escaped = false;
        for (; j < raw.size(); ++j) {
          if (escaped) {
            escaped = false;
          } else if (raw[j] == '\\') {
            escaped = true;
          } else if (raw[j] == '"') {
            break;
          }
        }
        if (j < raw.size()) {
          json v = json::parse(raw.substr(i, j - i + 1), nullptr, /*allow_exceptions=*/false);
          if (v.is_string()) return v.get<std::string>();
        }
      }
    }
    pos = text::ifind(raw, quoted, pos + 1);
  }
  return std::nullopt;
}

std::optional<Critique> from_pairs(std::string_view raw) {
  auto c = loose_value(raw, "correctness");
  if (!c) return std::nullopt;
  auto label = label_of(*c);
  if (!label) return std::nullopt;
  auto q = loose_value(raw, "critique");
  if (*label == Correctness::incorrect && !q) return std::nullopt;
  return make(*label, q.value_or(""), raw);
}

}  // namespace

Critique parse_critique(std::string_view raw) {
  if (auto c = from_object(raw)) return *c;
  if (auto c = from_pairs(raw)) return *c;
  return make(Correctness::unparseable, {}, raw);
}

std::string serialize_critique(const Critique& critique) {
  if (critique.correctness == Correctness::unparseable) return critique.raw;
  ordered_json j;
  j["correctness"] = to_string(critique.correctness);
  j["critique"] = critique.text;
  return j.dump();
}

Critique request_critique(ChatProvider& critic, std::vector<ChatMessage> messages,
                          const std::string& tag, int candidate_index,
                          const CritiqueOptions& options) {
  ChatRequest request;
  request.messages = std::move(messages);
  request.temperature = options.temperature;
  request.max_tokens = options.max_tokens;

  Critique result;
  for (int attempt = 0; attempt <= std::max(0, options.retries); ++attempt) {
    request.tag = attempt == 0 ? tag : fmt::format("{}-retry-{}", tag, attempt);
    try {
      ChatResponse response = critic.complete(request);
      result = parse_critique(response.content);
      result.error.reset();
    } catch (const ProviderError& e) {
      spdlog::warn("critic call {} failed: {}", request.tag, e.what());
      result = Critique{};
      result.error = e.what();
      result.attempts = attempt + 1;
      break;
    }
    result.attempts = attempt + 1;
    if (result.correctness != Correctness::unparseable) break;
  }
  result.candidate_index = candidate_index;
  return result;
}

std::vector<Critique> critique_candidates(const Task& task, std::span<const std::string> history,
                                          const CandidateSet& candidates, ChatProvider& critic,
                                          const PromptPack& pack, const CritiqueOptions& options) {
  std::vector<int> representatives;
  for (const auto& c : candidates.candidates) {
    if (!c.duplicate_of) representatives.push_back(c.index);
  }

  std::vector<Critique> critiques(candidates.size());
  parallel_for(representatives.size(), options.concurrency, [&](std::size_t r) {
    const StepCandidate& candidate = candidates.candidates[representatives[r]];
    critiques[candidate.index] =
        request_critique(critic, build_critique_messages(task, history, candidate, pack),
                         options.tag_prefix + fmt::format("stage2-critique-{}", candidate.index),
                         candidate.index, options);
  });

  for (const auto& c : candidates.candidates) {
    if (c.duplicate_of) {
      critiques[c.index] = critiques[*c.duplicate_of];
      critiques[c.index].candidate_index = c.index;
    }
  }
  return critiques;
}

}  // namespace panel
