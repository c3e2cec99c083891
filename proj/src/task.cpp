#include "panel/task.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "panel/text.hpp"

namespace panel {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::math: return "math";
    case Domain::physics: return "physics";
    case Domain::chemistry: return "chemistry";
    case Domain::biology: return "biology";
    case Domain::other: return "other";
  }
  return "other";
}

std::optional<Domain> parse_domain(std::string_view s) {
  for (Domain d : {Domain::math, Domain::physics, Domain::chemistry, Domain::biology, Domain::other}) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

std::string_view to_string(AnswerKind k) {
  return k == AnswerKind::integer_0_999 ? "integer_0_999" : "multiple_choice";
}

std::optional<AnswerKind> parse_answer_kind(std::string_view s) {
  if (s == "integer_0_999") return AnswerKind::integer_0_999;
  if (s == "multiple_choice") return AnswerKind::multiple_choice;
  return std::nullopt;
}

std::string_view to_string(GradeFailure f) {
  return f == GradeFailure::no_answer_found ? "no_answer_found" : "normalization_failed";
}

AnswerSpec AnswerSpec::integer() { return AnswerSpec{AnswerKind::integer_0_999, {}}; }

AnswerSpec AnswerSpec::multiple_choice(std::vector<std::string> labels) {
  return AnswerSpec{AnswerKind::multiple_choice, std::move(labels)};
}

const Task* Dataset::find(std::string_view id) const {
  auto it = std::find_if(tasks.begin(), tasks.end(), [&](const Task& t) { return t.id == id; });
  return it == tasks.end() ? nullptr : &*it;
}

namespace {

// Peels whitespace, trailing sentence punctuation, and matched wrappers such
// as "(c)", "**42**", "$7$" or "\boxed{12}" until nothing changes.
std::string_view unwrap(std::string_view s) {
  static constexpr std::pair<std::string_view, std::string_view> kWrappers[] = {
      {"\\boxed{", "}"}, {"(", ")"}, {"[", "]"}, {"{", "}"}, {"\"", "\""},
      {"'", "'"},        {"**", "**"}, {"*", "*"}, {"$", "$"}, {"`", "`"},
  };
  for (;;) {
    std::string_view before = s;
    s = text::trim(s);
    while (!s.empty() && std::string_view(".,;:!").find(s.back()) != std::string_view::npos) {
      s.remove_suffix(1);
      s = text::trim(s);
    }
    for (const auto& [open, close] : kWrappers) {
      if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
        s = s.substr(open.size(), s.size() - open.size() - close.size());
        break;
      }
    }
    if (s == before) return s;
  }
}

std::optional<std::string> normalize_integer(std::string_view s) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return std::nullopt;
  }
  while (s.size() > 1 && s.front() == '0') s.remove_prefix(1);
  if (s.size() > 3) return std::nullopt;
  return std::string(s);
}

std::optional<std::string> normalize_choice(std::string_view s, const AnswerSpec& spec) {
  std::string upper = text::to_upper(s);
  if (std::find(spec.choices.begin(), spec.choices.end(), upper) == spec.choices.end()) {
    return std::nullopt;
  }
  return upper;
}

std::vector<std::string> default_choices() { return {"A", "B", "C", "D"}; }

}  // namespace

std::optional<std::string> normalize_answer(std::string_view raw, const AnswerSpec& spec) {
  std::string_view core = unwrap(raw);
  if (spec.kind == AnswerKind::integer_0_999) return normalize_integer(core);
  return normalize_choice(core, spec);
}

std::optional<std::string_view> find_final_answer_text(std::string_view completion) {
  std::size_t pos = text::ifind_last(completion, kFinalAnswerSentinel);
  if (pos == std::string_view::npos) return std::nullopt;
  std::string_view rest = completion.substr(pos + kFinalAnswerSentinel.size());
  std::size_t eol = rest.find('\n');
  if (eol != std::string_view::npos) rest = rest.substr(0, eol);
  return rest;
}

std::optional<std::string> extract_final_answer(std::string_view completion, const AnswerSpec& spec) {
  auto rest = find_final_answer_text(completion);
  if (!rest) return std::nullopt;
  return normalize_answer(*rest, spec);
}

GradeResult grade(std::string_view completion, const Task& task) {
  GradeResult result;
  auto rest = find_final_answer_text(completion);
  if (!rest) {
    result.failure_reason = GradeFailure::no_answer_found;
    return result;
  }
  result.extracted = normalize_answer(*rest, task.answer_spec);
  if (!result.extracted) {
    result.failure_reason = GradeFailure::normalization_failed;
    return result;
  }
  result.correct = *result.extracted == task.gold;
  return result;
}

namespace {

std::string require_string(const json& record, const char* key, std::size_t line) {
  auto it = record.find(key);
  if (it == record.end()) {
    throw DatasetError(fmt::format("line {}: missing field \"{}\"", line, key), line);
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw DatasetError(fmt::format("line {}: field \"{}\" must be a string", line, key), line);
}

Task parse_record(const json& record, std::size_t line, std::set<std::string>& warned) {
  static const std::set<std::string> kKnown = {"id", "prompt", "domain", "answer_kind",
                                               "choices", "gold", "source"};
  if (!record.is_object()) {
    throw DatasetError(fmt::format("line {}: record is not an object", line), line);
  }
  for (const auto& [key, _] : record.items()) {
    if (!kKnown.contains(key) && warned.insert(key).second) {
      spdlog::warn("dataset line {}: ignoring unknown field \"{}\"", line, key);
    }
  }

  Task task;
  task.id = require_string(record, "id", line);
  if (task.id.empty()) throw DatasetError(fmt::format("line {}: empty id", line), line);
  task.prompt = require_string(record, "prompt", line);

  std::string domain = require_string(record, "domain", line);
  auto d = parse_domain(domain);
  if (!d) throw DatasetError(fmt::format("line {}: unknown domain \"{}\"", line, domain), line);
  task.domain = *d;

  std::string kind = require_string(record, "answer_kind", line);
  auto k = parse_answer_kind(kind);
  if (!k) throw DatasetError(fmt::format("line {}: unknown answer_kind \"{}\"", line, kind), line);
  task.answer_spec.kind = *k;

  if (*k == AnswerKind::multiple_choice) {
    auto it = record.find("choices");
    if (it == record.end() || it->is_null()) {
      task.answer_spec.choices = default_choices();
    } else {
      if (!it->is_array() || it->empty()) {
        throw DatasetError(fmt::format("line {}: choices must be a non-empty array", line), line);
      }
      for (const auto& c : *it) {
        if (!c.is_string() || text::trim(c.get<std::string>()).empty()) {
          throw DatasetError(fmt::format("line {}: choice labels must be non-empty strings", line), line);
        }
        std::string label = text::to_upper(text::trim(c.get<std::string>()));
        if (std::find(task.answer_spec.choices.begin(), task.answer_spec.choices.end(), label) !=
            task.answer_spec.choices.end()) {
          throw DatasetError(fmt::format("line {}: duplicate choice label \"{}\"", line, label), line);
        }
        task.answer_spec.choices.push_back(std::move(label));
      }
    }
  }

  std::string gold = require_string(record, "gold", line);
  auto canonical = normalize_answer(gold, task.answer_spec);
  if (!canonical) {
    throw DatasetError(
        fmt::format("line {}: gold \"{}\" is invalid for answer_kind {}", line, gold, kind), line);
  }
  task.gold = *canonical;

  if (auto it = record.find("source"); it != record.end() && it->is_string()) {
    task.source = it->get<std::string>();
  }
  return task;
}

}  // namespace

Dataset parse_dataset(std::string_view text_in, std::string name) {
  Dataset dataset{std::move(name), {}};
  std::unordered_set<std::string> ids;
  std::set<std::string> warned;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text_in.size()) {
    std::size_t eol = text_in.find('\n', pos);
    if (eol == std::string_view::npos) eol = text_in.size();
    std::string_view line = text_in.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;

    json record = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (record.is_discarded()) {
      throw DatasetError(fmt::format("line {}: parse error", line_no), line_no);
    }
    Task task = parse_record(record, line_no, warned);
    if (!ids.insert(task.id).second) {
      throw DatasetError(fmt::format("duplicate id \"{}\" at line {}", task.id, line_no), line_no);
    }
    dataset.tasks.push_back(std::move(task));
  }
  if (dataset.tasks.empty()) throw DatasetError("parse: empty dataset", 0);
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(fmt::format("cannot open dataset {}", path.string()), 0);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str(), path.stem().string());
}

std::string write_dataset(const Dataset& dataset) {
  std::string out;
  for (const Task& t : dataset.tasks) {
    ordered_json record;
    record["id"] = t.id;
    record["prompt"] = t.prompt;
    record["domain"] = to_string(t.domain);
    record["answer_kind"] = to_string(t.answer_spec.kind);
    if (t.answer_spec.kind == AnswerKind::multiple_choice) record["choices"] = t.answer_spec.choices;
    record["gold"] = t.gold;
    if (!t.source.empty()) record["source"] = t.source;
    out += record.dump();
    out += '\n';
  }
  return out;
}

}  // namespace panel
