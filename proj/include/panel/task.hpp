#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace panel {

// Domain tag of a task. Routes the critique prompt.
enum class Domain { math, physics, chemistry, biology, other };

std::string_view to_string(Domain d);
std::optional<Domain> parse_domain(std::string_view s);

enum class AnswerKind { integer_0_999, multiple_choice };

std::string_view to_string(AnswerKind k);
std::optional<AnswerKind> parse_answer_kind(std::string_view s);

struct AnswerSpec {
  AnswerKind kind = AnswerKind::integer_0_999;
  // Uppercase choice labels, multiple_choice only.
  std::vector<std::string> choices;

  static AnswerSpec integer();
  static AnswerSpec multiple_choice(std::vector<std::string> labels);

  bool operator==(const AnswerSpec&) const = default;
};

struct Task {
  std::string id;
  std::string prompt;
  Domain domain = Domain::other;
  AnswerSpec answer_spec;
  std::string gold;  // canonical form under answer_spec
  std::string source;
};

struct Dataset {
  std::string name;
  std::vector<Task> tasks;

  const Task* find(std::string_view id) const;
};

enum class GradeFailure { no_answer_found, normalization_failed };

std::string_view to_string(GradeFailure f);

struct GradeResult {
  std::optional<std::string> extracted;
  bool correct = false;
  std::optional<GradeFailure> failure_reason;
};

class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}

  // 1-based; 0 when the error is not tied to a line.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline constexpr std::string_view kFinalAnswerSentinel = "FINAL ANSWER:";

/// Loads a line-delimited JSON task file. The dataset name defaults to the
/// file stem. Blank lines are skipped; unknown fields are ignored with a
/// warning. Throws DatasetError on malformed records, duplicate ids, or a
/// gold answer that does not normalize under its own spec.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::string_view text, std::string name);

/// Canonical serialization, one record per line, fixed field order.
std::string write_dataset(const Dataset& dataset);

std::optional<std::string> normalize_answer(std::string_view raw, const AnswerSpec& spec);

/// Text following the last "FINAL ANSWER:" (case-insensitive) up to the end
/// of that line, or nullopt when the sentinel does not occur.
std::optional<std::string_view> find_final_answer_text(std::string_view completion);

std::optional<std::string> extract_final_answer(std::string_view completion, const AnswerSpec& spec);

GradeResult grade(std::string_view completion, const Task& task);

}  // namespace panel
