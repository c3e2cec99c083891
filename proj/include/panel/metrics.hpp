#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panel/task.hpp"

namespace panel {

enum class Method {
  greedy,
  self_consistency,
  solution_select,
  solution_select_critique,
  step_self_eval,
  panel,
};

std::string_view to_string(Method m);
std::optional<Method> parse_method(std::string_view s);
// Row label used in reports ("Self-Consistency", "PANEL", ...).
std::string_view display_name(Method m);

struct TaskResult {
  std::string task_id;
  Method method = Method::panel;
  bool correct = false;
  Domain domain = Domain::other;
  std::string source;
  // One entry per independent rerun; empty when only one run was made.
  std::vector<bool> sample_outcomes;
};

struct DivergenceSample {
  std::string task_id;
  int step_index = 1;
  int chosen_index = 0;
  int counterfactual_index = 0;
};

/// Fraction of correct results. Throws std::invalid_argument on empty input.
double accuracy(std::span<const TaskResult> results);

struct GroupAccuracy {
  std::string group;
  int correct = 0;
  int total = 0;

  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

struct AccuracyBreakdown {
  std::vector<GroupAccuracy> groups;  // sorted by group key
  GroupAccuracy pooled;               // micro-average over every task
};

enum class GroupBy { domain, source };

std::string_view to_string(GroupBy g);
std::optional<GroupBy> parse_group_by(std::string_view s);

AccuracyBreakdown accuracy_breakdown(std::span<const TaskResult> results, GroupBy by = GroupBy::domain);

/// Unbiased pass@k: 1 - C(n-c, k) / C(n, k), evaluated as a running product.
/// Requires 0 <= c <= n and 1 <= k <= n; throws std::invalid_argument otherwise.
double pass_at_k(int n, int c, int k);

/// Mean pass@k over tasks, using each task's sample_outcomes.
double mean_pass_at_k(std::span<const TaskResult> results, int k);

struct DivergencePoint {
  int step_index = 1;
  int pairs = 0;
  int differing = 0;
  std::optional<double> ratio;
};

/// Share of decision pairs at `step_index` whose indices differ, or nullopt
/// when no pair was recorded at that step.
std::optional<double> divergence_ratio(std::span<const DivergenceSample> samples, int step_index);

/// One point per step from 1 to the deepest recorded step.
std::vector<DivergencePoint> divergence_curve(std::span<const DivergenceSample> samples);

/// Percentage with one decimal place: 0.2576 -> "25.8".
std::string format_percent(double fraction);

}  // namespace panel
