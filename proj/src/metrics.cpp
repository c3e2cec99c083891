#include "panel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

namespace panel {

namespace {

constexpr Method kMethods[] = {Method::greedy,         Method::self_consistency,
                               Method::solution_select, Method::solution_select_critique,
                               Method::step_self_eval, Method::panel};

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::greedy: return "greedy";
    case Method::self_consistency: return "self_consistency";
    case Method::solution_select: return "solution_select";
    case Method::solution_select_critique: return "solution_select_critique";
    case Method::step_self_eval: return "step_self_eval";
    case Method::panel: return "panel";
  }
  return "panel";
}

std::optional<Method> parse_method(std::string_view s) {
  for (Method m : kMethods) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

std::string_view display_name(Method m) {
  switch (m) {
    case Method::greedy: return "Baseline";
    case Method::self_consistency: return "Self-Consistency";
    case Method::solution_select: return "Solution-Level Self-Evaluation";
    case Method::solution_select_critique: return "+ NL Self-Critique";
    case Method::step_self_eval: return "Step-Level Self-Evaluation";
    case Method::panel: return "PANEL";
  }
  return "";
}

std::string_view to_string(GroupBy g) { return g == GroupBy::domain ? "domain" : "source"; }

std::optional<GroupBy> parse_group_by(std::string_view s) {
  if (s == "domain") return GroupBy::domain;
  if (s == "source") return GroupBy::source;
  return std::nullopt;
}

double accuracy(std::span<const TaskResult> results) {
  if (results.empty()) throw std::invalid_argument("accuracy of an empty result list");
  auto correct = std::count_if(results.begin(), results.end(), [](const TaskResult& r) { return r.correct; });
  return static_cast<double>(correct) / static_cast<double>(results.size());
}

AccuracyBreakdown accuracy_breakdown(std::span<const TaskResult> results, GroupBy by) {
  if (results.empty()) throw std::invalid_argument("accuracy of an empty result list");
  std::map<std::string, GroupAccuracy> groups;
  AccuracyBreakdown out;
  out.pooled.group = "All";
  for (const auto& r : results) {
    std::string key = by == GroupBy::domain ? std::string(to_string(r.domain)) : r.source;
    GroupAccuracy& g = groups[key];
    g.group = key;
    ++g.total;
    ++out.pooled.total;
    if (r.correct) {
      ++g.correct;
      ++out.pooled.correct;
    }
  }
  for (auto& [_, g] : groups) out.groups.push_back(g);
  return out;
}

double pass_at_k(int n, int c, int k) {
  if (n < 1 || c < 0 || c > n || k < 1 || k > n) {
    throw std::invalid_argument(fmt::format("pass@k needs 0 <= c <= n and 1 <= k <= n (n={}, c={}, k={})", n, c, k));
  }
  if (n - c < k) return 1.0;
  // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k / i)
  double miss = 1.0;
  for (int i = n - c + 1; i <= n; ++i) miss *= 1.0 - static_cast<double>(k) / i;
  return 1.0 - miss;
}

double mean_pass_at_k(std::span<const TaskResult> results, int k) {
  if (results.empty()) throw std::invalid_argument("pass@k of an empty result list");
  double sum = 0.0;
  for (const auto& r : results) {
    if (r.sample_outcomes.empty()) throw std::invalid_argument(fmt::format("{} has no sample outcomes", r.task_id));
    int n = static_cast<int>(r.sample_outcomes.size());
    int c = static_cast<int>(std::count(r.sample_outcomes.begin(), r.sample_outcomes.end(), true));
    sum += pass_at_k(n, c, k);
  }
  return sum / static_cast<double>(results.size());
}

std::optional<double> divergence_ratio(std::span<const DivergenceSample> samples, int step_index) {
  int pairs = 0;
  int differing = 0;
  for (const auto& s : samples) {
    if (s.step_index != step_index) continue;
    ++pairs;
    if (s.chosen_index != s.counterfactual_index) ++differing;
  }
  if (pairs == 0) return std::nullopt;
  return static_cast<double>(differing) / pairs;
}

std::vector<DivergencePoint> divergence_curve(std::span<const DivergenceSample> samples) {
  int deepest = 0;
  for (const auto& s : samples) deepest = std::max(deepest, s.step_index);
  std::vector<DivergencePoint> curve;
  for (int step = 1; step <= deepest; ++step) {
    DivergencePoint p;
    p.step_index = step;
    for (const auto& s : samples) {
      if (s.step_index != step) continue;
      ++p.pairs;
      if (s.chosen_index != s.counterfactual_index) ++p.differing;
    }
    p.ratio = divergence_ratio(samples, step);
    curve.push_back(p);
  }
  return curve;
}

std::string format_percent(double fraction) {
  // Round half away from zero on the percentage, after trimming binary noise
  // such as 0.145 * 100 = 14.499999...
  double pct = std::round(fraction * 100.0 * 1e9) / 1e9;
  double tenths = std::floor(pct * 10.0 + 0.5) / 10.0;
  return fmt::format("{:.1f}", tenths);
}

}  // namespace panel
