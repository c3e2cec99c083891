#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "panel/harness.hpp"
#include "panel/metrics.hpp"

namespace panel {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReportOptions {
  GroupBy group_by = GroupBy::domain;
  // Italicize the best value in each group column and bold the best "All".
  bool emphasis = true;
};

/// Column header for a group key: "Biol.", "Chem.", "Math", "Other", "Phys.",
/// or the key itself for sources.
std::string group_label(std::string_view key, GroupBy by);

/// Methods x groups accuracy table, one row per run in method order, "All"
/// last. Throws ReportError for mixed datasets or repeated methods.
std::string render_accuracy_table(std::span<const RunRecord> runs, const ReportOptions& options = {});

struct PassAtKRow {
  Method method = Method::panel;
  int k = 1;
  double value = 0.0;
};

/// pass@k for k = 1..n for every run that recorded n reruns per task.
std::vector<PassAtKRow> pass_at_k_rows(std::span<const RunRecord> runs);

std::string render_pass_at_k(std::span<const RunRecord> runs);
std::string render_divergence(std::span<const RunRecord> runs);

/// Full markdown report: accuracy, pass@k and divergence sections.
std::string render_report(std::span<const RunRecord> runs, const ReportOptions& options = {});

/// Writes report.md, accuracy.tsv, pass_at_k.tsv and divergence.tsv.
void write_report(std::span<const RunRecord> runs, const ReportOptions& options,
                  const std::filesystem::path& out_dir);

struct Comparison {
  std::string run_a;
  std::string run_b;
  std::vector<std::string> only_a;  // correct in A, wrong in B
  std::vector<std::string> only_b;  // correct in B, wrong in A
  int both_correct = 0;
  int both_wrong = 0;
};

/// Per-task correctness diff. Throws ReportError unless both runs cover the
/// same dataset and task ids.
Comparison compare_runs(const RunRecord& a, const RunRecord& b);
std::string render_comparison(const Comparison& c);

}  // namespace panel
