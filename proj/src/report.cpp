#include "panel/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

namespace panel {

namespace fs = std::filesystem;

namespace {

void check_runs(std::span<const RunRecord> runs) {
  if (runs.empty()) throw ReportError("report needs at least one run record");
  for (const auto& r : runs) {
    if (r.dataset != runs.front().dataset) {
      throw ReportError(fmt::format("runs cover different datasets ({} and {}); report them separately",
                                    runs.front().dataset, r.dataset));
    }
    if (r.results.empty()) throw ReportError(fmt::format("run {} has no results", r.run_id));
  }
  std::set<Method> seen;
  for (const auto& r : runs) {
    if (!seen.insert(r.method).second) {
      throw ReportError(fmt::format("method {} appears in more than one run", to_string(r.method)));
    }
  }
}

std::vector<const RunRecord*> in_method_order(std::span<const RunRecord> runs) {
  std::vector<const RunRecord*> out;
  for (const auto& r : runs) out.push_back(&r);
  std::stable_sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->method < b->method; });
  return out;
}

std::string row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& c : cells) out += " " + c + " |";
  return out + "\n";
}

std::string rule(std::size_t columns) {
  std::string out = "|---|";
  for (std::size_t i = 1; i < columns; ++i) out += "---:|";
  return out + "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ReportError(fmt::format("cannot write {}", path.string()));
  out << text;
}

struct Grid {
  std::vector<std::string> keys;                       // group keys, sorted
  std::vector<std::vector<std::optional<GroupAccuracy>>> cells;  // run x group
  std::vector<GroupAccuracy> pooled;
};

Grid build_grid(const std::vector<const RunRecord*>& ordered, GroupBy by) {
  Grid g;
  std::set<std::string> keys;
  std::vector<AccuracyBreakdown> breakdowns;
  for (const auto* r : ordered) {
    breakdowns.push_back(accuracy_breakdown(r->results, by));
    for (const auto& ga : breakdowns.back().groups) keys.insert(ga.group);
  }
  g.keys.assign(keys.begin(), keys.end());
  for (const auto& b : breakdowns) {
    std::vector<std::optional<GroupAccuracy>> line;
    for (const auto& key : g.keys) {
      auto it = std::find_if(b.groups.begin(), b.groups.end(), [&](const auto& ga) { return ga.group == key; });
      line.push_back(it == b.groups.end() ? std::nullopt : std::optional<GroupAccuracy>(*it));
    }
    g.cells.push_back(std::move(line));
    g.pooled.push_back(b.pooled);
  }
  return g;
}

}  // namespace

std::string group_label(std::string_view key, GroupBy by) {
  if (by == GroupBy::domain) {
    if (key == "biology") return "Biol.";
    if (key == "chemistry") return "Chem.";
    if (key == "physics") return "Phys.";
    if (key == "math") return "Math";
    if (key == "other") return "Other";
  }
  return std::string(key);
}

std::string render_accuracy_table(std::span<const RunRecord> runs, const ReportOptions& options) {
  check_runs(runs);
  auto ordered = in_method_order(runs);
  Grid g = build_grid(ordered, options.group_by);

  // Emphasis compares the rendered strings so ties at one decimal all count.
  auto best = [&](auto&& value_at) {
    std::optional<double> top;
    for (std::size_t r = 0; r < ordered.size(); ++r) {
      if (auto v = value_at(r)) top = std::max(top.value_or(*v), *v);
    }
    return top ? format_percent(*top) : std::string();
  };

  std::vector<std::string> header{"Method"};
  for (const auto& key : g.keys) header.push_back(group_label(key, options.group_by));
  header.push_back("All");
  std::string out = row(header) + rule(header.size());

  std::vector<std::string> column_best;
  for (std::size_t c = 0; c < g.keys.size(); ++c) {
    column_best.push_back(best([&](std::size_t r) -> std::optional<double> {
      return g.cells[r][c] ? std::optional<double>(g.cells[r][c]->fraction()) : std::nullopt;
    }));
  }
  std::string all_best = best([&](std::size_t r) -> std::optional<double> { return g.pooled[r].fraction(); });

  for (std::size_t r = 0; r < ordered.size(); ++r) {
    std::vector<std::string> cells{std::string(display_name(ordered[r]->method))};
    for (std::size_t c = 0; c < g.keys.size(); ++c) {
      if (!g.cells[r][c]) {
        cells.push_back("-");
        continue;
      }
      std::string v = format_percent(g.cells[r][c]->fraction());
      bool mark = options.emphasis && ordered.size() > 1 && v == column_best[c];
      cells.push_back(mark ? "*" + v + "*" : v);
    }
    std::string all = format_percent(g.pooled[r].fraction());
    bool mark = options.emphasis && ordered.size() > 1 && all == all_best;
    cells.push_back(mark ? "**" + all + "**" : all);
    out += row(cells);
  }
  return out;
}

std::vector<PassAtKRow> pass_at_k_rows(std::span<const RunRecord> runs) {
  std::vector<PassAtKRow> rows;
  for (const auto* r : in_method_order(runs)) {
    std::size_t n = r->results.front().sample_outcomes.size();
    if (n == 0) continue;
    for (const auto& t : r->results) {
      if (t.sample_outcomes.size() != n) {
        throw ReportError(fmt::format("run {}: tasks differ in rerun count", r->run_id));
      }
    }
    for (int k = 1; k <= static_cast<int>(n); ++k) {
      rows.push_back({r->method, k, mean_pass_at_k(r->results, k)});
    }
  }
  return rows;
}

std::string render_pass_at_k(std::span<const RunRecord> runs) {
  check_runs(runs);
  auto rows = pass_at_k_rows(runs);
  if (rows.empty()) return "No run recorded multiple samples per task.\n";
  std::vector<Method> methods;
  int max_k = 0;
  for (const auto& p : rows) {
    if (std::find(methods.begin(), methods.end(), p.method) == methods.end()) methods.push_back(p.method);
    max_k = std::max(max_k, p.k);
  }
  std::vector<std::string> header{"k"};
  for (Method m : methods) header.push_back(std::string(display_name(m)));
  std::string out = row(header) + rule(header.size());
  for (int k = 1; k <= max_k; ++k) {
    std::vector<std::string> cells{std::to_string(k)};
    for (Method m : methods) {
      auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& p) { return p.method == m && p.k == k; });
      cells.push_back(it == rows.end() ? "-" : format_percent(it->value));
    }
    out += row(cells);
  }
  return out;
}

std::string render_divergence(std::span<const RunRecord> runs) {
  check_runs(runs);
  std::string out;
  for (const auto* r : in_method_order(runs)) {
    if (r->divergence.empty()) continue;
    if (!out.empty()) out += "\n";
    out += fmt::format("{} ({})\n\n", display_name(r->method), r->run_id);
    out += row({"Step", "Differing", "Pairs", "Ratio"}) + rule(4);
    for (const auto& p : divergence_curve(r->divergence)) {
      out += row({std::to_string(p.step_index), std::to_string(p.differing), std::to_string(p.pairs),
                  p.ratio ? fmt::format("{:.3f}", *p.ratio) : "-"});
    }
  }
  if (out.empty()) return "No run recorded counterfactual selections.\n";
  return out;
}

std::string render_report(std::span<const RunRecord> runs, const ReportOptions& options) {
  check_runs(runs);
  std::string out = fmt::format("# Results on {}\n\n", runs.front().dataset);
  out += "## Accuracy (%)\n\n" + render_accuracy_table(runs, options);
  out += "\n## Pass@k (%)\n\n" + render_pass_at_k(runs);
  out += "\n## Selection divergence per step\n\n" + render_divergence(runs);
  out += "\n## Runs\n\n";
  out += row({"Method", "Run", "Tasks", "Calls", "Prompt tokens", "Completion tokens"}) + rule(6);
  for (const auto* r : in_method_order(runs)) {
    out += row({std::string(display_name(r->method)), r->run_id, std::to_string(r->results.size()),
                std::to_string(r->usage.calls), std::to_string(r->usage.prompt_tokens),
                std::to_string(r->usage.completion_tokens)});
  }
  return out;
}

void write_report(std::span<const RunRecord> runs, const ReportOptions& options, const fs::path& out_dir) {
  check_runs(runs);
  fs::create_directories(out_dir);
  write_text(out_dir / "report.md", render_report(runs, options));

  auto ordered = in_method_order(runs);
  std::string acc = "method\tgroup\tcorrect\ttotal\taccuracy\n";
  for (const auto* r : ordered) {
    AccuracyBreakdown b = accuracy_breakdown(r->results, options.group_by);
    for (const auto& g : b.groups) {
      acc += fmt::format("{}\t{}\t{}\t{}\t{}\n", to_string(r->method), g.group, g.correct, g.total,
                         format_percent(g.fraction()));
    }
    acc += fmt::format("{}\tAll\t{}\t{}\t{}\n", to_string(r->method), b.pooled.correct, b.pooled.total,
                       format_percent(b.pooled.fraction()));
  }
  write_text(out_dir / "accuracy.tsv", acc);

  std::string pk = "method\tk\tpass_at_k\n";
  for (const auto& p : pass_at_k_rows(runs)) {
    pk += fmt::format("{}\t{}\t{:.6f}\n", to_string(p.method), p.k, p.value);
  }
  write_text(out_dir / "pass_at_k.tsv", pk);

  std::string div = "method\tstep\tdiffering\tpairs\tratio\n";
  for (const auto* r : ordered) {
    for (const auto& p : divergence_curve(r->divergence)) {
      div += fmt::format("{}\t{}\t{}\t{}\t{}\n", to_string(r->method), p.step_index, p.differing, p.pairs,
                         p.ratio ? fmt::format("{:.6f}", *p.ratio) : "");
    }
  }
  write_text(out_dir / "divergence.tsv", div);
}

Comparison compare_runs(const RunRecord& a, const RunRecord& b) {
  if (a.dataset != b.dataset) {
    throw ReportError(fmt::format("cannot compare runs on different datasets ({} and {})", a.dataset, b.dataset));
  }
  std::map<std::string, bool> b_correct;
  for (const auto& t : b.results) b_correct[t.task_id] = t.correct;
  if (b_correct.size() != a.results.size()) throw ReportError("runs cover different task sets");
  Comparison c;
  c.run_a = a.run_id;
  c.run_b = b.run_id;
  for (const auto& t : a.results) {
    auto it = b_correct.find(t.task_id);
    if (it == b_correct.end()) throw ReportError(fmt::format("task {} missing from {}", t.task_id, b.run_id));
    if (t.correct && it->second) {
      ++c.both_correct;
    } else if (!t.correct && !it->second) {
      ++c.both_wrong;
    } else if (t.correct) {
      c.only_a.push_back(t.task_id);
    } else {
      c.only_b.push_back(t.task_id);
    }
  }
  return c;
}

std::string render_comparison(const Comparison& c) {
  std::string out = fmt::format("# {} vs {}\n\n", c.run_a, c.run_b);
  out += fmt::format("- both correct: {}\n- both wrong: {}\n", c.both_correct, c.both_wrong);
  out += fmt::format("- correct only in A: {}\n- correct only in B: {}\n", c.only_a.size(), c.only_b.size());
  auto list = [&](std::string_view title, const std::vector<std::string>& ids) {
    if (ids.empty()) return;
    out += fmt::format("\n## {}\n\n", title);
    for (const auto& id : ids) out += fmt::format("- {}\n", id);
  };
  list("Correct only in A", c.only_a);
  list("Correct only in B", c.only_b);
  return out;
}

}  // namespace panel
