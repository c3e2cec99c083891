#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "panel/harness.hpp"
#include "panel/report.hpp"
#include "panel/synth.hpp"

namespace fs = std::filesystem;
using namespace panel;

namespace {

struct RunArgs {
  std::optional<std::string> config;
  std::string dataset;
  std::string method;
  std::optional<int> n;
  std::optional<int> k_samples;
  std::string out;
  std::optional<std::string> replay;
  std::optional<std::string> replay_log;
  std::optional<int> concurrency;
  std::optional<std::string> provider;
};

int cmd_run(const RunArgs& a) {
  RunRequest request;
  request.config = a.config ? HarnessConfig::load(*a.config) : HarnessConfig{};
  auto method = parse_method(a.method);
  if (!method) throw HarnessError(fmt::format("unknown method \"{}\"", a.method));
  request.method = *method;
  HarnessConfig& c = request.config;
  if (a.n) c.solution.samples = *a.n;
  if (a.k_samples) c.k_samples = *a.k_samples;
  if (a.concurrency) c.concurrency = *a.concurrency;
  if (a.replay) c.replay = *parse_replay_mode(*a.replay);
  if (a.replay_log) c.replay_log = fs::path(*a.replay_log);
  if (a.provider) {
    ProviderConfig p;
    p.kind = ProviderKind::scripted;
    p.script = *a.provider == "scripted-misleading" ? "misleading" : "oracle";
    c.policy = p;
    c.critic.reset();
  }
  request.dataset_path = a.dataset;
  request.out_dir = a.out;
  RunRecord record = execute_run(request);
  int correct = 0;
  for (const auto& t : record.results) correct += t.correct ? 1 : 0;
  fmt::print("{}: {}/{} correct ({}%)\n", record.run_id, correct, record.results.size(),
             format_percent(accuracy(record.results)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critique-guided step-level search for LLM reasoning"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run one method over a dataset");
  run->add_option("--config", run_args.config, "Harness config (JSON)")->check(CLI::ExistingFile);
  run->add_option("--dataset", run_args.dataset, "Task file (JSONL)")->required()->check(CLI::ExistingFile);
  run->add_option("--method", run_args.method, "Method to run")
      ->required()
      ->check(CLI::IsMember({"panel", "greedy", "self_consistency", "solution_select", "solution_select_critique",
                             "step_self_eval"}));
  run->add_option("--n", run_args.n, "Solution samples for solution-level methods")->check(CLI::PositiveNumber);
  run->add_option("--k-samples", run_args.k_samples, "Independent reruns per task for pass@k")
      ->check(CLI::PositiveNumber);
  run->add_option("--out", run_args.out, "Output directory")->required();
  run->add_option("--replay", run_args.replay, "Replay mode")->check(CLI::IsMember({"off", "record", "strict"}));
  run->add_option("--replay-log", run_args.replay_log, "Replay log path");
  run->add_option("--concurrency", run_args.concurrency, "Tasks in flight")->check(CLI::PositiveNumber);
  run->add_option("--provider", run_args.provider, "Use a built-in scripted provider")
      ->check(CLI::IsMember({"scripted-oracle", "scripted-misleading"}));

  std::vector<std::string> report_runs;
  std::string group_by = "domain";
  std::optional<std::string> report_out;
  bool plain = false;
  auto* report = app.add_subcommand("report", "Render accuracy, pass@k and divergence tables");
  report->add_option("runs", report_runs, "Run directories or run.json files")->required();
  report->add_option("--group-by", group_by, "Column grouping")->check(CLI::IsMember({"domain", "source"}));
  report->add_option("--out", report_out, "Directory for report.md and TSV exports");
  report->add_flag("--plain", plain, "No italics or bold");

  std::string cmp_a;
  std::string cmp_b;
  auto* compare = app.add_subcommand("compare", "Per-task correctness diff of two runs");
  compare->add_option("a", cmp_a, "First run")->required();
  compare->add_option("b", cmp_b, "Second run")->required();

  std::string verify_dir;
  std::optional<std::string> verify_scratch;
  auto* verify = app.add_subcommand("replay-verify", "Re-run a recorded run in strict replay and compare");
  verify->add_option("run", verify_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  verify->add_option("--scratch", verify_scratch, "Directory for the replayed run");

  int synth_count = 200;
  std::uint64_t synth_seed = synth::kDefaultSeed;
  std::string synth_out = "synth.tasks";
  auto* synth_cmd = app.add_subcommand("synth", "Write the planted-path synthetic dataset");
  synth_cmd->add_option("--count", synth_count, "Number of tasks")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");
  synth_cmd->add_option("--out", synth_out, "Output file");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*run) return cmd_run(run_args);
    if (*report) {
      std::vector<RunRecord> runs;
      for (const auto& r : report_runs) runs.push_back(load_run_record(r));
      ReportOptions options;
      options.group_by = *parse_group_by(group_by);
      options.emphasis = !plain;
      if (report_out) {
        write_report(runs, options, *report_out);
        fmt::print("wrote {}\n", (fs::path(*report_out) / "report.md").string());
      } else {
        fmt::print("{}", render_report(runs, options));
      }
      return 0;
    }
    if (*compare) {
      Comparison c = compare_runs(load_run_record(cmp_a), load_run_record(cmp_b));
      fmt::print("{}", render_comparison(c));
      return 0;
    }
    if (*verify) {
      fs::path scratch = verify_scratch ? fs::path(*verify_scratch)
                                        : fs::temp_directory_path() /
                                              fmt::format("panel-replay-{}", std::random_device{}());
      VerifyResult v = replay_verify(verify_dir, scratch);
      if (v.identical) {
        fmt::print("identical: run record and {} traces match\n", load_run_record(verify_dir).trace_files.size());
        return 0;
      }
      for (const auto& d : v.differences) fmt::print("differs: {}\n", d);
      return 1;
    }
    if (*synth_cmd) {
      Dataset d = synth::generate_dataset(synth_count, synth_seed);
      std::ofstream out(synth_out, std::ios::binary | std::ios::trunc);
      if (!out) throw HarnessError(fmt::format("cannot write {}", synth_out));
      out << write_dataset(d);
      fmt::print("wrote {} tasks to {}\n", d.tasks.size(), synth_out);
      return 0;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
