// Command-line front end: run experiments, verify the update-rule theorems,
// recompute metrics from a run directory and tabulate modes across seeds.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cuber/experiment.hpp"
#include "cuber/theory.hpp"

namespace {

nlohmann::json report_json(const cuber::theory::VerificationReport& r) {
  nlohmann::json hyp = nlohmann::json::array();
  for (const auto& m : r.hypotheses)
    hyp.push_back({{"name", m.name}, {"lhs", m.lhs}, {"rhs", m.rhs}, {"holds", m.holds()}});
  nlohmann::json measures = nlohmann::json::object();
  for (const auto& [k, v] : r.measures) measures[k] = v;
  return {{"claim", cuber::theory::claim_name(r.claim)},
          {"applicable", r.applicable},
          {"conclusion_holds", r.conclusion_holds},
          {"hypotheses", hyp},
          {"measures", measures}};
}

int cmd_run(const std::string& config, const std::vector<std::uint64_t>& seeds, const std::vector<std::string>& modes,
            const std::string& out, std::size_t threads) {
  cuber::ExperimentConfig cfg = cuber::ExperimentConfig::load(config);
  if (!seeds.empty()) cfg.seeds = seeds;
  if (!modes.empty()) {
    cfg.modes.clear();
    for (const auto& m : modes) cfg.modes.push_back(cuber::parse_mode(m));
  }
  if (!out.empty()) cfg.out = out;
  cfg.validate();
  const auto summary = cuber::run_experiment(cfg, threads);
  const std::string table = cuber::tabulate(summary.records);
  cuber::write_text(std::filesystem::path(cfg.out) / "summary.txt", table);
  std::cout << table;
  return 0;
}

int cmd_verify(std::size_t count, std::uint64_t seed, const std::string& out) {
  using namespace cuber::theory;
  nlohmann::json all = nlohmann::json::object();
  bool ok = true;
  for (SweepKind k : {SweepKind::thm2_part1, SweepKind::thm2_part2, SweepKind::thm1_nonconvex,
                      SweepKind::thm1_convex}) {
    const std::size_t n = k == SweepKind::thm2_part1 ? std::max<std::size_t>(count, 500) : count;
    const SweepSummary s = run_sweep(k, n, cuber::derive_seed(seed, {static_cast<std::uint64_t>(k)}));
    std::printf("%-20s accepted %4zu / %5zu attempts (%.3f)  conclusion holds %4zu / %4zu\n", sweep_name(k),
                s.accepted, s.attempts, s.acceptance_rate(), s.passed, s.accepted);
    if (k == SweepKind::thm2_part2) {
      std::size_t broke = 0;
      for (const auto& r : s.reports)
        if (r.measure("first_alignment_break") >= 0) ++broke;
      std::printf("%-20s alignment eventually breaks at step 1/H in %zu / %zu instances\n", "", broke, s.accepted);
    }
    if (k == SweepKind::thm1_convex) {
      std::size_t decrease = 0;
      for (const auto& r : s.reports)
        if (r.measure("sufficient_decrease") > 0) ++decrease;
      std::printf("%-20s F decreases monotonically in %zu / %zu instances\n", "", decrease, s.accepted);
    }
    ok = ok && s.all_passed();
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& r : s.reports) reps.push_back(report_json(r));
    all[sweep_name(k)] = {{"attempts", s.attempts}, {"accepted", s.accepted}, {"passed", s.passed},
                          {"reports", reps}};
  }
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw cuber::InvalidInput("cannot write " + out);
    f << all.dump(1) << "\n";
  }
  return ok ? 0 : 1;
}

int cmd_metrics(const std::string& dir, bool check) {
  const std::string fresh = cuber::recompute_metrics(dir);
  std::cout << fresh;
  if (!check) return 0;
  std::ifstream in(std::filesystem::path(dir) / "metrics.txt");
  const std::string stored((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (stored != fresh) {
    std::cerr << "metrics differ from " << dir << "/metrics.txt\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual learning with layer-wise backward transfer"};
  app.require_subcommand(1);

  std::string config, out;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> modes;
  std::size_t threads = 1;
  auto* run = app.add_subcommand("run", "run an experiment described by a config file");
  run->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seeds, "override seeds (repeatable)");
  run->add_option("--mode", modes, "override modes (repeatable)");
  run->add_option("--out", out, "override output directory");
  run->add_option("--threads", threads, "parallel (mode, seed) jobs")->check(CLI::PositiveNumber);

  std::size_t instances = 200;
  std::uint64_t theory_seed = 1;
  std::string report;
  auto* verify = app.add_subcommand("verify-theory", "sample two-task instances and check the update-rule theorems");
  verify->add_option("--instances", instances, "accepted instances per sweep")->check(CLI::PositiveNumber);
  verify->add_option("--seed", theory_seed, "sampling seed");
  verify->add_option("--out", report, "JSON report path");

  std::string run_dir;
  bool check = false;
  auto* metrics = app.add_subcommand("metrics", "recompute metrics from a run directory");
  metrics->add_option("dir", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  metrics->add_flag("--check", check, "exit 1 when the stored metrics differ");

  std::string root;
  auto* compare = app.add_subcommand("compare", "tabulate metrics of every run under a directory");
  compare->add_option("dir", root, "experiment output directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, seeds, modes, out, threads);
    if (*verify) return cmd_verify(instances, theory_seed, report);
    if (*metrics) return cmd_metrics(run_dir, check);
    if (*compare) {
      std::cout << cuber::tabulate(cuber::collect_records(root));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
