// qflsim: run federated experiments, verify the convergence claims, export CSVs.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qfl/commands.hpp"

int main(int argc, char** argv) {
  using namespace qfl::commands;

  CLI::App app{"Quantum federated learning simulator"};
  app.require_subcommand(1);

  RunOptions run;
  unsigned long long run_seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Run one federated experiment");
  run_cmd->add_option("--config", run.config, "Config file or name under configs/")->required();
  run_cmd->add_option("--override", run.overrides, "key=value, repeatable");
  auto* run_seed_opt = run_cmd->add_option("--seed", run_seed, "Overrides fed.seed");
  run_cmd->add_option("--out-dir", run.out_dir, "Run artifact directory");
  run_cmd->add_option("--search-dir", run.search_dir, "Directory holding configs/");

  VerifyOptions verify;
  unsigned long long verify_seed = 0;
  auto* verify_cmd = app.add_subcommand("verify-theory", "Check the convergence claims");
  verify_cmd->add_option("--config", verify.config, "Theory config file or name")
      ->default_val("theory");
  verify_cmd->add_option("--override", verify.overrides, "key=value, repeatable");
  auto* verify_seed_opt = verify_cmd->add_option("--seed", verify_seed, "Overrides theory.seed");
  std::string verify_dir;
  auto* verify_dir_opt = verify_cmd->add_option("--out-dir", verify_dir, "Directory for the report");
  verify_cmd->add_option("--report", verify.report, "Report path (wins over --out-dir)");
  verify_cmd->add_option("--search-dir", verify.search_dir, "Directory holding configs/");

  ExportOptions exp;
  std::string what = "curves";
  std::string export_dir;
  double threshold = 0.0;
  auto* export_cmd = app.add_subcommand("export", "Export tidy CSVs from run directories");
  export_cmd->add_option("run_dirs", exp.run_dirs, "Run directories")->required();
  export_cmd->add_option("--what", what, "curves or summary")
      ->check(CLI::IsMember({"curves", "summary"}));
  auto* export_dir_opt = export_cmd->add_option("--out-dir", export_dir, "Output directory");
  auto* threshold_opt =
      export_cmd->add_option("--threshold", threshold, "Training-loss threshold for summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  if (*run_cmd) {
    if (*run_seed_opt) run.seed = run_seed;
    return cmd_run(run, std::cout, std::cerr);
  }
  if (*verify_cmd) {
    if (*verify_seed_opt) verify.seed = verify_seed;
    if (*verify_dir_opt && verify_cmd->count("--report") == 0) {
      verify.report = std::filesystem::path(verify_dir) / "theory_report.json";
    }
    return cmd_verify_theory(verify, std::cout, std::cerr);
  }
  exp.what = what == "summary" ? ExportKind::Summary : ExportKind::Curves;
  if (*export_dir_opt) exp.out_dir = export_dir;
  if (*threshold_opt) exp.threshold = threshold;
  return cmd_export(exp, std::cout, std::cerr);
}
