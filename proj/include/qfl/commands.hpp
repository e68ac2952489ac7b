#pragma once

// Subcommand bodies behind the qflsim CLI. Each returns a process exit code
// and reports problems on `err`.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qfl::commands {

inline constexpr int kExitOk = 0;
/// The run or a check failed.
inline constexpr int kExitFailure = 1;
/// Bad configuration, arguments or inputs.
inline constexpr int kExitUsage = 2;

/// Written into every manifest.
const char* code_version();

/// Artifact names inside a run directory.
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kRoundsFile = "rounds.jsonl";
inline constexpr const char* kObjectiveFile = "objective_history.csv";
inline constexpr const char* kTimingsFile = "timings.jsonl";

struct RunOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<unsigned long long> seed;
  std::filesystem::path out_dir = "run";
  /// Where configs/<name>.cfg is looked up.
  std::filesystem::path search_dir = ".";
};

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

struct VerifyOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<unsigned long long> seed;
  std::filesystem::path report = "theory_report.json";
  std::filesystem::path search_dir = ".";
};

/// Exit 0 iff every claim passes.
int cmd_verify_theory(const VerifyOptions& options, std::ostream& out, std::ostream& err);

enum class ExportKind { Curves, Summary };

struct ExportOptions {
  std::vector<std::filesystem::path> run_dirs;
  ExportKind what = ExportKind::Curves;
  /// Defaults to the (first) run directory.
  std::optional<std::filesystem::path> out_dir;
  /// Loss threshold for the summary; defaults to the largest final
  /// global training loss across the runs, so every run reaches it.
  std::optional<double> threshold;
};

/// Curves: curves.csv, maxiter.csv, selection.csv, rounds.csv per run.
/// Summary: summary.csv with one row per run.
int cmd_export(const ExportOptions& options, std::ostream& out, std::ostream& err);

}  // namespace qfl::commands
