#include "qfl/commands.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qfl/config.hpp"
#include "qfl/error.hpp"
#include "qfl/records.hpp"

#ifndef QFL_VERSION
#define QFL_VERSION "0.0.0"
#endif

namespace qfl::commands {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ordered_json entries_json(const config::Entries& entries) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : entries) j[k] = v;
  return j;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

// Writes the file in one go and reports failure instead of leaving it half done.
void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

struct RunArtifacts {
  json manifest;
  std::vector<fed::RoundRecord> rounds;
};

RunArtifacts read_run(const fs::path& dir) {
  const auto manifest_path = dir / kManifestFile;
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw ParseError("missing manifest '" + manifest_path.string() + "'");
  RunArtifacts a;
  try {
    a.manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("malformed manifest '" + manifest_path.string() + "': " + e.what());
  }
  a.rounds = records::load_rounds(dir / kRoundsFile);
  return a;
}

std::string run_name(const fs::path& dir) {
  auto p = dir;
  if (!p.has_filename()) p = p.parent_path();
  return p.filename().string();
}

}  // namespace

const char* code_version() { return QFL_VERSION; }

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  fed::FedConfig cfg;
  fs::path config_path;
  try {
    config_path = config::resolve_config_path(options.config, options.search_dir);
    std::vector<std::string> overrides = options.overrides;
    if (options.seed) overrides.push_back("fed.seed=" + std::to_string(*options.seed));
    cfg = config::load_fed_config(config_path, overrides);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  }

  const fs::path dir = options.out_dir;
  std::ofstream rounds_out;
  std::ofstream objective_out;
  std::ofstream timings_out;
  try {
    fs::create_directories(dir);
    const auto entries = config::snapshot(cfg);
    ordered_json manifest;
    manifest["code_version"] = code_version();
    manifest["config_path"] = config_path.string();
    manifest["overrides"] = options.overrides;
    manifest["seed"] = cfg.seed;
    manifest["mode"] = fed::to_string(cfg.mode);
    manifest["config"] = entries_json(entries);
    manifest["started_at"] = utc_now();
    manifest["outputs"] = {{"rounds", kRoundsFile},
                           {"objective_history", kObjectiveFile},
                           {"timings", kTimingsFile}};
    write_text(dir / kManifestFile, manifest.dump(2) + "\n");
    rounds_out = open_out(dir / kRoundsFile);
    objective_out = open_out(dir / kObjectiveFile);
    timings_out = open_out(dir / kTimingsFile);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }

  objective_out << "round,device_id,eval_index,objective\n";
  auto sink = [&](const fed::RoundRecord& rec) {
    rounds_out << records::to_jsonl_line(rec) << '\n';
    rounds_out.flush();
    const fed::RoundRecord* one = &rec;
    std::ostringstream rows;
    records::write_objective_csv(rows, std::span(one, 1));
    const std::string text = rows.str();
    objective_out << text.substr(text.find('\n') + 1);
    objective_out.flush();
    timings_out << json{{"round", rec.round}, {"wall_time", rec.wall_time}}.dump() << '\n';
    timings_out.flush();
    out << "round " << rec.round << ": selected_loss=" << records::format_double(rec.selected_loss)
        << " global_loss=" << records::format_double(rec.global_loss)
        << " evals=" << rec.total_evals() << " max_maxiter=" << rec.max_maxiter()
        << (rec.terminated ? std::string(" stop=") + fed::to_string(rec.reason) : "") << '\n';
  };

  const auto started = std::chrono::steady_clock::now();
  auto finish = [&](const std::string& status, const std::string& message) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    timings_out << json{{"event", "end"},
                        {"finished_at", utc_now()},
                        {"wall_time", wall},
                        {"status", status},
                        {"message", message}}
                       .dump()
                << '\n';
    timings_out.flush();
  };

  try {
    const auto result = fed::run_experiment(cfg, sink);
    if (result.status == fed::RunStatus::Aborted) {
      finish("aborted", result.message);
      err << "run aborted: " << result.message << '\n';
      return kExitFailure;
    }
    finish("completed", "");
  } catch (const std::exception& e) {
    finish("failed", e.what());
    err << "run failed: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_verify_theory(const VerifyOptions& options, std::ostream& out, std::ostream& err) {
  theory::TheoryConfig cfg;
  try {
    const auto path = config::resolve_config_path(options.config, options.search_dir);
    std::vector<std::string> overrides = options.overrides;
    if (options.seed) overrides.push_back("theory.seed=" + std::to_string(*options.seed));
    cfg = config::load_theory_config(path, overrides);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  }

  // Fail before the campaign if the report cannot be written.
  std::ofstream report_out(options.report, std::ios::binary | std::ios::trunc);
  if (!report_out) {
    err << "error: cannot write report '" << options.report.string() << "'\n";
    return kExitUsage;
  }

  theory::VerificationReport report;
  try {
    report = theory::verify_theory(cfg);
  } catch (const std::exception& e) {
    err << "verification failed: " << e.what() << '\n';
    return kExitFailure;
  }
  json j = report.to_json();
  j["code_version"] = code_version();
  j["config"] = entries_json(config::snapshot(cfg));
  report_out << j.dump(2) << '\n';
  report_out.flush();
  if (!report_out) {
    err << "error: write failed for '" << options.report.string() << "'\n";
    return kExitFailure;
  }
  for (const auto& c : report.claims) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << '\n';
  }
  return report.all_passed() ? kExitOk : kExitFailure;
}

int cmd_export(const ExportOptions& options, std::ostream& out, std::ostream& err) {
  if (options.run_dirs.empty()) {
    err << "error: export needs at least one run directory\n";
    return kExitUsage;
  }
  std::vector<RunArtifacts> runs;
  try {
    for (const auto& dir : options.run_dirs) runs.push_back(read_run(dir));
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (options.what == ExportKind::Curves) {
      for (std::size_t i = 0; i < runs.size(); ++i) {
        fs::path dir = options.run_dirs[i];
        if (options.out_dir) {
          dir = runs.size() == 1 ? *options.out_dir : *options.out_dir / run_name(options.run_dirs[i]);
        }
        fs::create_directories(dir);
        const auto& r = runs[i].rounds;
        std::ostringstream curves, maxiter, selection, rounds;
        records::write_objective_csv(curves, r);
        records::write_maxiter_csv(maxiter, r);
        records::write_selection_csv(selection, r);
        records::write_rounds_csv(rounds, r);
        write_text(dir / "curves.csv", curves.str());
        write_text(dir / "maxiter.csv", maxiter.str());
        write_text(dir / "selection.csv", selection.str());
        write_text(dir / "rounds.csv", rounds.str());
        out << "wrote curves for " << run_name(options.run_dirs[i]) << " to " << dir.string() << '\n';
      }
      return kExitOk;
    }

    double threshold = 0.0;
    if (options.threshold) {
      threshold = *options.threshold;
    } else {
      for (const auto& r : runs) {
        if (!r.rounds.empty()) threshold = std::max(threshold, r.rounds.back().global_train_loss);
      }
    }
    std::vector<records::RunSummary> rows;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& m = runs[i].manifest;
      rows.push_back(records::summarize(run_name(options.run_dirs[i]), m.value("mode", ""),
                                        m.value("seed", 0ULL), runs[i].rounds, threshold));
    }
    const fs::path dir = options.out_dir.value_or(options.run_dirs.front());
    fs::create_directories(dir);
    std::ostringstream csv;
    records::write_summary_csv(csv, rows);
    write_text(dir / "summary.csv", csv.str());
    out << "wrote " << (dir / "summary.csv").string() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace qfl::commands
