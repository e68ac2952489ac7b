#pragma once

// Round record serialization (JSONL) and tidy CSV views derived from it.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qfl/fed.hpp"

namespace qfl::records {

/// Deterministic view of a record; wall_time is left out on purpose.
nlohmann::json to_json(const fed::RoundRecord& rec);
fed::RoundRecord from_json(const nlohmann::json& j);

/// One compact JSON line, no trailing newline.
std::string to_jsonl_line(const fed::RoundRecord& rec);

/// Throws ParseError with the offending line number.
std::vector<fed::RoundRecord> parse_rounds(std::string_view text);
std::vector<fed::RoundRecord> load_rounds(const std::filesystem::path& path);

/// round,device_id,eval_index,objective
void write_objective_csv(std::ostream& out, std::span<const fed::RoundRecord> rounds);
/// round,device_id,maxiter,evals,regulated,loss,ref_loss,failed
void write_maxiter_csv(std::ostream& out, std::span<const fed::RoundRecord> rounds);
/// round,device_id
void write_selection_csv(std::ostream& out, std::span<const fed::RoundRecord> rounds);
/// round,global_loss,selected_loss,global_train_loss,global_val_loss,evals,cumulative_evals,terminated,reason
void write_rounds_csv(std::ostream& out, std::span<const fed::RoundRecord> rounds);

struct RunSummary {
  std::string run;
  std::string mode;
  unsigned long long seed = 0;
  std::size_t rounds = 0;
  std::string reason;
  double final_train_loss = 0.0;
  double final_selected_loss = 0.0;
  std::size_t total_evals = 0;
  double threshold = 0.0;
  /// First 1-based round with global_train_loss <= threshold; nullopt if never.
  std::optional<std::size_t> rounds_to_threshold;
  std::optional<std::size_t> evals_to_threshold;
};

/// Summarizes one run against `threshold` on global_train_loss.
RunSummary summarize(std::string run, std::string mode, unsigned long long seed,
                     std::span<const fed::RoundRecord> rounds, double threshold);

/// run,mode,seed,rounds,reason,final_train_loss,final_selected_loss,total_evals,threshold,rounds_to_threshold,evals_to_threshold
void write_summary_csv(std::ostream& out, std::span<const RunSummary> rows);

/// Shortest round-trip decimal form of a double; "nan" / "inf" / "-inf" otherwise.
std::string format_double(double v);

}  // namespace qfl::records
