#include "qfl/records.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "qfl/error.hpp"

namespace qfl::records {

namespace {

using nlohmann::json;

// NaN losses (failed devices) serialize as null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

fed::StopReason reason_from(const std::string& s) {
  if (s == "none") return fed::StopReason::None;
  if (s == "converged") return fed::StopReason::Converged;
  if (s == "max_rounds") return fed::StopReason::MaxRounds;
  throw ParseError("unknown stop reason '" + s + "'");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

json to_json(const fed::RoundRecord& rec) {
  json devices = json::array();
  for (const auto& d : rec.devices) {
    json h = json::array();
    for (double v : d.stats.objective_history) h.push_back(number_or_null(v));
    devices.push_back({{"id", d.id},
                       {"loss", number_or_null(d.stats.loss)},
                       {"ref_loss", number_or_null(d.stats.ref_loss)},
                       {"maxiter", d.stats.maxiter_used},
                       {"evals", d.stats.evals},
                       {"regulated", d.stats.regulated},
                       {"failed", d.stats.failed},
                       {"diagnostic", d.stats.diagnostic},
                       {"kappa", number_or_null(d.stats.kappa)},
                       {"objective_history", std::move(h)}});
  }
  return {{"round", rec.round},
          {"global_loss", number_or_null(rec.global_loss)},
          {"selected_loss", number_or_null(rec.selected_loss)},
          {"global_train_loss", number_or_null(rec.global_train_loss)},
          {"global_val_loss", number_or_null(rec.global_val_loss)},
          {"selected", rec.selected},
          {"global_params", rec.global_params},
          {"terminated", rec.terminated},
          {"reason", fed::to_string(rec.reason)},
          {"devices", std::move(devices)}};
}

fed::RoundRecord from_json(const json& j) {
  fed::RoundRecord rec;
  rec.round = j.at("round").get<std::size_t>();
  rec.global_loss = number_from(j.at("global_loss"));
  rec.selected_loss = number_from(j.at("selected_loss"));
  rec.global_train_loss = number_from(j.at("global_train_loss"));
  rec.global_val_loss = number_from(j.at("global_val_loss"));
  rec.selected = j.at("selected").get<std::vector<int>>();
  rec.global_params = j.at("global_params").get<std::vector<double>>();
  rec.terminated = j.at("terminated").get<bool>();
  rec.reason = reason_from(j.at("reason").get<std::string>());
  for (const auto& d : j.at("devices")) {
    fed::DeviceRecord dr;
    dr.id = d.at("id").get<int>();
    dr.stats.loss = number_from(d.at("loss"));
    dr.stats.ref_loss = number_from(d.at("ref_loss"));
    dr.stats.maxiter_used = d.at("maxiter").get<std::size_t>();
    dr.stats.evals = d.at("evals").get<std::size_t>();
    dr.stats.regulated = d.at("regulated").get<bool>();
    dr.stats.failed = d.at("failed").get<bool>();
    dr.stats.diagnostic = d.at("diagnostic").get<std::string>();
    dr.stats.kappa = number_from(d.at("kappa"));
    for (const auto& v : d.at("objective_history")) dr.stats.objective_history.push_back(number_from(v));
    rec.devices.push_back(std::move(dr));
  }
  return rec;
}

std::string to_jsonl_line(const fed::RoundRecord& rec) { return to_json(rec).dump(); }

std::vector<fed::RoundRecord> parse_rounds(std::string_view text) {
  std::vector<fed::RoundRecord> out;
  std::istringstream lines{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError("rounds line " + std::to_string(line_no) + ": " + e.what(), line_no);
    } catch (const ParseError& e) {
      throw ParseError("rounds line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return out;
}

std::vector<fed::RoundRecord> load_rounds(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_rounds(buf.str());
}

void write_objective_csv(std::ostream& out, std::span<const fed::RoundRecord> rounds) {
  out << "round,device_id,eval_index,objective\n";
  for (const auto& r : rounds) {
    for (const auto& d : r.devices) {
      const auto& h = d.stats.objective_history;
      for (std::size_t i = 0; i < h.size(); ++i) {
        out << r.round << ',' << d.id << ',' << i << ',' << format_double(h[i]) << '\n';
      }
    }
  }
}

void write_maxiter_csv(std::ostream& out, std::span<const fed::RoundRecord> rounds) {
  out << "round,device_id,maxiter,evals,regulated,loss,ref_loss,failed\n";
  for (const auto& r : rounds) {
    for (const auto& d : r.devices) {
      out << r.round << ',' << d.id << ',' << d.stats.maxiter_used << ',' << d.stats.evals << ','
          << (d.stats.regulated ? 1 : 0) << ',' << format_double(d.stats.loss) << ','
          << format_double(d.stats.ref_loss) << ',' << (d.stats.failed ? 1 : 0) << '\n';
    }
  }
}

void write_selection_csv(std::ostream& out, std::span<const fed::RoundRecord> rounds) {
  out << "round,device_id\n";
  for (const auto& r : rounds) {
    for (int id : r.selected) out << r.round << ',' << id << '\n';
  }
}

void write_rounds_csv(std::ostream& out, std::span<const fed::RoundRecord> rounds) {
  out << "round,global_loss,selected_loss,global_train_loss,global_val_loss,evals,"
         "cumulative_evals,terminated,reason\n";
  std::size_t cumulative = 0;
  for (const auto& r : rounds) {
    cumulative += r.total_evals();
    out << r.round << ',' << format_double(r.global_loss) << ',' << format_double(r.selected_loss)
        << ',' << format_double(r.global_train_loss) << ',' << format_double(r.global_val_loss)
        << ',' << r.total_evals() << ',' << cumulative << ',' << (r.terminated ? 1 : 0) << ','
        << fed::to_string(r.reason) << '\n';
  }
}

RunSummary summarize(std::string run, std::string mode, unsigned long long seed,
                     std::span<const fed::RoundRecord> rounds, double threshold) {
  RunSummary s;
  s.run = std::move(run);
  s.mode = std::move(mode);
  s.seed = seed;
  s.rounds = rounds.size();
  s.threshold = threshold;
  s.reason = rounds.empty() ? "none" : fed::to_string(rounds.back().reason);
  if (!rounds.empty()) {
    s.final_train_loss = rounds.back().global_train_loss;
    s.final_selected_loss = rounds.back().selected_loss;
  }
  for (const auto& r : rounds) {
    s.total_evals += r.total_evals();
    if (!s.rounds_to_threshold && r.global_train_loss <= threshold) {
      s.rounds_to_threshold = r.round;
      s.evals_to_threshold = s.total_evals;
    }
  }
  return s;
}

void write_summary_csv(std::ostream& out, std::span<const RunSummary> rows) {
  out << "run,mode,seed,rounds,reason,final_train_loss,final_selected_loss,total_evals,threshold,"
         "rounds_to_threshold,evals_to_threshold\n";
  for (const auto& s : rows) {
    out << s.run << ',' << s.mode << ',' << s.seed << ',' << s.rounds << ',' << s.reason << ','
        << format_double(s.final_train_loss) << ',' << format_double(s.final_selected_loss) << ','
        << s.total_evals << ',' << format_double(s.threshold) << ',';
    if (s.rounds_to_threshold) out << *s.rounds_to_threshold;
    out << ',';
    if (s.evals_to_threshold) out << *s.evals_to_threshold;
    out << '\n';
  }
}

}  // namespace qfl::records
