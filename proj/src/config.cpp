#include "qfl/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "qfl/error.hpp"
#include "qfl/records.hpp"

namespace qfl::config {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

double to_double(const std::string& key, const std::string& v) {
  if (lower(v) == "pi") return std::numbers::pi;
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  return out;
}

template <typename E>
E to_enum(const std::string& key, const std::string& v,
          std::initializer_list<std::pair<const char*, E>> names) {
  const std::string l = lower(v);
  std::string options;
  for (const auto& [name, value] : names) {
    if (l == name) return value;
    options += options.empty() ? name : std::string("|") + name;
  }
  throw ConfigError(key, "expected one of " + options + ", got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string l = lower(v);
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw ConfigError(key, "expected a comma-separated list");
  return out;
}

std::string num(double v) { return records::format_double(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }

template <typename C>
struct Field {
  std::string key;
  std::function<void(C&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const C&)> get;
};

#define QFL_SIZE(C, KEY, MEMBER)                                                                \
  Field<C> {                                                                                   \
    KEY, [](C& c, const std::string& k, const std::string& v) { c.MEMBER = to_size(k, v); },   \
        [](const C& c) { return num(static_cast<std::uint64_t>(c.MEMBER)); }                   \
  }
#define QFL_U64(C, KEY, MEMBER)                                                                 \
  Field<C> {                                                                                   \
    KEY, [](C& c, const std::string& k, const std::string& v) { c.MEMBER = to_u64(k, v); },    \
        [](const C& c) { return num(static_cast<std::uint64_t>(c.MEMBER)); }                   \
  }
#define QFL_DOUBLE(C, KEY, MEMBER)                                                              \
  Field<C> {                                                                                   \
    KEY, [](C& c, const std::string& k, const std::string& v) { c.MEMBER = to_double(k, v); }, \
        [](const C& c) { return num(c.MEMBER); }                                               \
  }
#define QFL_BOOL(C, KEY, MEMBER)                                                               \
  Field<C> {                                                                                  \
    KEY, [](C& c, const std::string& k, const std::string& v) { c.MEMBER = to_bool(k, v); },  \
        [](const C& c) { return std::string(c.MEMBER ? "true" : "false"); }                   \
  }
#define QFL_STRING(C, KEY, MEMBER)                                                  \
  Field<C> {                                                                       \
    KEY, [](C& c, const std::string&, const std::string& v) { c.MEMBER = v; },     \
        [](const C& c) { return std::string(c.MEMBER); }                           \
  }
#define QFL_PATH(C, KEY, MEMBER)                                                 \
  Field<C> {                                                                    \
    KEY, [](C& c, const std::string&, const std::string& v) { c.MEMBER = v; },  \
        [](const C& c) { return c.MEMBER.string(); }                            \
  }

using fed::FedConfig;
using theory::TheoryConfig;

const std::vector<Field<FedConfig>>& fed_fields() {
  using dfo::RegulationKind;
  using qmodels::AnsatzKind;
  using qmodels::Interpreter;
  static const std::vector<Field<FedConfig>> fields = {
      {"fed.mode",
       [](FedConfig& c, const std::string& k, const std::string& v) {
         c.mode = to_enum<fed::Mode>(k, v, {{"baseline", fed::Mode::Baseline},
                                            {"llmqfl", fed::Mode::LlmQfl}});
       },
       [](const FedConfig& c) { return std::string(fed::to_string(c.mode)); }},
      QFL_SIZE(FedConfig, "fed.num_devices", num_devices),
      QFL_SIZE(FedConfig, "fed.rounds", rounds),
      QFL_SIZE(FedConfig, "fed.init_maxiter", init_maxiter),
      QFL_SIZE(FedConfig, "fed.cap", cap),
      QFL_DOUBLE(FedConfig, "fed.selection_fraction", selection_fraction),
      QFL_DOUBLE(FedConfig, "fed.epsilon", epsilon),
      QFL_DOUBLE(FedConfig, "fed.lambda", lambda),
      QFL_SIZE(FedConfig, "fed.probe_size", probe_size),
      {"fed.aggregation",
       [](FedConfig& c, const std::string& k, const std::string& v) {
         c.aggregation = to_enum<fed::AggregationMode>(
             k, v, {{"weighted_mean", fed::AggregationMode::WeightedMean},
                    {"selected_mean", fed::AggregationMode::SelectedMean}});
       },
       [](const FedConfig& c) { return std::string(fed::to_string(c.aggregation)); }},
      QFL_U64(FedConfig, "fed.seed", seed),
      QFL_SIZE(FedConfig, "fed.threads", threads),
      QFL_DOUBLE(FedConfig, "fed.regularization_mu", regularization_mu),
      QFL_DOUBLE(FedConfig, "fed.init_scale", init_scale),
      {"strategy.kind",
       [](FedConfig& c, const std::string& k, const std::string& v) {
         c.strategy.kind = to_enum<RegulationKind>(
             k, v, {{"adaptive", RegulationKind::Adaptive},
                    {"incremental", RegulationKind::Incremental},
                    {"logarithmic", RegulationKind::Logarithmic},
                    {"dynamic_weighted", RegulationKind::DynamicWeighted}});
       },
       [](const FedConfig& c) { return std::string(dfo::to_string(c.strategy.kind)); }},
      QFL_SIZE(FedConfig, "strategy.step", strategy.step),
      QFL_DOUBLE(FedConfig, "strategy.beta", strategy.beta),
      // model.kind resets the interpreter to the kind's default, so it is
      // applied before model.interpreter.
      {"model.kind",
       [](FedConfig& c, const std::string& k, const std::string& v) {
         c.model.ansatz.kind = to_enum<AnsatzKind>(
             k, v, {{"vqc", AnsatzKind::RealAmplitudes}, {"qcnn", AnsatzKind::QcnnStack}});
         c.model.interpreter = c.model.ansatz.kind == AnsatzKind::QcnnStack
                                   ? Interpreter::LastQubit
                                   : Interpreter::ParityOfAllBits;
       },
       [](const FedConfig& c) {
         return std::string(c.model.ansatz.kind == AnsatzKind::QcnnStack ? "qcnn" : "vqc");
       }},
      {"model.num_qubits",
       [](FedConfig& c, const std::string& k, const std::string& v) {
         c.model.ansatz.num_qubits = to_size(k, v);
         c.model.feature_map.num_features = c.model.ansatz.num_qubits;
       },
       [](const FedConfig& c) { return num(static_cast<std::uint64_t>(c.model.num_qubits())); }},
      QFL_SIZE(FedConfig, "model.feature_reps", model.feature_map.reps),
      QFL_SIZE(FedConfig, "model.ansatz_reps", model.ansatz.reps),
      QFL_U64(FedConfig, "model.shots", model.shots),
      {"model.interpreter",
       [](FedConfig& c, const std::string& k, const std::string& v) {
         c.model.interpreter = to_enum<Interpreter>(
             k, v, {{"parity", Interpreter::ParityOfAllBits}, {"last_qubit", Interpreter::LastQubit}});
       },
       [](const FedConfig& c) {
         return std::string(c.model.interpreter == Interpreter::LastQubit ? "last_qubit" : "parity");
       }},
      QFL_DOUBLE(FedConfig, "model.depolarizing_prob", depolarizing_prob),
      {"optimizer.method",
       [](FedConfig& c, const std::string& k, const std::string& v) {
         c.method = to_enum<dfo::Method>(
             k, v, {{"nelder_mead", dfo::Method::NelderMead}, {"spsa", dfo::Method::SPSA}});
       },
       [](const FedConfig& c) { return std::string(dfo::to_string(c.method)); }},
      QFL_DOUBLE(FedConfig, "optimizer.nm_initial_step", optimizer.nelder_mead.initial_step),
      QFL_DOUBLE(FedConfig, "optimizer.nm_reflection", optimizer.nelder_mead.reflection),
      QFL_DOUBLE(FedConfig, "optimizer.nm_expansion", optimizer.nelder_mead.expansion),
      QFL_DOUBLE(FedConfig, "optimizer.nm_contraction", optimizer.nelder_mead.contraction),
      QFL_DOUBLE(FedConfig, "optimizer.nm_shrink", optimizer.nelder_mead.shrink),
      QFL_BOOL(FedConfig, "optimizer.nm_adaptive", optimizer.nelder_mead.adaptive),
      QFL_DOUBLE(FedConfig, "optimizer.spsa_a", optimizer.spsa.a),
      QFL_DOUBLE(FedConfig, "optimizer.spsa_c", optimizer.spsa.c),
      QFL_DOUBLE(FedConfig, "optimizer.spsa_alpha", optimizer.spsa.alpha),
      QFL_DOUBLE(FedConfig, "optimizer.spsa_gamma", optimizer.spsa.gamma),
      QFL_DOUBLE(FedConfig, "optimizer.spsa_stability", optimizer.spsa.stability),
      {"ref.kind",
       [](FedConfig& c, const std::string& k, const std::string& v) {
         c.ref_kind = to_enum<fed::RefKind>(k, v, {{"classical", fed::RefKind::ClassicalBaseline},
                                                   {"replay", fed::RefKind::Replay}});
       },
       [](const FedConfig& c) {
         return std::string(c.ref_kind == fed::RefKind::Replay ? "replay" : "classical");
       }},
      QFL_PATH(FedConfig, "ref.replay_path", replay_path),
      QFL_SIZE(FedConfig, "ref.epochs", ref_train.epochs),
      QFL_DOUBLE(FedConfig, "ref.learning_rate", ref_train.learning_rate),
      {"data.source",
       [](FedConfig& c, const std::string& k, const std::string& v) {
         c.data.source = to_enum<fed::DataSource>(
             k, v, {{"synthetic", fed::DataSource::Synthetic}, {"csv", fed::DataSource::Csv}});
       },
       [](const FedConfig& c) {
         return std::string(c.data.source == fed::DataSource::Csv ? "csv" : "synthetic");
       }},
      QFL_PATH(FedConfig, "data.csv_path", data.csv_path),
      QFL_SIZE(FedConfig, "data.samples_per_device", data.samples_per_device),
      QFL_SIZE(FedConfig, "data.server_samples", data.server_samples),
      QFL_DOUBLE(FedConfig, "data.test_fraction", data.test_fraction),
      QFL_SIZE(FedConfig, "data.seq_length", data.seq_length),
      QFL_STRING(FedConfig, "data.motif0", data.motif0),
      QFL_STRING(FedConfig, "data.motif1", data.motif1),
      QFL_DOUBLE(FedConfig, "data.motif_noise", data.motif_noise),
      QFL_DOUBLE(FedConfig, "data.scale_lo", data.scale_lo),
      QFL_DOUBLE(FedConfig, "data.scale_hi", data.scale_hi),
  };
  return fields;
}

const std::vector<Field<TheoryConfig>>& theory_fields() {
  static const std::vector<Field<TheoryConfig>> fields = {
      QFL_U64(TheoryConfig, "theory.seed", seed),
      QFL_SIZE(TheoryConfig, "fit.clients", fit_clients),
      QFL_SIZE(TheoryConfig, "fit.dim", fit_dim),
      QFL_DOUBLE(TheoryConfig, "fit.mu", fit_mu),
      QFL_DOUBLE(TheoryConfig, "fit.L", fit_L),
      QFL_DOUBLE(TheoryConfig, "fit.heterogeneity", fit_heterogeneity),
      QFL_SIZE(TheoryConfig, "fit.rounds", fit_rounds),
      QFL_SIZE(TheoryConfig, "fit.local_steps", fit_local_steps),
      QFL_DOUBLE(TheoryConfig, "fit.gradient_noise", fit_gradient_noise),
      QFL_DOUBLE(TheoryConfig, "fit.initial_distance", fit_initial_distance),
      QFL_SIZE(TheoryConfig, "fit.trials", fit_trials),
      QFL_DOUBLE(TheoryConfig, "fit.slope_lo", fit_slope_lo),
      QFL_DOUBLE(TheoryConfig, "fit.slope_hi", fit_slope_hi),
      QFL_DOUBLE(TheoryConfig, "fit.min_r2", fit_min_r2),
      QFL_SIZE(TheoryConfig, "variance.clients", variance_clients),
      {"variance.fractions",
       [](TheoryConfig& c, const std::string& k, const std::string& v) {
         c.variance_fractions = to_list(k, v);
       },
       [](const TheoryConfig& c) {
         std::string out;
         for (double f : c.variance_fractions) out += (out.empty() ? "" : ",") + num(f);
         return out;
       }},
      QFL_SIZE(TheoryConfig, "variance.instances", variance_instances),
      QFL_DOUBLE(TheoryConfig, "variance.slack", variance_slack),
      QFL_SIZE(TheoryConfig, "minimality.instances", minimality_instances),
      QFL_SIZE(TheoryConfig, "minimality.max_clients", minimality_max_clients),
      QFL_SIZE(TheoryConfig, "efficiency.trials", efficiency_trials),
      QFL_SIZE(TheoryConfig, "efficiency.clients", efficiency_clients),
      QFL_SIZE(TheoryConfig, "efficiency.dim", efficiency_dim),
      QFL_DOUBLE(TheoryConfig, "efficiency.heterogeneity", efficiency_heterogeneity),
      QFL_SIZE(TheoryConfig, "efficiency.rounds", efficiency_rounds),
      QFL_SIZE(TheoryConfig, "efficiency.local_steps", efficiency_local_steps),
      QFL_SIZE(TheoryConfig, "efficiency.step_cap", efficiency_step_cap),
      QFL_DOUBLE(TheoryConfig, "efficiency.gradient_noise", efficiency_gradient_noise),
      QFL_DOUBLE(TheoryConfig, "efficiency.threshold_fraction", efficiency_threshold_fraction),
      QFL_DOUBLE(TheoryConfig, "efficiency.pass_rate", efficiency_pass_rate),
  };
  return fields;
}

#undef QFL_SIZE
#undef QFL_U64
#undef QFL_DOUBLE
#undef QFL_BOOL
#undef QFL_STRING
#undef QFL_PATH

template <typename C>
std::vector<std::string> keys_of(const std::vector<Field<C>>& fields) {
  std::vector<std::string> out;
  for (const auto& f : fields) out.push_back(f.key);
  return out;
}

template <typename C>
C build(const std::vector<Field<C>>& fields, const std::vector<std::string>& known,
        const Entries& entries) {
  std::map<std::string, std::string> last;
  for (const auto& [k, v] : entries) last[resolve_key(k, known)] = v;
  C cfg;
  for (const auto& f : fields) {
    if (auto it = last.find(f.key); it != last.end()) f.set(cfg, f.key, it->second);
  }
  return cfg;
}

template <typename C>
Entries snapshot_of(const std::vector<Field<C>>& fields, const C& cfg) {
  Entries out;
  for (const auto& f : fields) out.emplace_back(f.key, f.get(cfg));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Entries with_overrides(const std::filesystem::path& path, std::span<const std::string> overrides) {
  Entries entries = parse_key_values(read_file(path));
  for (const auto& o : overrides) entries.push_back(parse_override(o));
  return entries;
}

}  // namespace

Entries parse_key_values(std::string_view text) {
  Entries out;
  std::istringstream lines{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected 'key = value'",
                       line_no);
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) {
      throw ParseError("config line " + std::to_string(line_no) + ": empty key", line_no, 0);
    }
    out.emplace_back(std::move(key), trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

Entry parse_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || trim(text.substr(0, eq)).empty()) {
    throw ConfigError(std::string(text), "override must look like key=value");
  }
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

const std::vector<std::string>& fed_keys() {
  static const auto keys = keys_of(fed_fields());
  return keys;
}

const std::vector<std::string>& theory_keys() {
  static const auto keys = keys_of(theory_fields());
  return keys;
}

std::string resolve_key(std::string_view key, std::span<const std::string> known) {
  const std::string k(key);
  if (std::find(known.begin(), known.end(), k) != known.end()) return k;
  std::vector<std::string> hits;
  for (const auto& full : known) {
    const auto dot = full.rfind('.');
    if (dot != std::string::npos && full.compare(dot + 1, std::string::npos, k) == 0) {
      hits.push_back(full);
    }
  }
  if (hits.size() == 1) return hits.front();
  if (hits.empty()) throw ConfigError(k, "unknown configuration key");
  std::string list;
  for (const auto& h : hits) list += (list.empty() ? "" : ", ") + h;
  throw ConfigError(k, "ambiguous key; use one of " + list);
}

fed::FedConfig make_fed_config(const Entries& entries) {
  return build(fed_fields(), fed_keys(), entries);
}

theory::TheoryConfig make_theory_config(const Entries& entries) {
  return build(theory_fields(), theory_keys(), entries);
}

Entries snapshot(const fed::FedConfig& cfg) { return snapshot_of(fed_fields(), cfg); }
Entries snapshot(const theory::TheoryConfig& cfg) { return snapshot_of(theory_fields(), cfg); }

std::string to_text(const Entries& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

std::filesystem::path resolve_config_path(const std::string& name,
                                          const std::filesystem::path& search_dir) {
  const std::filesystem::path direct(name);
  if (std::filesystem::exists(direct)) return direct;
  const auto candidate = search_dir / "configs" / (name + ".cfg");
  if (std::filesystem::exists(candidate)) return candidate;
  throw ConfigError("config", "no config file '" + name + "' (also tried " + candidate.string() + ")");
}

fed::FedConfig load_fed_config(const std::filesystem::path& path,
                               std::span<const std::string> overrides) {
  auto cfg = make_fed_config(with_overrides(path, overrides));
  cfg.validate();
  return cfg;
}

theory::TheoryConfig load_theory_config(const std::filesystem::path& path,
                                        std::span<const std::string> overrides) {
  auto cfg = make_theory_config(with_overrides(path, overrides));
  cfg.validate();
  return cfg;
}

}  // namespace qfl::config
