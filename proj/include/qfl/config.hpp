#pragma once

// Flat `section.key = value` configuration text. Lines starting with `#` are
// comments. Every FedConfig and TheoryConfig field has a key; overrides may
// name a key in full or by its leaf when the leaf is unambiguous.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qfl/fed.hpp"
#include "qfl/theory.hpp"

namespace qfl::config {

using Entry = std::pair<std::string, std::string>;
using Entries = std::vector<Entry>;

/// Throws ParseError naming the line for anything that is not `key = value`.
Entries parse_key_values(std::string_view text);

/// Splits `key=value`; throws ConfigError on a missing '='.
Entry parse_override(std::string_view text);

/// Every key FedConfig understands, in canonical order.
const std::vector<std::string>& fed_keys();
const std::vector<std::string>& theory_keys();

/// Maps a full key or a unique leaf to its full key; throws ConfigError
/// naming the key when it is unknown or ambiguous.
std::string resolve_key(std::string_view key, std::span<const std::string> known);

/// Applies entries in canonical key order, later duplicates winning. Unknown
/// keys and malformed values throw ConfigError.
fed::FedConfig make_fed_config(const Entries& entries);
theory::TheoryConfig make_theory_config(const Entries& entries);

/// Full snapshot in canonical key order; make_*_config round-trips it.
Entries snapshot(const fed::FedConfig& cfg);
Entries snapshot(const theory::TheoryConfig& cfg);

std::string to_text(const Entries& entries);

/// `name` as a path if it exists, otherwise configs/<name>.cfg under `search_dir`.
std::filesystem::path resolve_config_path(const std::string& name,
                                          const std::filesystem::path& search_dir);

/// Reads the file, appends `overrides` (`key=value`), and builds the config.
fed::FedConfig load_fed_config(const std::filesystem::path& path,
                               std::span<const std::string> overrides);
theory::TheoryConfig load_theory_config(const std::filesystem::path& path,
                                        std::span<const std::string> overrides);

}  // namespace qfl::config
