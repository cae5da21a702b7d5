#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "isf/fusion.hpp"

namespace isf {

/// Flat `key = value` settings; '#' starts a comment, blank lines are ignored.
using Settings = std::map<std::string, std::string>;

/// Throws ParseError on a line without '=' or with an empty key, or on a
/// repeated key.
Settings parse_settings(std::string_view text, const std::string& source);
Settings load_settings(const std::filesystem::path& path);

/// For every key in `keys`, an environment variable <prefix><KEY> (upper
/// case, '-' as '_') replaces the value. Returns the keys that were replaced.
std::vector<std::string> apply_env_overrides(Settings& settings, const std::vector<std::string>& keys,
                                             std::string_view prefix = "ISF_");

inline const std::vector<std::string>& fusion_keys() {
  static const std::vector<std::string> keys{"alpha", "beta", "gamma", "beam", "interval",
                                             "limit", "post", "per_parent_first_prune"};
  return keys;
}

/// Updates `config` from the fusion keys in `settings`. Keys outside
/// fusion_keys() and `extra` are rejected with ConfigError. "inf" disables
/// interval/limit; post and per_parent_first_prune take on/off/true/false/1/0.
void apply_fusion_settings(FusionConfig& config, const Settings& settings,
                           const std::set<std::string>& extra = {});

Settings fusion_settings(const FusionConfig& config);

/// Non-negative integer or "inf".
std::optional<std::size_t> parse_count_or_inf(std::string_view text, std::string_view key);
bool parse_switch(std::string_view text, std::string_view key);

/// INI-style file: leading global `key = value` lines, then `[name]`
/// sections holding their own settings, in file order.
struct SpecFile {
  Settings global;
  std::vector<std::pair<std::string, Settings>> sections;
};

SpecFile parse_spec_file(std::string_view text, const std::string& source);
SpecFile load_spec_file(const std::filesystem::path& path);

}  // namespace isf
