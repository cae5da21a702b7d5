#include "isf/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "isf/common.hpp"
#include "isf/text_io.hpp"

namespace isf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view strip_comment(std::string_view line) {
  const auto hash = line.find('#');
  return hash == std::string_view::npos ? line : line.substr(0, hash);
}

void add_setting(Settings& out, std::string_view line, const std::string& source, std::size_t lineno) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) throw ParseError(source, lineno, "expected 'key = value'");
  const auto key = std::string(trim(line.substr(0, eq)));
  if (key.empty()) throw ParseError(source, lineno, "empty key");
  if (!out.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
    throw ParseError(source, lineno, "duplicate key '" + key + "'");
  }
}

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = text.substr(0, nl);
    fn(trim(strip_comment(line)), ++lineno);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

double parse_weight(const std::string& value, std::string_view key) {
  try {
    return parse_double(value);
  } catch (const std::exception&) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + value + "'");
  }
}

}  // namespace

Settings parse_settings(std::string_view text, const std::string& source) {
  Settings out;
  for_each_line(text, [&](std::string_view line, std::size_t lineno) {
    if (!line.empty()) add_setting(out, line, source, lineno);
  });
  return out;
}

Settings load_settings(const std::filesystem::path& path) {
  return parse_settings(read_file(path), path.string());
}

std::vector<std::string> apply_env_overrides(Settings& settings, const std::vector<std::string>& keys,
                                             std::string_view prefix) {
  std::vector<std::string> applied;
  for (const auto& key : keys) {
    std::string var(prefix);
    for (char c : key) var += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const char* v = std::getenv(var.c_str())) {
      settings[key] = std::string(trim(v));
      applied.push_back(var);
    }
  }
  return applied;
}

std::optional<std::size_t> parse_count_or_inf(std::string_view text, std::string_view key) {
  if (text == "inf" || text == "none") return std::nullopt;
  try {
    const auto v = parse_int(text);
    if (v < 0) throw std::invalid_argument("negative");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer or 'inf', got '" +
                      std::string(text) + "'");
  }
}

bool parse_switch(std::string_view text, std::string_view key) {
  if (text == "on" || text == "true" || text == "1" || text == "yes") return true;
  if (text == "off" || text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(std::string(key) + ": expected on/off, got '" + std::string(text) + "'");
}

void apply_fusion_settings(FusionConfig& config, const Settings& settings,
                           const std::set<std::string>& extra) {
  const auto& known = fusion_keys();
  for (const auto& [key, value] : settings) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      if (extra.count(key)) continue;
      throw ConfigError("unknown setting '" + key + "'");
    }
    if (key == "alpha") {
      config.alpha = parse_weight(value, key);
    } else if (key == "beta") {
      config.beta = parse_weight(value, key);
    } else if (key == "gamma") {
      config.gamma = parse_weight(value, key);
    } else if (key == "beam") {
      auto b = parse_count_or_inf(value, key);
      if (!b) throw ConfigError("beam must be finite");
      config.beam = *b;
    } else if (key == "interval") {
      config.interval = parse_count_or_inf(value, key);
    } else if (key == "limit") {
      config.limit = parse_count_or_inf(value, key);
    } else if (key == "post") {
      config.post_processing = parse_switch(value, key);
    } else if (key == "per_parent_first_prune") {
      config.per_parent_first_prune = parse_switch(value, key);
    }
  }
  config.validate();
}

Settings fusion_settings(const FusionConfig& c) {
  auto count = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string("inf"); };
  return {{"alpha", format_double(c.alpha)},
          {"beta", format_double(c.beta)},
          {"gamma", format_double(c.gamma)},
          {"beam", std::to_string(c.beam)},
          {"interval", count(c.interval)},
          {"limit", count(c.limit)},
          {"post", c.post_processing ? "on" : "off"},
          {"per_parent_first_prune", c.per_parent_first_prune ? "on" : "off"}};
}

SpecFile parse_spec_file(std::string_view text, const std::string& source) {
  SpecFile out;
  Settings* current = &out.global;
  for_each_line(text, [&](std::string_view line, std::size_t lineno) {
    if (line.empty()) return;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ParseError(source, lineno, "malformed section header");
      auto name = std::string(trim(line.substr(1, line.size() - 2)));
      for (const auto& [existing, _] : out.sections) {
        if (existing == name) throw ParseError(source, lineno, "duplicate section '" + name + "'");
      }
      out.sections.emplace_back(std::move(name), Settings{});
      current = &out.sections.back().second;
      return;
    }
    add_setting(*current, line, source, lineno);
  });
  return out;
}

SpecFile load_spec_file(const std::filesystem::path& path) {
  return parse_spec_file(read_file(path), path.string());
}

}  // namespace isf
