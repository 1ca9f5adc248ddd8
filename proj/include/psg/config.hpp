#pragma once

#include "psg/engine.hpp"

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace psg {

/// Bad configuration input. The CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ConfigEntry {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

struct ConfigSection {
    std::string name;
    std::vector<ConfigEntry> entries;
};

/// Line-oriented `key = value` text with one level of `[section]` headers.
/// `#` and `;` start comments. [damage] may repeat; other sections may not.
struct ConfigDocument {
    std::vector<ConfigSection> sections;
    std::string source;   // for messages
    std::string base_dir; // relative file paths resolve against this
};

ConfigDocument parse_config(std::string_view text, const std::string& source = "<config>",
                            const std::string& base_dir = ".");
ConfigDocument read_config_file(const std::string& path);

/// Applies `section.key=value`. Overrides of damage keys hit every [damage] section.
void apply_override(ConfigDocument& doc, const std::string& assignment);

/// Converts and validates. Unknown sections or keys are rejected by name.
ScenarioConfig to_scenario_config(const ConfigDocument& doc);

/// Documents every accepted key.
std::string config_help();

} // namespace psg
