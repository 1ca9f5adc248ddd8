#include "psg/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace psg {

namespace {

struct KeySpec {
    const char* section;
    const char* key;
    const char* help;
};

constexpr KeySpec kKeys[] = {
    {"grid", "width", "bins per row"},
    {"grid", "height", "bins per column"},
    {"formation", "file", "formation raster ('.'/'#' or numeric rows)"},
    {"formation", "initial", "optional initial placement density (same format); default uniform"},
    {"swarm", "agents", "number of agents m"},
    {"swarm", "steps", "time steps to simulate"},
    {"swarm", "seed", "base seed"},
    {"swarm", "algorithm", "psg-imc | homogeneous-baseline"},
    {"swarm", "reference_bin", "pin the reference bin c (bin index) or 'random'"},
    {"swarm", "oracle_consensus", "use the true distribution instead of consensus estimates"},
    {"motion", "range", "max l1 hop per step on the raster; negative for unconstrained"},
    {"consensus", "radius", "communication radius (l1, grid units)"},
    {"consensus", "eps", "consensus tolerance; 0 means 1/m"},
    {"consensus", "loops", "'auto' or a fixed number of consensus rounds"},
    {"consensus", "on_disconnected", "error | complete-graph"},
    {"snap", "enabled", "identity snap on/off"},
    {"snap", "factor", "snap when xi < factor * xi_min"},
    {"snap", "window", "steps of xi history inspected"},
    {"snap", "spread", "snap when max - min over the window < spread * xi_min"},
    {"snap", "reset", "clear the window when xi > reset * xi_min"},
    {"orbit", "enabled", "bins ride passive relative orbits"},
    {"output", "snapshots", "comma-separated steps written as snap_<step>.pgm"},
    {"monte-carlo", "runs", "number of runs for monte-carlo"},
    {"damage", "step", "damage is applied after this step"},
    {"damage", "rows", "inclusive row range, e.g. 9-16"},
    {"damage", "cols", "inclusive column range"},
    {"damage", "fraction", "removal probability per agent in the region"},
};

bool known_section(std::string_view s) {
    return std::any_of(std::begin(kKeys), std::end(kKeys), [&](const KeySpec& k) { return s == k.section; });
}

bool known_key(std::string_view s, std::string_view key) {
    return std::any_of(std::begin(kKeys), std::end(kKeys),
                       [&](const KeySpec& k) { return s == k.section && key == k.key; });
}

std::string trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return std::string(s.substr(a, b - a + 1));
}

std::string where(const std::string& section, const ConfigEntry& e) {
    return section + "." + e.key + (e.line ? " (line " + std::to_string(e.line) + ")" : "");
}

std::uint64_t as_uint(const std::string& section, const ConfigEntry& e) {
    std::uint64_t v = 0;
    const char* end = e.value.data() + e.value.size();
    auto [p, ec] = std::from_chars(e.value.data(), end, v);
    if (ec != std::errc() || p != end) throw ConfigError(where(section, e) + ": expected a nonnegative integer, got '" + e.value + "'");
    return v;
}

double as_double(const std::string& section, const ConfigEntry& e) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(e.value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != e.value.size() || !std::isfinite(v))
        throw ConfigError(where(section, e) + ": expected a number, got '" + e.value + "'");
    return v;
}

bool as_bool(const std::string& section, const ConfigEntry& e) {
    std::string v = e.value;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw ConfigError(where(section, e) + ": expected true or false, got '" + e.value + "'");
}

std::pair<std::size_t, std::size_t> as_range(const std::string& section, const ConfigEntry& e) {
    const auto dash = e.value.find('-');
    ConfigEntry lo = e, hi = e;
    lo.value = trim(e.value.substr(0, dash));
    hi.value = dash == std::string::npos ? lo.value : trim(e.value.substr(dash + 1));
    const auto a = as_uint(section, lo), b = as_uint(section, hi);
    if (a > b) throw ConfigError(where(section, e) + ": range start exceeds end");
    return {a, b};
}

std::string resolve(const std::string& base, const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute() || base.empty()) return path;
    return (std::filesystem::path(base) / p).lexically_normal().string();
}

} // namespace

ConfigDocument parse_config(std::string_view text, const std::string& source, const std::string& base_dir) {
    ConfigDocument doc;
    doc.source = source;
    doc.base_dir = base_dir;
    ConfigSection* current = nullptr;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        const std::string at = source + ":" + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(at + "malformed section header");
            std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
            if (!known_section(name)) throw ConfigError(at + "unknown section [" + name + "]");
            if (name != "damage")
                for (const auto& s : doc.sections)
                    if (s.name == name) throw ConfigError(at + "duplicate section [" + name + "]");
            doc.sections.push_back({name, {}});
            current = &doc.sections.back();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(at + "expected key = value");
        if (!current) throw ConfigError(at + "key outside of any section");
        ConfigEntry e{trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)), line_no};
        if (!known_key(current->name, e.key)) throw ConfigError(at + "unknown key " + current->name + "." + e.key);
        for (const auto& prev : current->entries)
            if (prev.key == e.key) throw ConfigError(at + "duplicate key " + current->name + "." + e.key);
        current->entries.push_back(std::move(e));
    }
    return doc;
}

ConfigDocument read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto dir = std::filesystem::path(path).parent_path().string();
    return parse_config(buf.str(), path, dir.empty() ? "." : dir);
}

void apply_override(ConfigDocument& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw ConfigError("override '" + assignment + "' must look like section.key=value");
    const std::string section = trim(std::string_view(assignment).substr(0, dot));
    const std::string key = trim(std::string_view(assignment).substr(dot + 1, eq - dot - 1));
    const std::string value = trim(std::string_view(assignment).substr(eq + 1));
    if (!known_key(section, key)) throw ConfigError("unknown key " + section + "." + key + " in override");
    bool hit = false;
    for (auto& s : doc.sections) {
        if (s.name != section) continue;
        hit = true;
        auto it = std::find_if(s.entries.begin(), s.entries.end(), [&](const ConfigEntry& e) { return e.key == key; });
        if (it != s.entries.end()) it->value = value;
        else s.entries.push_back({key, value, 0});
    }
    if (!hit) {
        if (section == "damage") throw ConfigError("override damage." + key + ": config has no [damage] section");
        doc.sections.push_back({section, {{key, value, 0}}});
    }
}

ScenarioConfig to_scenario_config(const ConfigDocument& doc) {
    ScenarioConfig c;
    for (const auto& s : doc.sections) {
        if (s.name == "damage") {
            DamageEvent d;
            bool has_rows = false, has_cols = false, has_step = false;
            for (const auto& e : s.entries) {
                if (e.key == "step") d.step = as_uint(s.name, e), has_step = true;
                else if (e.key == "rows") std::tie(d.row_begin, d.row_end) = as_range(s.name, e), has_rows = true;
                else if (e.key == "cols") std::tie(d.col_begin, d.col_end) = as_range(s.name, e), has_cols = true;
                else if (e.key == "fraction") d.fraction = as_double(s.name, e);
            }
            if (!has_step || !has_rows || !has_cols) throw ConfigError("[damage] needs step, rows and cols");
            c.damage.push_back(d);
            continue;
        }
        for (const auto& e : s.entries) {
            const std::string id = s.name + "." + e.key;
            if (id == "grid.width") c.width = as_uint(s.name, e);
            else if (id == "grid.height") c.height = as_uint(s.name, e);
            else if (id == "formation.file") c.formation_file = resolve(doc.base_dir, e.value);
            else if (id == "formation.initial") c.initial_file = e.value.empty() ? "" : resolve(doc.base_dir, e.value);
            else if (id == "swarm.agents") c.agents = as_uint(s.name, e);
            else if (id == "swarm.steps") c.steps = as_uint(s.name, e);
            else if (id == "swarm.seed") c.seed = as_uint(s.name, e);
            else if (id == "swarm.algorithm") {
                try {
                    c.algorithm = parse_algorithm(e.value);
                } catch (const std::invalid_argument& ex) {
                    throw ConfigError(where(s.name, e) + ": " + ex.what());
                }
            } else if (id == "swarm.reference_bin") {
                if (e.value == "random") c.reference_bin.reset();
                else c.reference_bin = as_uint(s.name, e);
            } else if (id == "swarm.oracle_consensus") c.oracle_consensus = as_bool(s.name, e);
            else if (id == "motion.range") c.motion_range = as_double(s.name, e);
            else if (id == "consensus.radius") c.comm_radius = as_double(s.name, e);
            else if (id == "consensus.eps") c.eps_cons = as_double(s.name, e);
            else if (id == "consensus.loops") {
                if (e.value == "auto") c.loops.reset();
                else c.loops = as_uint(s.name, e);
            } else if (id == "consensus.on_disconnected") {
                if (e.value == "error") c.on_disconnected = DisconnectedPolicy::Error;
                else if (e.value == "complete-graph") c.on_disconnected = DisconnectedPolicy::CompleteGraph;
                else throw ConfigError(where(s.name, e) + ": expected error or complete-graph");
            } else if (id == "snap.enabled") c.snap.enabled = as_bool(s.name, e);
            else if (id == "snap.factor") c.snap.factor = as_double(s.name, e);
            else if (id == "snap.window") c.snap.window = as_uint(s.name, e);
            else if (id == "snap.spread") c.snap.spread = as_double(s.name, e);
            else if (id == "snap.reset") c.snap.reset = as_double(s.name, e);
            else if (id == "orbit.enabled") c.orbit = as_bool(s.name, e);
            else if (id == "output.snapshots") {
                std::istringstream is(e.value);
                std::string tok;
                while (std::getline(is, tok, ',')) {
                    ConfigEntry t = e;
                    t.value = trim(tok);
                    if (!t.value.empty()) c.snapshot_steps.push_back(as_uint(s.name, t));
                }
            } else if (id == "monte-carlo.runs") c.runs = as_uint(s.name, e);
        }
    }
    try {
        c.validate();
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
    }
    return c;
}

std::string config_help() {
    std::ostringstream os;
    os << "Config keys ([damage] may repeat):\n";
    std::string last;
    for (const auto& k : kKeys) {
        if (last != k.section) os << "  [" << k.section << "]\n";
        last = k.section;
        os << "    " << std::left << std::setw(18) << k.key << k.help << "\n";
    }
    return os.str();
}

} // namespace psg
