#include "psg/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace psg {

namespace {

void put(std::ostream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    os << buf;
}

} // namespace

void write_metrics_header(std::ostream& os) { os << kMetricsHeader << "\n"; }

void write_metrics_row(std::ostream& os, const StepMetrics& m) {
    os << m.step << ',';
    put(os, m.hd_true);
    os << ',';
    put(os, m.hd_estimate_mean);
    os << ',' << m.transitions << ',';
    put(os, m.cumulative_transitions_mean);
    os << ',';
    put(os, m.consensus_norm);
    os << ',';
    put(os, m.xi_mean);
    os << ',' << m.n_loop << ',' << m.m_alive << "\n";
}

void write_metrics_csv(std::ostream& os, const std::vector<StepMetrics>& metrics) {
    write_metrics_header(os);
    for (const auto& m : metrics) write_metrics_row(os, m);
}

void write_monte_carlo_csv(std::ostream& os, const std::vector<StepAggregate>& steps) {
    static const char* names[] = {"hd_true",        "hd_estimate_mean", "transitions", "cumulative_transitions_mean",
                                  "consensus_norm", "xi_mean",          "n_loop",      "m_alive"};
    os << "step";
    for (const char* n : names) os << ',' << n << "_mean," << n << "_3sigma";
    os << "\n";
    for (const auto& a : steps) {
        const MetricSummary* fields[] = {&a.hd_true, &a.hd_estimate_mean, &a.transitions, &a.cumulative_transitions_mean,
                                         &a.consensus_norm, &a.xi_mean, &a.n_loop, &a.m_alive};
        os << a.step;
        for (const MetricSummary* f : fields) {
            os << ',';
            put(os, f->mean);
            os << ',';
            put(os, 3.0 * f->sd);
        }
        os << "\n";
    }
}

void write_pgm(const std::filesystem::path& path, const Grid& grid, const std::vector<std::size_t>& counts) {
    if (counts.size() != grid.n_cell()) throw std::invalid_argument("counts do not match grid");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "P5\n" << grid.width() << ' ' << grid.height() << "\n255\n";
    const std::size_t peak = std::max<std::size_t>(1, *std::max_element(counts.begin(), counts.end()));
    std::vector<unsigned char> px(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        px[i] = static_cast<unsigned char>(std::lround(255.0 * static_cast<double>(counts[i]) / static_cast<double>(peak)));
    out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

void write_orbit_scatter(std::ostream& os, const OrbitGridAdapter& orbit, std::uint64_t k,
                         const std::vector<std::size_t>& counts) {
    std::size_t total = 0;
    for (auto c : counts) total += c;
    os << "bin,kappa_x,kappa_y,density\n";
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const Point p = orbit.bin_centroid_at(i, k);
        os << i << ',';
        put(os, p[0]);
        os << ',';
        put(os, p[1]);
        os << ',';
        put(os, total ? static_cast<double>(counts[i]) / static_cast<double>(total) : 0.0);
        os << "\n";
    }
}

nlohmann::json config_to_json(const ScenarioConfig& c) {
    nlohmann::json j;
    j["grid"] = {{"width", c.width}, {"height", c.height}};
    j["formation"] = {{"file", c.formation_file}, {"initial", c.initial_file}};
    j["swarm"] = {{"agents", c.agents},
                  {"steps", c.steps},
                  {"seed", c.seed},
                  {"algorithm", to_string(c.algorithm)},
                  {"reference_bin", c.reference_bin ? nlohmann::json(*c.reference_bin) : nlohmann::json("random")},
                  {"oracle_consensus", c.oracle_consensus}};
    j["motion"] = {{"range", c.motion_range}};
    j["consensus"] = {{"radius", c.comm_radius},
                      {"eps", c.eps_cons},
                      {"loops", c.loops ? nlohmann::json(*c.loops) : nlohmann::json("auto")},
                      {"on_disconnected",
                       c.on_disconnected == DisconnectedPolicy::Error ? "error" : "complete-graph"}};
    j["snap"] = {{"enabled", c.snap.enabled},
                 {"factor", c.snap.factor},
                 {"window", c.snap.window},
                 {"spread", c.snap.spread},
                 {"reset", c.snap.reset}};
    j["orbit"] = {{"enabled", c.orbit}};
    j["output"] = {{"snapshots", c.snapshot_steps}};
    j["monte-carlo"] = {{"runs", c.runs}};
    j["damage"] = nlohmann::json::array();
    for (const auto& d : c.damage)
        j["damage"].push_back({{"step", d.step},
                               {"rows", {d.row_begin, d.row_end}},
                               {"cols", {d.col_begin, d.col_end}},
                               {"fraction", d.fraction}});
    return j;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << doc.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

} // namespace psg
