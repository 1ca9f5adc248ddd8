#pragma once

#include "psg/engine.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace psg {

inline constexpr const char* kVersion = "0.1.0";

/// Column order of the metrics CSV.
inline constexpr const char* kMetricsHeader =
    "step,hd_true,hd_estimate_mean,transitions,cumulative_transitions_mean,consensus_norm,xi_mean,n_loop,m_alive";

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const StepMetrics& m);
void write_metrics_csv(std::ostream& os, const std::vector<StepMetrics>& metrics);

/// step, then <metric>_mean and <metric>_3sigma for every metric.
void write_monte_carlo_csv(std::ostream& os, const std::vector<StepAggregate>& steps);

/// Binary PGM, one pixel per bin, gray level scaled to the fullest bin.
void write_pgm(const std::filesystem::path& path, const Grid& grid, const std::vector<std::size_t>& counts);

/// bin, kappa_x, kappa_y, density at step k.
void write_orbit_scatter(std::ostream& os, const OrbitGridAdapter& orbit, std::uint64_t k,
                         const std::vector<std::size_t>& counts);

nlohmann::json config_to_json(const ScenarioConfig& config);

/// Writes via a temporary file and rename so readers never see half a manifest.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

} // namespace psg
