#pragma once

#include "psg/consensus.hpp"
#include "psg/grid.hpp"
#include "psg/guidance.hpp"
#include "psg/orbit.hpp"
#include "psg/random.hpp"

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace psg {

enum class Algorithm { PsgImc, Baseline };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& s);

/// Inclusive raster rectangle whose agents are thinned at `step`.
struct DamageEvent {
    std::size_t step = 0;
    std::size_t row_begin = 0, row_end = 0;
    std::size_t col_begin = 0, col_end = 0;
    double fraction = 0.0;
};

struct ScenarioConfig {
    std::size_t width = 5;
    std::size_t height = 5;
    std::string formation_file;
    std::string initial_file; // empty: uniform over all bins
    std::size_t agents = 100;
    std::size_t steps = 100;
    std::uint64_t seed = 1;
    std::size_t runs = 1;
    Algorithm algorithm = Algorithm::PsgImc;

    double motion_range = -1.0; // negative: unconstrained
    double comm_radius = 10.0;
    double eps_cons = 0.0;      // <= 0: 1/m
    std::optional<std::size_t> loops;
    DisconnectedPolicy on_disconnected = DisconnectedPolicy::Error;

    SnapSettings snap;
    std::optional<std::size_t> reference_bin; // pins c for every agent and step
    bool oracle_consensus = false;
    bool orbit = false;
    std::vector<DamageEvent> damage;
    std::vector<std::size_t> snapshot_steps;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Supplies the alpha vector for reference bin c at step k.
using AlphaProvider = std::function<AlphaVector(std::size_t c, std::uint64_t k)>;

/// Immutable geometry shared by every run of a configuration.
struct Scenario {
    Grid grid;
    Formation formation;
    ConstraintMatrix constraints;
    TrappingAnalysis trapping;
    std::optional<OrbitGridAdapter> orbit;
    std::optional<DensityVector> initial; // initial placement density
    AlphaProvider alpha;                  // empty: distance-based on `grid` (or the orbit centroids)
    bool alpha_time_invariant = true;

    Scenario(Grid grid, Formation formation, ConstraintMatrix constraints);

    /// Reads formation files and builds constraints from a validated config.
    static Scenario from_config(const ScenarioConfig& config);

    AlphaVector alpha_at(std::size_t c, std::uint64_t k) const;
};

struct AgentState {
    std::size_t id = 0;
    std::size_t bin = 0;
    std::size_t estimate_class = 0; // column of SwarmState::consensus holding this agent's estimate
    double xi = 0.0;
    XiHistory xi_history;
    Rng rng;
    std::size_t cumulative_transitions = 0;
    bool reached_formation = false;
};

/// Per-run memo of alpha vectors and baseline rows, keyed by the alpha epoch.
struct GuidanceCache {
    std::uint64_t epoch = 0;
    std::vector<std::optional<std::pair<AlphaVector, double>>> alpha; // (alpha, pi . alpha) per reference bin
    std::vector<std::vector<double>> baseline_rows;                   // per current bin
    void reset(std::uint64_t new_epoch, std::size_t n_cell);
};

struct SwarmState {
    std::uint64_t k = 0;
    std::vector<AgentState> agents;      // ascending id; removed agents are erased
    std::vector<std::size_t> counts;     // agents per bin
    ClassConsensus consensus;            // last consensus stage (empty before step 1)
    std::size_t baseline_reference = 0;  // fixed c for the homogeneous baseline
    Rng world_rng;                       // damage and baseline draws
    GuidanceCache cache;

    std::size_t m() const noexcept { return agents.size(); }
    DensityVector true_distribution() const { return DensityVector::from_counts(counts); }
    /// Agent's current estimate; its own indicator before the first consensus stage.
    DensityVector estimate_of(const AgentState& agent) const;
};

struct StepMetrics {
    std::uint64_t step = 0;
    double hd_true = 0.0;
    double hd_estimate_mean = 0.0;
    std::size_t transitions = 0;
    double cumulative_transitions_mean = 0.0;
    double consensus_norm = 0.0;
    double xi_mean = 0.0;
    double xi_median = 0.0;
    std::size_t n_loop = 0;
    std::size_t m_alive = 0;
    double sigma = 0.0;
    std::size_t snapped = 0; // agents held in place by the identity snap
};

SwarmState init_swarm(const ScenarioConfig& config, const Scenario& scenario, std::uint64_t seed);

/// Metrics describing the state before any step.
StepMetrics initial_metrics(const SwarmState& swarm, const Scenario& scenario);

/// One synchronous guidance cycle for every agent.
StepMetrics step(SwarmState& swarm, const ScenarioConfig& config, const Scenario& scenario);

/// Homogeneous reference: xi = 1, a single fixed reference bin, no consensus, no snap.
StepMetrics baseline_step(SwarmState& swarm, const ScenarioConfig& config, const Scenario& scenario);

/// Removes each agent in `region` with probability `fraction`. Returns the number removed.
std::size_t inject_damage(SwarmState& swarm, std::span<const std::size_t> region, double fraction);

std::vector<std::size_t> damage_region(const Grid& grid, const DamageEvent& event);

using StepObserver = std::function<void(const SwarmState&, const StepMetrics&)>;

struct RunResult {
    std::vector<StepMetrics> metrics; // metrics[0] is the initial state
    SwarmState final_state;
    bool completed = true;
};

/// Runs config.steps steps. Damage scheduled at step k is applied after step k
/// is recorded, so its effect shows at step k + 1.
RunResult run(const ScenarioConfig& config, const Scenario& scenario, std::uint64_t seed,
              const StepObserver& observer = {}, const std::atomic<bool>* cancel = nullptr);

struct MetricSummary {
    double mean = 0.0;
    double sd = 0.0; // sample standard deviation; zero for a single run
};

struct StepAggregate {
    std::uint64_t step = 0;
    MetricSummary hd_true, hd_estimate_mean, transitions, cumulative_transitions_mean, consensus_norm, xi_mean,
        n_loop, m_alive;
};

struct MonteCarloResult {
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<StepMetrics>> runs;
    std::vector<StepAggregate> steps;
    bool completed = true;
};

std::uint64_t run_seed(std::uint64_t base, std::size_t run_index);

/// Independent runs with seeds run_seed(config.seed, r). Results do not depend on `threads`.
MonteCarloResult run_monte_carlo(const ScenarioConfig& config, const Scenario& scenario, std::size_t n_runs,
                                 std::size_t threads = 0, const std::atomic<bool>* cancel = nullptr);

std::vector<StepAggregate> aggregate(const std::vector<std::vector<StepMetrics>>& runs);

struct ConvergencePlan {
    double eps_bin = 0.0;
    double eps_conv = 0.0;
    std::size_t m_min = 0;
};

/// ceil(1 / (4 eps_bin^2 eps_conv)).
std::size_t min_agents(double eps_bin, double eps_conv);
ConvergencePlan plan_convergence(double eps_bin, double eps_conv);

/// Per-bin fraction of trials in which |S_i/m - pi_i| > eps_bin, with m i.i.d. draws from pi per trial.
std::vector<double> lln_check(const DensityVector& pi, std::size_t m, std::size_t n_trials, double eps_bin,
                              std::uint64_t seed);

} // namespace psg
