#include "psg/engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace psg {

std::string to_string(Algorithm a) { return a == Algorithm::PsgImc ? "psg-imc" : "homogeneous-baseline"; }

Algorithm parse_algorithm(const std::string& s) {
    if (s == "psg-imc") return Algorithm::PsgImc;
    if (s == "homogeneous-baseline" || s == "baseline") return Algorithm::Baseline;
    throw std::invalid_argument("unknown algorithm '" + s + "' (expected psg-imc or homogeneous-baseline)");
}

void ScenarioConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
    if (width == 0 || height == 0) fail("grid.width and grid.height must be at least 1");
    if (agents == 0) fail("swarm.agents must be at least 1");
    if (runs == 0) fail("monte-carlo.runs must be at least 1");
    if (comm_radius < 0.0) fail("consensus.radius must be nonnegative");
    if (loops && *loops == 0) fail("consensus.loops must be at least 1");
    if (snap.window == 0) fail("snap.window must be at least 1");
    if (snap.factor < 0.0 || snap.spread < 0.0 || snap.reset < 0.0) fail("snap thresholds must be nonnegative");
    if (reference_bin && *reference_bin >= width * height) fail("swarm.reference_bin is outside the grid");
    for (const auto& d : damage) {
        if (!(d.fraction >= 0.0 && d.fraction <= 1.0)) fail("damage.fraction must lie in [0, 1]");
        if (d.row_begin > d.row_end || d.row_end >= height) fail("damage.rows is outside the grid");
        if (d.col_begin > d.col_end || d.col_end >= width) fail("damage.cols is outside the grid");
    }
}

Scenario::Scenario(Grid g, Formation f, ConstraintMatrix a)
    : grid(std::move(g)), formation(std::move(f)), constraints(std::move(a)) {
    if (formation.n_cell() != grid.n_cell() || constraints.size() != grid.n_cell())
        throw std::invalid_argument("grid, formation and constraints disagree in size");
    if (!check_pi_connectivity(formation, constraints))
        throw std::invalid_argument("formation support is not connected under the motion constraints");
    trapping = analyze_trapping(constraints, formation);
}

namespace {

DensityVector read_density(const std::string& path, const Grid& grid) {
    const FormationRaster raster = read_formation_file(path);
    if (raster.width != grid.width() || raster.height != grid.height()) {
        std::ostringstream os;
        os << path << ": raster is " << raster.width << "x" << raster.height << " but grid is " << grid.width()
           << "x" << grid.height();
        throw std::invalid_argument(os.str());
    }
    return DensityVector::from_weights(raster.weights);
}

std::uint64_t alpha_epoch(const Scenario& s, std::uint64_t k) {
    if (s.alpha) return s.alpha_time_invariant ? 0 : k;
    if (s.orbit) return k % OrbitGridAdapter::kPeriod;
    return 0;
}

const std::pair<AlphaVector, double>& cached_alpha(GuidanceCache& cache, const Scenario& s, std::size_t c,
                                                   std::uint64_t k) {
    auto& slot = cache.alpha[c];
    if (!slot) {
        AlphaVector a = s.alpha_at(c, k);
        if (a.size() != s.grid.n_cell()) throw std::invalid_argument("alpha provider returned the wrong length");
        const double pa = weighted_mass(s.formation.pi(), a);
        slot.emplace(std::move(a), pa);
    }
    return *slot;
}

void refresh_cache(SwarmState& swarm, const Scenario& s) {
    const std::uint64_t epoch = alpha_epoch(s, swarm.k);
    if (epoch != swarm.cache.epoch || swarm.cache.alpha.size() != s.grid.n_cell())
        swarm.cache.reset(epoch, s.grid.n_cell());
}

double xi_floor(std::size_t m) { return 1.0 / (std::pow(2.0, 1.5) * static_cast<double>(m)); }

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t h = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
    double mid = v[h];
    if (v.size() % 2 == 0) mid = 0.5 * (mid + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h)));
    return mid;
}

std::size_t escape_move(const Scenario& s, std::size_t bin, Rng& rng) {
    const std::vector<double> row = s.trapping.C.row(bin);
    return select_transition(row, rng.uniform01());
}

// Moves every agent to nexts[j] at once and checks the absorption and exit invariants.
std::size_t apply_moves(SwarmState& swarm, const Scenario& s, const std::vector<std::size_t>& nexts) {
    const std::size_t n = s.grid.n_cell();
    std::size_t transitions = 0;
    for (std::size_t j = 0; j < swarm.agents.size(); ++j) {
        AgentState& a = swarm.agents[j];
        const std::size_t next = nexts[j];
        if (s.formation.is_recurrent(a.bin) && !s.formation.is_recurrent(next)) {
            std::ostringstream os;
            os << "agent " << a.id << " left the formation support (" << a.bin << " -> " << next << ")";
            throw std::logic_error(os.str());
        }
        if (next != a.bin) {
            ++transitions;
            ++a.cumulative_transitions;
            --swarm.counts[a.bin];
            ++swarm.counts[next];
            a.bin = next;
        }
        if (s.formation.is_recurrent(a.bin)) a.reached_formation = true;
        if (!a.reached_formation && swarm.k + 1 > n) {
            std::ostringstream os;
            os << "agent " << a.id << " still outside the formation after " << swarm.k + 1 << " steps";
            throw std::logic_error(os.str());
        }
    }
    ++swarm.k;
    return transitions;
}

double cumulative_mean(const SwarmState& swarm) {
    double total = 0.0;
    for (const auto& a : swarm.agents) total += static_cast<double>(a.cumulative_transitions);
    return total / static_cast<double>(swarm.m());
}

ClassConsensus oracle_consensus(const std::vector<std::size_t>& counts) {
    ClassConsensus c;
    for (std::size_t i = 0; i < counts.size(); ++i)
        if (counts[i] > 0) {
            c.bins.push_back(i);
            c.counts.push_back(counts[i]);
        }
    const auto k = static_cast<Eigen::Index>(c.bins.size());
    const double m = static_cast<double>(c.agent_count());
    c.estimates.resize(k, k);
    for (Eigen::Index a = 0; a < k; ++a) c.estimates.row(a).setConstant(static_cast<double>(c.counts[static_cast<std::size_t>(a)]) / m);
    return c;
}

} // namespace

Scenario Scenario::from_config(const ScenarioConfig& config) {
    config.validate();
    if (config.formation_file.empty()) throw std::invalid_argument("formation.file is required");
    Grid grid(config.width, config.height);
    Formation formation(read_density(config.formation_file, grid));
    ConstraintMatrix constraints = motion_constraints(grid, config.motion_range);
    Scenario s(std::move(grid), std::move(formation), std::move(constraints));
    if (!config.initial_file.empty()) s.initial = read_density(config.initial_file, s.grid);
    if (config.orbit) s.orbit.emplace(s.grid);
    return s;
}

AlphaVector Scenario::alpha_at(std::size_t c, std::uint64_t k) const {
    if (alpha) return alpha(c, k);
    if (orbit) return orbit->orbit_alpha_vector(c, k);
    return alpha_vector(grid, c);
}

void GuidanceCache::reset(std::uint64_t new_epoch, std::size_t n_cell) {
    epoch = new_epoch;
    alpha.assign(n_cell, std::nullopt);
    baseline_rows.assign(n_cell, {});
}

DensityVector SwarmState::estimate_of(const AgentState& agent) const {
    if (consensus.bins.empty()) return DensityVector::point_mass(counts.size(), agent.bin);
    return consensus.estimate(agent.estimate_class, counts.size());
}

SwarmState init_swarm(const ScenarioConfig& config, const Scenario& scenario, std::uint64_t seed) {
    const std::size_t n = scenario.grid.n_cell();
    SwarmState s;
    s.world_rng = Rng(derive_seed(seed, 0));
    s.counts.assign(n, 0);
    s.agents.resize(config.agents);
    for (std::size_t j = 0; j < config.agents; ++j) {
        AgentState& a = s.agents[j];
        a.id = j;
        a.rng = Rng(derive_seed(seed, j + 1));
        if (scenario.initial) {
            a.bin = select_transition(scenario.initial->values(), a.rng.uniform01());
        } else {
            a.bin = a.rng.uniform_index(n);
        }
        a.reached_formation = scenario.formation.is_recurrent(a.bin);
        ++s.counts[a.bin];
    }
    const auto& rec = scenario.formation.recurrent();
    s.baseline_reference = config.reference_bin ? *config.reference_bin : rec[s.world_rng.uniform_index(rec.size())];
    s.cache.reset(alpha_epoch(scenario, 0), n);
    return s;
}

StepMetrics initial_metrics(const SwarmState& swarm, const Scenario& scenario) {
    const DensityVector f = swarm.true_distribution();
    const DensityVector& pi = scenario.formation.pi();
    StepMetrics mt;
    mt.step = swarm.k;
    mt.hd_true = hellinger(pi, f);
    mt.m_alive = swarm.m();
    mt.cumulative_transitions_mean = cumulative_mean(swarm);
    // Own-indicator estimates: D_H(e_i, p)^2 = 1 - sqrt(p_i), l1 distance 2 (1 - p_i).
    std::vector<double> xis;
    double hd_est = 0.0, theta_sq = 0.0;
    for (const auto& a : swarm.agents) {
        hd_est += std::sqrt(std::max(0.0, 1.0 - std::sqrt(f[a.bin])));
        xis.push_back(std::sqrt(std::max(0.0, 1.0 - std::sqrt(pi[a.bin]))));
        const double theta = 2.0 * (1.0 - f[a.bin]);
        theta_sq += theta * theta;
    }
    const double m = static_cast<double>(swarm.m());
    mt.hd_estimate_mean = hd_est / m;
    mt.consensus_norm = std::sqrt(theta_sq);
    mt.xi_mean = std::accumulate(xis.begin(), xis.end(), 0.0) / m;
    mt.xi_median = median(std::move(xis));
    return mt;
}

StepMetrics step(SwarmState& swarm, const ScenarioConfig& config, const Scenario& scenario) {
    const std::size_t m = swarm.m();
    if (m == 0) throw std::logic_error("swarm has no agents");
    const std::size_t n = scenario.grid.n_cell();
    const DensityVector& pi = scenario.formation.pi();
    const auto& rec = scenario.formation.recurrent();
    const DensityVector f = swarm.true_distribution();
    refresh_cache(swarm, scenario);

    ClassConsensus cons;
    if (config.oracle_consensus) {
        cons = oracle_consensus(swarm.counts);
    } else {
        ConsensusSettings cs;
        cs.radius = config.comm_radius;
        cs.eps_cons = config.eps_cons;
        cs.loops = config.loops;
        cs.on_disconnected = config.on_disconnected;
        cons = class_consensus(swarm.counts, scenario.grid, cs);
    }

    // Co-located agents hold the same estimate, so xi is evaluated once per occupied bin.
    const std::size_t k = cons.bins.size();
    std::vector<std::size_t> class_of(n, 0);
    std::vector<double> class_xi(k), class_hd(k);
    std::vector<double> est(n);
    for (std::size_t b = 0; b < k; ++b) {
        class_of[cons.bins[b]] = b;
        std::fill(est.begin(), est.end(), 0.0);
        for (std::size_t a = 0; a < k; ++a)
            est[cons.bins[a]] = cons.estimates(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        class_xi[b] = hellinger(est, pi.values());
        class_hd[b] = hellinger(est, f.values());
    }

    const double xi_min = xi_floor(m);
    std::vector<std::size_t> nexts(m);
    std::vector<double> row(n);
    std::size_t snapped = 0;
    for (std::size_t j = 0; j < m; ++j) {
        AgentState& a = swarm.agents[j];
        const std::size_t b = class_of[a.bin];
        a.estimate_class = b;
        a.xi = class_xi[b];
        const bool snap = a.xi_history.push(a.xi, xi_min, config.snap);
        if (!scenario.formation.is_recurrent(a.bin)) {
            nexts[j] = escape_move(scenario, a.bin, a.rng);
            continue;
        }
        if (snap || a.xi == 0.0) {
            snapped += snap ? 1 : 0;
            nexts[j] = a.bin;
            continue;
        }
        const std::size_t c = config.reference_bin ? *config.reference_bin : rec[a.rng.uniform_index(rec.size())];
        const auto& [alpha, pa] = cached_alpha(swarm.cache, scenario, c, swarm.k);
        constrained_markov_row(pi, a.xi, alpha, pa, scenario.constraints, a.bin, row);
        nexts[j] = select_transition(row, a.rng.uniform01());
    }

    StepMetrics mt;
    mt.transitions = apply_moves(swarm, scenario, nexts);
    mt.step = swarm.k;
    mt.hd_true = hellinger(pi, swarm.true_distribution());
    std::vector<double> xis(m);
    double hd_sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        xis[j] = swarm.agents[j].xi;
        hd_sum += class_hd[swarm.agents[j].estimate_class];
    }
    mt.hd_estimate_mean = hd_sum / static_cast<double>(m);
    mt.xi_mean = std::accumulate(xis.begin(), xis.end(), 0.0) / static_cast<double>(m);
    mt.xi_median = median(std::move(xis));
    mt.cumulative_transitions_mean = cumulative_mean(swarm);
    mt.consensus_norm = cons.theta_norm;
    mt.n_loop = cons.n_loop;
    mt.sigma = cons.sigma;
    mt.m_alive = m;
    mt.snapped = snapped;
    swarm.consensus = std::move(cons);
    return mt;
}

StepMetrics baseline_step(SwarmState& swarm, const ScenarioConfig& /*config*/, const Scenario& scenario) {
    const std::size_t m = swarm.m();
    if (m == 0) throw std::logic_error("swarm has no agents");
    const std::size_t n = scenario.grid.n_cell();
    const DensityVector& pi = scenario.formation.pi();
    refresh_cache(swarm, scenario);
    const std::size_t c = swarm.baseline_reference;
    const auto& [alpha, pa] = cached_alpha(swarm.cache, scenario, c, swarm.k);

    std::vector<std::size_t> nexts(m);
    for (std::size_t j = 0; j < m; ++j) {
        AgentState& a = swarm.agents[j];
        a.xi = 1.0;
        if (!scenario.formation.is_recurrent(a.bin)) {
            nexts[j] = escape_move(scenario, a.bin, a.rng);
            continue;
        }
        auto& row = swarm.cache.baseline_rows[a.bin];
        if (row.empty()) {
            row.resize(n);
            constrained_markov_row(pi, 1.0, alpha, pa, scenario.constraints, a.bin, row);
        }
        nexts[j] = select_transition(row, a.rng.uniform01());
    }

    StepMetrics mt;
    mt.transitions = apply_moves(swarm, scenario, nexts);
    mt.step = swarm.k;
    mt.hd_true = hellinger(pi, swarm.true_distribution());
    mt.xi_mean = 1.0;
    mt.xi_median = 1.0;
    mt.cumulative_transitions_mean = cumulative_mean(swarm);
    mt.m_alive = m;
    return mt;
}

std::vector<std::size_t> damage_region(const Grid& grid, const DamageEvent& event) {
    std::vector<std::size_t> bins;
    for (std::size_t r = event.row_begin; r <= event.row_end && r < grid.height(); ++r)
        for (std::size_t c = event.col_begin; c <= event.col_end && c < grid.width(); ++c)
            bins.push_back(grid.index(r, c));
    return bins;
}

std::size_t inject_damage(SwarmState& swarm, std::span<const std::size_t> region, double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("damage fraction must lie in [0, 1]");
    std::vector<bool> hit(swarm.counts.size(), false);
    for (std::size_t b : region) hit.at(b) = true;
    std::vector<bool> remove(swarm.agents.size(), false);
    std::size_t removed = 0;
    for (std::size_t j = 0; j < swarm.agents.size(); ++j)
        if (hit[swarm.agents[j].bin] && swarm.world_rng.bernoulli(fraction)) {
            remove[j] = true;
            ++removed;
        }
    if (removed == swarm.agents.size()) throw std::runtime_error("damage would remove every agent");
    std::vector<AgentState> kept;
    kept.reserve(swarm.agents.size() - removed);
    for (std::size_t j = 0; j < swarm.agents.size(); ++j) {
        if (remove[j]) --swarm.counts[swarm.agents[j].bin];
        else kept.push_back(std::move(swarm.agents[j]));
    }
    swarm.agents = std::move(kept);
    return removed;
}

RunResult run(const ScenarioConfig& config, const Scenario& scenario, std::uint64_t seed,
              const StepObserver& observer, const std::atomic<bool>* cancel) {
    RunResult r;
    r.final_state = init_swarm(config, scenario, seed);
    SwarmState& s = r.final_state;
    r.metrics.reserve(config.steps + 1);
    r.metrics.push_back(initial_metrics(s, scenario));
    if (observer) observer(s, r.metrics.back());
    for (std::size_t i = 0; i < config.steps; ++i) {
        if (cancel && cancel->load()) {
            r.completed = false;
            break;
        }
        for (const auto& d : config.damage)
            if (d.step == s.k) inject_damage(s, damage_region(scenario.grid, d), d.fraction);
        r.metrics.push_back(config.algorithm == Algorithm::PsgImc ? step(s, config, scenario)
                                                                  : baseline_step(s, config, scenario));
        if (observer) observer(s, r.metrics.back());
    }
    return r;
}

std::uint64_t run_seed(std::uint64_t base, std::size_t run_index) {
    return derive_seed(mix_seed(base), 0x5eed0000ULL + run_index);
}

namespace {

MetricSummary summarize(const std::vector<double>& v) {
    MetricSummary s;
    const double n = static_cast<double>(v.size());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

} // namespace

std::vector<StepAggregate> aggregate(const std::vector<std::vector<StepMetrics>>& runs) {
    std::vector<StepAggregate> out;
    if (runs.empty()) return out;
    std::size_t len = runs.front().size();
    for (const auto& r : runs) len = std::min(len, r.size());
    out.resize(len);
    std::vector<double> v(runs.size());
    auto field = [&](auto get) {
        for (std::size_t r = 0; r < runs.size(); ++r) v[r] = get(r);
        return summarize(v);
    };
    for (std::size_t t = 0; t < len; ++t) {
        auto& a = out[t];
        a.step = runs.front()[t].step;
        a.hd_true = field([&](std::size_t r) { return runs[r][t].hd_true; });
        a.hd_estimate_mean = field([&](std::size_t r) { return runs[r][t].hd_estimate_mean; });
        a.transitions = field([&](std::size_t r) { return static_cast<double>(runs[r][t].transitions); });
        a.cumulative_transitions_mean = field([&](std::size_t r) { return runs[r][t].cumulative_transitions_mean; });
        a.consensus_norm = field([&](std::size_t r) { return runs[r][t].consensus_norm; });
        a.xi_mean = field([&](std::size_t r) { return runs[r][t].xi_mean; });
        a.n_loop = field([&](std::size_t r) { return static_cast<double>(runs[r][t].n_loop); });
        a.m_alive = field([&](std::size_t r) { return static_cast<double>(runs[r][t].m_alive); });
    }
    return out;
}

MonteCarloResult run_monte_carlo(const ScenarioConfig& config, const Scenario& scenario, std::size_t n_runs,
                                 std::size_t threads, const std::atomic<bool>* cancel) {
    if (n_runs == 0) throw std::invalid_argument("monte carlo needs at least one run");
    MonteCarloResult out;
    out.seeds.resize(n_runs);
    for (std::size_t r = 0; r < n_runs; ++r) out.seeds[r] = run_seed(config.seed, r);
    out.runs.resize(n_runs);
    std::vector<char> done(n_runs, 0);

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n_runs);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= n_runs) return;
            try {
                RunResult res = run(config, scenario, out.seeds[r], {}, cancel);
                done[r] = res.completed ? 1 : 0;
                out.runs[r] = std::move(res.metrics);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n_runs);
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
    out.completed = std::all_of(done.begin(), done.end(), [](char c) { return c != 0; });
    out.steps = aggregate(out.runs);
    return out;
}

std::size_t min_agents(double eps_bin, double eps_conv) {
    if (!(eps_bin > 0.0) || !(eps_conv > 0.0)) throw std::invalid_argument("tolerances must be positive");
    const double raw = 1.0 / (4.0 * eps_bin * eps_bin * eps_conv);
    const double near = std::round(raw);
    const double v = std::abs(raw - near) <= 1e-9 * std::max(1.0, near) ? near : std::ceil(raw);
    return std::max<std::size_t>(1, static_cast<std::size_t>(v));
}

ConvergencePlan plan_convergence(double eps_bin, double eps_conv) {
    return {eps_bin, eps_conv, min_agents(eps_bin, eps_conv)};
}

std::vector<double> lln_check(const DensityVector& pi, std::size_t m, std::size_t n_trials, double eps_bin,
                              std::uint64_t seed) {
    if (m == 0) throw std::invalid_argument("lln_check needs m >= 1");
    const std::size_t n = pi.size();
    std::vector<double> cdf(n);
    std::partial_sum(pi.values().begin(), pi.values().end(), cdf.begin());
    std::size_t last = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (pi[i] > 0.0) last = i;
    Rng rng(seed);
    std::vector<std::size_t> violations(n, 0), counts(n);
    for (std::size_t t = 0; t < n_trials; ++t) {
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t s = 0; s < m; ++s) {
            const double z = rng.uniform01();
            auto it = std::upper_bound(cdf.begin(), cdf.end(), z);
            std::size_t bin = it == cdf.end() ? last : static_cast<std::size_t>(it - cdf.begin());
            ++counts[bin];
        }
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(static_cast<double>(counts[i]) / static_cast<double>(m) - pi[i]) > eps_bin) ++violations[i];
    }
    std::vector<double> rates(n);
    for (std::size_t i = 0; i < n; ++i)
        rates[i] = n_trials == 0 ? 0.0 : static_cast<double>(violations[i]) / static_cast<double>(n_trials);
    return rates;
}

} // namespace psg
