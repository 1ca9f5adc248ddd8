#include "psg/cli.hpp"

#include "psg/config.hpp"
#include "psg/engine.hpp"
#include "psg/output.hpp"
#include "psg/verify.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

namespace psg {

namespace {

namespace fs = std::filesystem;

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted.store(true); }

struct SignalGuard {
    using Handler = void (*)(int);
    Handler old_int, old_term;
    SignalGuard() {
        g_interrupted.store(false);
        old_int = std::signal(SIGINT, on_signal);
        old_term = std::signal(SIGTERM, on_signal);
    }
    ~SignalGuard() {
        std::signal(SIGINT, old_int);
        std::signal(SIGTERM, old_term);
    }
};

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    std::string config;
    std::vector<std::string> overrides;
};

// Setup failures are configuration errors (exit 1).
struct Loaded {
    ScenarioConfig config;
    std::optional<Scenario> scenario;
};

Loaded load(const GlobalOptions& g, const std::string& positional) {
    const std::string path = !positional.empty() ? positional : g.config;
    if (path.empty()) throw ConfigError("no config given (pass a path or --config)");
    ConfigDocument doc = read_config_file(path);
    for (const auto& o : g.overrides) apply_override(doc, o);
    if (g.seed) apply_override(doc, "swarm.seed=" + std::to_string(*g.seed));
    Loaded l;
    l.config = to_scenario_config(doc);
    try {
        l.scenario.emplace(Scenario::from_config(l.config));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return l;
}

nlohmann::json manifest_base(const std::string& command, const ScenarioConfig& c) {
    nlohmann::json m;
    m["version"] = kVersion;
    m["command"] = command;
    m["config"] = config_to_json(c);
    m["status"] = "running";
    return m;
}

int cmd_run(const GlobalOptions& g, const std::string& cfg, std::ostream& out, std::ostream& err) {
    Loaded l;
    try {
        l = load(g, cfg);
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    }
    const ScenarioConfig& c = l.config;
    const Scenario& s = *l.scenario;
    const fs::path dir(g.out_dir);
    fs::create_directories(dir);
    const fs::path manifest_path = dir / "manifest.json";
    const fs::path metrics_path = dir / "metrics.csv";

    nlohmann::json manifest = manifest_base("run", c);
    manifest["seeds"] = {c.seed};
    manifest["outputs"] = {{"metrics", metrics_path.string()}, {"snapshots", nlohmann::json::array()}};
    write_json_file(manifest_path, manifest);

    std::ofstream csv(metrics_path);
    write_metrics_header(csv);
    const std::set<std::size_t> snaps(c.snapshot_steps.begin(), c.snapshot_steps.end());
    SignalGuard guard;
    try {
        RunResult r = run(
            c, s, c.seed,
            [&](const SwarmState& st, const StepMetrics& m) {
                write_metrics_row(csv, m);
                if (!snaps.count(st.k)) return;
                const fs::path pgm = dir / ("snap_" + std::to_string(st.k) + ".pgm");
                write_pgm(pgm, s.grid, st.counts);
                manifest["outputs"]["snapshots"].push_back(pgm.string());
                if (s.orbit) {
                    const fs::path sc = dir / ("orbit_" + std::to_string(st.k) + ".csv");
                    std::ofstream os(sc);
                    write_orbit_scatter(os, *s.orbit, st.k, st.counts);
                    manifest["outputs"]["snapshots"].push_back(sc.string());
                }
            },
            &g_interrupted);
        csv.close();
        manifest["status"] = r.completed ? "complete" : "incomplete";
        manifest["steps_completed"] = r.metrics.size() - 1;
        write_json_file(manifest_path, manifest);
        const StepMetrics& last = r.metrics.back();
        out << "steps=" << last.step << " hd_true=" << last.hd_true << " m=" << last.m_alive
            << " cumulative_transitions_mean=" << last.cumulative_transitions_mean << "\n";
        out << "wrote " << metrics_path.string() << "\n";
        return r.completed ? 0 : 2;
    } catch (const std::exception& e) {
        csv.close();
        manifest["status"] = "failed";
        manifest["error"] = e.what();
        write_json_file(manifest_path, manifest);
        err << "runtime error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_monte_carlo(const GlobalOptions& g, const std::string& cfg, std::size_t runs, std::size_t threads,
                    std::ostream& out, std::ostream& err) {
    Loaded l;
    try {
        l = load(g, cfg);
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    }
    const ScenarioConfig& c = l.config;
    const std::size_t n = runs ? runs : c.runs;
    const fs::path dir(g.out_dir);
    fs::create_directories(dir);
    const fs::path manifest_path = dir / "manifest.json";
    const fs::path csv_path = dir / "monte_carlo.csv";
    nlohmann::json manifest = manifest_base("monte-carlo", c);
    nlohmann::json seeds = nlohmann::json::array();
    for (std::size_t r = 0; r < n; ++r) seeds.push_back(run_seed(c.seed, r));
    manifest["runs"] = n;
    manifest["seeds"] = seeds;
    manifest["outputs"] = {{"aggregate", csv_path.string()}};
    write_json_file(manifest_path, manifest);

    SignalGuard guard;
    try {
        const MonteCarloResult mc = run_monte_carlo(c, *l.scenario, n, threads, &g_interrupted);
        if (!mc.completed) {
            // Partial aggregates would mix runs of different lengths; drop them.
            fs::remove(csv_path);
            manifest["status"] = "incomplete";
            manifest["outputs"] = nlohmann::json::object();
            write_json_file(manifest_path, manifest);
            err << "interrupted; partial results removed\n";
            return 2;
        }
        std::ofstream csv(csv_path);
        write_monte_carlo_csv(csv, mc.steps);
        csv.close();
        manifest["status"] = "complete";
        write_json_file(manifest_path, manifest);
        const StepAggregate& last = mc.steps.back();
        out << "runs=" << n << " final hd_true mean=" << last.hd_true.mean << " (3sigma " << 3 * last.hd_true.sd
            << ") cumulative transitions mean=" << last.cumulative_transitions_mean.mean << "\n";
        out << "wrote " << csv_path.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        manifest["status"] = "failed";
        manifest["error"] = e.what();
        write_json_file(manifest_path, manifest);
        err << "runtime error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_verify(const GlobalOptions& g, const std::string& suite, std::ostream& out, std::ostream& err) {
    std::vector<std::string> names;
    if (suite == "all") names = verify_suite_names();
    else names.push_back(suite);
    const std::uint64_t seed = g.seed.value_or(1);
    bool ok = true;
    for (const auto& name : names) {
        SuiteReport rep;
        try {
            rep = run_verify_suite(name, seed, &out);
        } catch (const std::invalid_argument& e) {
            err << e.what() << "\n";
            return 1;
        }
        for (const auto& c : rep.checks)
            out << (c.passed ? "PASS " : "FAIL ") << rep.suite << ": " << c.name
                << (c.detail.empty() ? "" : " [" + c.detail + "]") << "\n";
        ok &= rep.passed();
    }
    return ok ? 0 : 2;
}

int cmd_plan(const GlobalOptions& g, double eps_bin, double eps_conv, bool check, std::size_t trials,
             const std::string& formation, std::ostream& out, std::ostream& err) {
    if (!(eps_bin > 0.0) || !(eps_conv > 0.0)) {
        err << "plan: tolerances must be positive\n";
        return 1;
    }
    const ConvergencePlan p = plan_convergence(eps_bin, eps_conv);
    out << p.m_min << "\n";
    if (!check) return 0;
    DensityVector pi = DensityVector::uniform(25);
    if (!formation.empty()) {
        try {
            pi = DensityVector::from_weights(read_formation_file(formation).weights);
        } catch (const std::exception& e) {
            err << "config error: " << e.what() << "\n";
            return 1;
        }
    }
    const auto rates = lln_check(pi, p.m_min, trials, eps_bin, g.seed.value_or(1));
    double worst = 0.0;
    out << "bin,pi,violation_rate\n";
    for (std::size_t i = 0; i < rates.size(); ++i) {
        out << i << ',' << pi[i] << ',' << rates[i] << "\n";
        worst = std::max(worst, rates[i]);
    }
    out << "max violation rate " << worst << (worst <= eps_conv ? " <= " : " > ") << eps_conv << "\n";
    return worst <= eps_conv ? 0 : 2;
}

int cmd_preview(const GlobalOptions& g, const std::string& file, std::ostream& out, std::ostream& err) {
    try {
        std::string path = file;
        if (path.empty()) {
            const Loaded l = load(g, "");
            path = l.config.formation_file;
        }
        const FormationRaster raster = read_formation_file(path);
        const Grid grid(raster.width, raster.height);
        const Formation f(DensityVector::from_weights(raster.weights));
        out << render_density(grid, f.pi());
        out << raster.width << "x" << raster.height << " bins, " << f.n_rec() << " recurrent, pi_min "
            << f.pi().min_positive() << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Probabilistic swarm guidance simulator"};
    app.require_subcommand(1);
    app.fallthrough();
    app.footer(config_help());
    GlobalOptions g;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "base seed (overrides swarm.seed)");
    app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();
    app.add_option("--config", g.config, "scenario config file");
    app.add_option("--override", g.overrides, "section.key=value (repeatable)");

    std::string cfg;
    auto* run_cmd = app.add_subcommand("run", "simulate one scenario and write metrics.csv");
    run_cmd->add_option("config", cfg, "scenario config file");

    std::size_t runs = 0, threads = 0;
    auto* mc_cmd = app.add_subcommand("monte-carlo", "independent runs aggregated into mean and 3-sigma columns");
    mc_cmd->add_option("config", cfg, "scenario config file");
    mc_cmd->add_option("--runs", runs, "number of runs (default monte-carlo.runs)");
    mc_cmd->add_option("--threads", threads, "worker threads (default: hardware)");

    std::string suite = "all";
    auto* verify_cmd = app.add_subcommand("verify", "numerical invariant suites");
    verify_cmd->add_option("suite", suite, "all | stationarity | constraints | hellinger | consensus | ergodicity | "
                                           "floor | lln | orbit");

    double eps_bin = 0.0, eps_conv = 0.0;
    bool check = false;
    std::size_t trials = 2000;
    std::string plan_formation;
    auto* plan_cmd = app.add_subcommand("plan", "minimum agent count for bin tolerance and confidence");
    plan_cmd->add_option("eps_bin", eps_bin, "per-bin error tolerance")->required();
    plan_cmd->add_option("eps_conv", eps_conv, "allowed violation probability")->required();
    plan_cmd->add_flag("--check", check, "append empirical violation rates");
    plan_cmd->add_option("--trials", trials, "trials for --check")->capture_default_str();
    plan_cmd->add_option("--formation", plan_formation, "density for --check (default uniform over 25 bins)");

    std::string preview_file;
    auto* formation_cmd = app.add_subcommand("formation", "formation utilities");
    formation_cmd->require_subcommand(1);
    auto* preview_cmd = formation_cmd->add_subcommand("preview", "ASCII rendering of a formation");
    preview_cmd->add_option("file", preview_file, "formation file (default: formation.file of --config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    if (*seed_opt) g.seed = seed;

    try {
        if (*run_cmd) return cmd_run(g, cfg, out, err);
        if (*mc_cmd) return cmd_monte_carlo(g, cfg, runs, threads, out, err);
        if (*verify_cmd) return cmd_verify(g, suite, out, err);
        if (*plan_cmd) return cmd_plan(g, eps_bin, eps_conv, check, trials, plan_formation, out, err);
        if (*preview_cmd) return cmd_preview(g, preview_file, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

int run_cli(int argc, const char* const* argv) { return run_cli(argc, argv, std::cout, std::cerr); }

} // namespace psg
