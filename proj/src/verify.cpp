#include "psg/verify.hpp"

#include "psg/consensus.hpp"
#include "psg/engine.hpp"
#include "psg/guidance.hpp"
#include "psg/orbit.hpp"
#include "psg/random.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace psg {

bool SuiteReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

namespace {

std::string fmt(const char* label, double v) {
    std::ostringstream os;
    os.precision(6);
    os << label << '=' << v;
    return os.str();
}

DensityVector random_pi(Rng& rng, std::size_t n) {
    std::vector<double> w(n);
    for (auto& x : w) x = rng.bernoulli(0.3) ? 0.0 : rng.uniform01();
    w[rng.uniform_index(n)] += 0.5;
    return DensityVector::from_weights(w);
}

AlphaVector random_alpha(Rng& rng, std::size_t n) {
    std::vector<double> a(n);
    for (auto& x : a) x = 0.05 + 0.95 * rng.uniform01();
    a[rng.uniform_index(n)] = 1.0;
    const double peak = *std::max_element(a.begin(), a.end());
    for (auto& x : a) x /= peak;
    return AlphaVector(std::move(a));
}

// Symmetric 0/1 matrix with unit diagonal, connected through a random spanning tree.
ConstraintMatrix random_constraints(Rng& rng, std::size_t n, double density) {
    std::vector<std::uint8_t> a(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] = 1;
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t j = rng.uniform_index(i);
        a[i * n + j] = a[j * n + i] = 1;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.bernoulli(density)) a[i * n + j] = a[j * n + i] = 1;
    return ConstraintMatrix(n, std::move(a));
}

double detailed_balance_error(const DensityVector& pi, const TransitionMatrix& m) {
    double worst = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t l = 0; l < m.size(); ++l) worst = std::max(worst, std::abs(pi[i] * m(i, l) - pi[l] * m(l, i)));
    return worst;
}

SuiteReport stationarity(std::uint64_t seed) {
    Rng rng(seed);
    double resid = 0.0, rows = 0.0, balance = 0.0, min_entry = 1.0;
    const int cases = 200;
    for (int t = 0; t < cases; ++t) {
        const std::size_t n = 3 + rng.uniform_index(98);
        const DensityVector pi = random_pi(rng, n);
        const TransitionMatrix m = build_markov(pi, rng.uniform01(), random_alpha(rng, n));
        resid = std::max(resid, stationarity_residual(pi, m));
        rows = std::max(rows, max_row_sum_error(m.matrix()));
        balance = std::max(balance, detailed_balance_error(pi, m));
        min_entry = std::min(min_entry, m.matrix().minCoeff());
    }
    SuiteReport r{"stationarity", {}};
    r.checks.push_back({"pi M = pi over 200 random triples", resid <= 1e-12, fmt("max_residual", resid)});
    r.checks.push_back({"row sums", rows <= 1e-12, fmt("max_row_error", rows)});
    r.checks.push_back({"nonnegative entries", min_entry >= 0.0, fmt("min_entry", min_entry)});
    r.checks.push_back({"detailed balance", balance <= 1e-12, fmt("max_error", balance)});
    return r;
}

SuiteReport constraints(std::uint64_t seed) {
    Rng rng(seed);
    double resid = 0.0, leak = 0.0, rows = 0.0;
    const int cases = 200;
    for (int t = 0; t < cases; ++t) {
        const std::size_t n = 3 + rng.uniform_index(38);
        const DensityVector pi = random_pi(rng, n);
        const ConstraintMatrix a = random_constraints(rng, n, rng.uniform01() * 0.5);
        const TransitionMatrix mt = apply_constraints(build_markov(pi, rng.uniform01(), random_alpha(rng, n)), a);
        resid = std::max(resid, stationarity_residual(pi, mt));
        rows = std::max(rows, max_row_sum_error(mt.matrix()));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t l = 0; l < n; ++l)
                if (!a.allowed(i, l)) leak = std::max(leak, mt(i, l));
    }
    SuiteReport r{"constraints", {}};
    r.checks.push_back({"blocked entries are zero", leak == 0.0, fmt("max_blocked_entry", leak)});
    r.checks.push_back({"pi M~ = pi over 200 random cases", resid <= 1e-12, fmt("max_residual", resid)});
    r.checks.push_back({"row sums", rows <= 1e-12, fmt("max_row_error", rows)});
    return r;
}

SuiteReport hellinger_suite(std::uint64_t) {
    const DensityVector pi({0.0, 0.0, 0.4, 0.0, 0.6});
    const DensityVector f1({0.1, 0.0, 0.4, 0.0, 0.5});
    const DensityVector f2({0.0, 0.0, 0.5, 0.0, 0.5});
    const double d1 = hellinger(pi, f1), d2 = hellinger(pi, f2);
    auto l1 = [](const DensityVector& p, const DensityVector& q) {
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
        return s;
    };
    SuiteReport r{"hellinger", {}};
    r.checks.push_back({"D_H(pi, F1) = 0.2286", std::abs(d1 - 0.2286) <= 5e-5, fmt("value", d1)});
    r.checks.push_back({"D_H(pi, F2) = 0.0712", std::abs(d2 - 0.0712) <= 5e-5, fmt("value", d2)});
    r.checks.push_back({"l1 distances both 0.2", std::abs(l1(pi, f1) - 0.2) <= 1e-15 && std::abs(l1(pi, f2) - 0.2) <= 1e-15,
                        fmt("l1_F1", l1(pi, f1)) + " " + fmt("l1_F2", l1(pi, f2))});
    const DensityVector a({1.0, 0.0}), b({0.0, 1.0});
    r.checks.push_back({"disjoint supports give 1", hellinger(a, b) == 1.0, fmt("value", hellinger(a, b))});
    return r;
}

SuiteReport consensus_suite(std::uint64_t seed) {
    Rng rng(seed);
    double worst_ratio = 0.0, mean_drift = 0.0;
    std::size_t max_loops = 0;
    const int cases = 100;
    for (int t = 0; t < cases; ++t) {
        const std::size_t m = 5 + rng.uniform_index(196);
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        for (std::size_t i = 1; i < m; ++i) edges.emplace_back(rng.uniform_index(i), i);
        const std::size_t extra = rng.uniform_index(2 * m);
        for (std::size_t e = 0; e < extra; ++e) {
            const std::size_t a = rng.uniform_index(m), b = rng.uniform_index(m);
            if (a != b) edges.emplace_back(a, b);
        }
        const WeightMatrix w = metropolis_weights(CommGraph::from_edges(m, edges));
        const std::size_t bins = 2 + rng.uniform_index(20);
        Eigen::MatrixXd est(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(bins));
        for (std::size_t j = 0; j < m; ++j) {
            std::vector<double> v(bins);
            for (auto& x : v) x = rng.uniform01();
            const DensityVector d = DensityVector::from_weights(v);
            for (std::size_t i = 0; i < bins; ++i) est(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d[i];
        }
        const Eigen::RowVectorXd mean = est.colwise().mean();
        std::vector<double> truth_v(mean.data(), mean.data() + mean.size());
        const double total = std::accumulate(truth_v.begin(), truth_v.end(), 0.0);
        for (auto& x : truth_v) x /= total;
        const DensityVector truth(truth_v);
        const std::size_t loops = required_loops(second_singular_value(w), m, 1.0 / static_cast<double>(m));
        max_loops = std::max(max_loops, loops);
        for (std::size_t n = 0; n < loops; ++n) est = linop_round(est, w);
        worst_ratio = std::max(worst_ratio, disagreement(est, truth).norm * static_cast<double>(m));
        mean_drift = std::max(mean_drift, (est.colwise().mean() - mean).cwiseAbs().maxCoeff());
    }
    SuiteReport r{"consensus", {}};
    r.checks.push_back({"||theta||_2 <= 1/m after the required loops (100 graphs)", worst_ratio <= 1.0,
                        fmt("max m*||theta||", worst_ratio) + " " + fmt("max_loops", static_cast<double>(max_loops))});
    r.checks.push_back({"ensemble mean preserved", mean_drift <= 1e-12, fmt("max_drift", mean_drift)});
    return r;
}

SuiteReport ergodicity(std::uint64_t seed, std::ostream* trace) {
    Rng rng(seed);
    const Grid grid(5, 1);
    const Formation f(DensityVector::from_weights(std::vector<double>{1, 2, 3, 2, 1}));
    const std::size_t m = 20;
    const double xi_min = ergodicity_floor(m, grid, f).xi_min;
    std::vector<TransitionMatrix> chain;
    std::vector<double> dist;
    for (int k = 0; k < 30; ++k) {
        const double xi = xi_min + (1.0 - xi_min) * rng.uniform01();
        chain.push_back(build_markov(f.pi(), xi, alpha_vector(grid, rng.uniform_index(5))));
        dist.push_back(max_row_l1_distance(chain_product(chain), f.pi()));
        if (trace) *trace << "  k=" << k + 1 << " xi=" << xi << " max_row_l1=" << dist.back() << "\n";
    }
    bool monotone = true;
    for (std::size_t k = 1; k < dist.size(); ++k) monotone &= dist[k] <= dist[k - 1] + 1e-15;
    SuiteReport r{"ergodicity", {}};
    r.checks.push_back({"product of 30 matrices within 1e-3 of 1 pi", dist.back() < 1e-3, fmt("distance", dist.back())});
    r.checks.push_back({"distance non-increasing", monotone, ""});
    return r;
}

SuiteReport floor_suite(std::uint64_t seed) {
    Rng rng(seed);
    double worst = std::numeric_limits<double>::infinity(), worst_mod = worst;
    for (int t = 0; t < 100; ++t) {
        const Grid grid(1 + rng.uniform_index(6), 1 + rng.uniform_index(6));
        const Formation f(random_pi(rng, grid.n_cell()));
        const std::size_t m = 2 + rng.uniform_index(999);
        const ErgodicityFloor fl = ergodicity_floor(m, grid, f);
        const double xi = fl.xi_min + (1.0 - fl.xi_min) * rng.uniform01();
        const std::size_t c = f.recurrent()[rng.uniform_index(f.n_rec())];
        const TransitionMatrix mk = build_markov(f.pi(), xi, alpha_vector(grid, c));
        const TransitionMatrix mm = apply_constraints(mk, motion_constraints(grid, 1.0));
        for (Eigen::Index i = 0; i < mk.matrix().size(); ++i) {
            const double v = mk.matrix().data()[i];
            if (v > 0.0) worst = std::min(worst, v / fl.gamma);
            const double w = mm.matrix().data()[i];
            if (w > 0.0) worst_mod = std::min(worst_mod, w / fl.gamma);
        }
    }
    SuiteReport r{"floor", {}};
    r.checks.push_back({"positive entries of M >= gamma (100 formations)", worst >= 1.0 - 1e-12,
                        fmt("min entry/gamma", worst)});
    // Reported only: the floor is not claimed for the modified matrix.
    r.checks.push_back({"positive entries of M~ relative to gamma (informational)", true, fmt("min entry/gamma", worst_mod)});
    return r;
}

SuiteReport lln_suite(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> w(25);
    for (auto& x : w) x = 0.2 + rng.uniform01();
    const DensityVector pi = DensityVector::from_weights(w);
    const std::size_t m = min_agents(0.05, 0.1);
    const auto rates = lln_check(pi, m, 2000, 0.05, seed + 1);
    const double worst = *std::max_element(rates.begin(), rates.end());
    SuiteReport r{"lln", {}};
    r.checks.push_back({"min_agents(0.05, 0.1) = 1000", m == 1000, fmt("m_min", static_cast<double>(m))});
    r.checks.push_back({"per-bin violation rate <= 0.1", worst <= 0.1, fmt("max_rate", worst)});
    return r;
}

SuiteReport orbit_suite(std::uint64_t seed) {
    Rng rng(seed);
    const OrbitGridAdapter orbit{Grid(30, 30)};
    const Point p0 = orbit_centroid(0, 0, 0), p1 = orbit_centroid(15, 0, 5);
    double err = 0.0;
    bool periodic = true;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t i = rng.uniform_index(900);
        const std::uint64_t k = rng.uniform_index(10000);
        const Point p = orbit.bin_centroid_at(i, k);
        const long double x = static_cast<long double>(i % 30), y = static_cast<long double>(i / 30);
        const long double ph = std::numbers::pi_v<long double> * (static_cast<long double>(k) / 10.0L + y / 300.0L);
        err = std::max({err, std::abs(p[0] - static_cast<double>(0.5L * (1 + x / 15) * std::sin(ph))),
                        std::abs(p[1] - static_cast<double>((1 + x / 15) * std::cos(ph)))});
        periodic &= orbit.bin_centroid_at(i, k + OrbitGridAdapter::kPeriod) == p;
    }
    SuiteReport r{"orbit", {}};
    r.checks.push_back({"kappa(x=0, y=0, k=0) = (0, 1)", std::abs(p0[0]) <= 1e-15 && std::abs(p0[1] - 1) <= 1e-15,
                        fmt("x", p0[0]) + " " + fmt("y", p0[1])});
    r.checks.push_back({"kappa(x=15, y=0, k=5) = (1, 0)", std::abs(p1[0] - 1) <= 1e-15 && std::abs(p1[1]) <= 1e-15,
                        fmt("x", p1[0]) + " " + fmt("y", p1[1])});
    r.checks.push_back({"matches direct evaluation", err <= 1e-15, fmt("max_error", err)});
    r.checks.push_back({"period 20", periodic, ""});
    return r;
}

} // namespace

const std::vector<std::string>& verify_suite_names() {
    static const std::vector<std::string> names = {"stationarity", "constraints", "hellinger", "consensus",
                                                   "ergodicity",   "floor",       "lln",       "orbit"};
    return names;
}

SuiteReport run_verify_suite(const std::string& name, std::uint64_t seed, std::ostream* trace) {
    if (name == "stationarity") return stationarity(seed);
    if (name == "constraints") return constraints(seed);
    if (name == "hellinger") return hellinger_suite(seed);
    if (name == "consensus") return consensus_suite(seed);
    if (name == "ergodicity") return ergodicity(seed, trace);
    if (name == "floor") return floor_suite(seed);
    if (name == "lln") return lln_suite(seed);
    if (name == "orbit") return orbit_suite(seed);
    throw std::invalid_argument("unknown verify suite '" + name + "'");
}

} // namespace psg
