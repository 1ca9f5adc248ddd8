#include <doctest.h>

#include "psg/guidance.hpp"
#include "psg/random.hpp"

#include <cmath>

using namespace psg;

namespace {

DensityVector random_pi(Rng& rng, std::size_t n, double zero_rate = 0.3) {
    std::vector<double> w(n);
    for (auto& x : w) x = rng.bernoulli(zero_rate) ? 0.0 : rng.uniform01();
    w[rng.uniform_index(n)] = 1.0;
    return DensityVector::from_weights(w);
}

AlphaVector random_alpha(Rng& rng, std::size_t n) {
    std::vector<double> a(n);
    for (auto& x : a) x = 0.01 + 0.99 * rng.uniform01();
    a[rng.uniform_index(n)] = 1.0;
    return AlphaVector(a);
}

// pi M by explicit loops.
std::vector<double> left_mult(const DensityVector& pi, const TransitionMatrix& m) {
    std::vector<double> out(pi.size(), 0.0);
    for (std::size_t i = 0; i < pi.size(); ++i)
        for (std::size_t l = 0; l < pi.size(); ++l) out[l] += pi[i] * m(i, l);
    return out;
}

} // namespace

TEST_SUITE("guidance") {

TEST_CASE("hellinger examples") {
    const DensityVector pi({0, 0, 0.4, 0, 0.6});
    CHECK(std::abs(hellinger(pi, DensityVector({0.1, 0, 0.4, 0, 0.5})) - 0.2286) <= 5e-5);
    CHECK(std::abs(hellinger(pi, DensityVector({0, 0, 0.5, 0, 0.5})) - 0.0712) <= 5e-5);
    CHECK(hellinger(pi, pi) == 0.0);
    CHECK(hellinger(DensityVector({1, 0}), DensityVector({0, 1})) == 1.0);
    CHECK_THROWS(hellinger(DensityVector({1, 0}), DensityVector({1.0})));
}

TEST_CASE("hellinger properties") {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + rng.uniform_index(20);
        const auto p = random_pi(rng, n), q = random_pi(rng, n);
        const double d = hellinger(p, q);
        REQUIRE(d == hellinger(q, p));
        REQUIRE(d >= 0.0);
        REQUIRE(d <= 1.0);
        double bc = 0.0;
        for (std::size_t i = 0; i < n; ++i) bc += std::sqrt(p[i] * q[i]);
        REQUIRE(d == doctest::Approx(std::sqrt(std::max(0.0, 1.0 - bc))).epsilon(1e-6).scale(1e-7));
    }
}

TEST_CASE("alpha vector examples") {
    const auto a = alpha_vector(Grid(3, 1), 1);
    CHECK(a[0] == 0.5);
    CHECK(a[1] == 1.0);
    CHECK(a[2] == 0.5);
    CHECK(alpha_vector(Grid(1, 1), 0)[0] == 1.0);
    const Grid g(7, 4);
    for (std::size_t c = 0; c < g.n_cell(); ++c) {
        const auto v = alpha_vector(g, c);
        REQUIRE(v[c] == 1.0);
        for (double x : v.values()) REQUIRE(x > 0.0);
    }
    CHECK_THROWS(AlphaVector({0.5, 0.5}));
    CHECK_THROWS(AlphaVector({1.0, 0.0}));
}

TEST_CASE("build markov examples") {
    const DensityVector pi({0.5, 0.5});
    const AlphaVector ones({1.0, 1.0});
    const auto m = build_markov(pi, 0.5, ones);
    CHECK(m(0, 0) == 0.75);
    CHECK(m(0, 1) == 0.25);
    CHECK(m(1, 0) == 0.25);
    const auto id = build_markov(DensityVector({0.2, 0.3, 0.5}), 0.0, AlphaVector({1.0, 0.4, 0.7}));
    CHECK(id.matrix() == Eigen::MatrixXd::Identity(3, 3));
    // xi = 1 with unit alpha is the rank-one matrix 1 pi.
    const DensityVector p3({0.2, 0.3, 0.5});
    CHECK((build_markov(p3, 1.0, AlphaVector({1, 1, 1})).matrix() - TransitionMatrix::rank_one(p3).matrix())
              .cwiseAbs()
              .maxCoeff() <= 1e-15);
}

TEST_CASE("markov family properties") {
    Rng rng(17);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + rng.uniform_index(40);
        const auto pi = random_pi(rng, n);
        const auto alpha = random_alpha(rng, n);
        const double xi = rng.uniform01();
        const auto m = build_markov(pi, xi, alpha);
        const auto pm = left_mult(pi, m);
        for (std::size_t l = 0; l < n; ++l) REQUIRE(std::abs(pm[l] - pi[l]) <= 1e-12);
        REQUIRE(m.matrix().minCoeff() >= 0.0);
        REQUIRE(max_row_sum_error(m.matrix()) <= 1e-12);
        double pa = 0.0;
        for (std::size_t i = 0; i < n; ++i) pa += pi[i] * alpha[i];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t l = 0; l < n; ++l) {
                REQUIRE(std::abs(pi[i] * m(i, l) - pi[l] * m(l, i)) <= 1e-12);
                if (i != l) {
                    REQUIRE(m(i, l) == doctest::Approx(xi / pa * alpha[i] * pi[l] * alpha[l]).epsilon(1e-12));
                    if (pi[l] == 0.0) REQUIRE(m(i, l) == 0.0); // transient columns
                }
            }
        // Off-diagonal mass is linear in xi.
        const auto half = build_markov(pi, xi / 2, alpha);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t l = 0; l < n; ++l)
                if (i != l) REQUIRE(half(i, l) == doctest::Approx(m(i, l) / 2).epsilon(1e-12));
    }
}

TEST_CASE("all-recurrent formations give a positive matrix") {
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 2 + rng.uniform_index(20);
        const auto pi = random_pi(rng, n, 0.0);
        const auto m = build_markov(pi, 0.01 + 0.99 * rng.uniform01(), random_alpha(rng, n));
        REQUIRE(m.matrix().minCoeff() > 0.0);
    }
}

TEST_CASE("markov row matches the matrix") {
    Rng rng(12);
    const Grid g(6, 5);
    const auto pi = random_pi(rng, g.n_cell());
    const auto alpha = alpha_vector(g, 7);
    const auto a = motion_constraints(g, 2.0);
    const auto m = build_markov(pi, 0.37, alpha);
    const auto mt = apply_constraints(m, a);
    std::vector<double> row(g.n_cell());
    for (std::size_t i = 0; i < g.n_cell(); ++i) {
        markov_row(pi, 0.37, alpha, weighted_mass(pi, alpha), i, row);
        for (std::size_t l = 0; l < g.n_cell(); ++l) REQUIRE(row[l] == doctest::Approx(m(i, l)).epsilon(1e-14));
        constrained_markov_row(pi, 0.37, alpha, weighted_mass(pi, alpha), a, i, row);
        for (std::size_t l = 0; l < g.n_cell(); ++l) REQUIRE(row[l] == doctest::Approx(mt(i, l)).epsilon(1e-14));
    }
}

TEST_CASE("constraint modification") {
    const DensityVector pi({0.2, 0.3, 0.5});
    const AlphaVector alpha({1.0, 0.6, 0.8});
    const auto m = build_markov(pi, 0.9, alpha);
    CHECK(apply_constraints(m, ConstraintMatrix::unconstrained(3)).matrix() == m.matrix());
    CHECK_THROWS_AS(ConstraintMatrix(3, {1, 0, 0, 0, 1, 0, 0, 0, 1}), std::invalid_argument);

    // Block 0 <-> 2 only.
    const ConstraintMatrix a(3, {1, 1, 0, 1, 1, 1, 0, 1, 1});
    const auto mt = apply_constraints(m, a);
    CHECK(mt(0, 2) == 0.0);
    CHECK(mt(2, 0) == 0.0);
    CHECK(mt(0, 0) == doctest::Approx(m(0, 0) + m(0, 2)));
    const auto pm = left_mult(pi, mt);
    for (std::size_t l = 0; l < 3; ++l) CHECK(std::abs(pm[l] - pi[l]) <= 1e-15);
}

TEST_CASE("constraint modification keeps stationarity on random cases") {
    Rng rng(23);
    for (int t = 0; t < 100; ++t) {
        const Grid g(1 + rng.uniform_index(7), 1 + rng.uniform_index(7));
        const auto pi = random_pi(rng, g.n_cell());
        const auto a = motion_constraints(g, static_cast<double>(1 + rng.uniform_index(3)));
        const auto mt = apply_constraints(build_markov(pi, rng.uniform01(), random_alpha(rng, g.n_cell())), a);
        const auto pm = left_mult(pi, mt);
        for (std::size_t l = 0; l < g.n_cell(); ++l) REQUIRE(std::abs(pm[l] - pi[l]) <= 1e-12);
        for (std::size_t i = 0; i < g.n_cell(); ++i)
            for (std::size_t l = 0; l < g.n_cell(); ++l)
                if (!a.allowed(i, l)) REQUIRE(mt(i, l) == 0.0);
    }
}

TEST_CASE("trapping corridor") {
    // Bins 0, 1, 2 on a line with one-step moves; formation on bin 2.
    const Grid line(3, 1);
    const Formation f(DensityVector::point_mass(3, 2));
    const auto a = motion_constraints(line, 1.0);
    const auto trapped = trapping_set(a, f);
    CHECK(trapped == std::vector<std::size_t>{0});
    const auto psi = escape_targets(a, f, trapped);
    CHECK(psi.at(0) == 1);
    const auto c = escape_matrix(a, f, trapped, psi);
    CHECK(c(0, 1) == 1.0);
    CHECK(c(1, 2) == 1.0);
    CHECK(c(2, 2) == 1.0);

    CHECK(trapping_set(ConstraintMatrix::unconstrained(3), f).empty());
    CHECK(trapping_set(a, Formation(DensityVector::uniform(3))).empty());
    CHECK(escape_targets(a, Formation(DensityVector::uniform(3)), {}).empty());
}

TEST_CASE("escape matrix splits over reachable recurrent bins") {
    const Grid line(3, 1);
    const Formation f(DensityVector({0.5, 0.0, 0.5}));
    const auto t = analyze_trapping(motion_constraints(line, 1.0), f);
    CHECK(t.trapped.empty());
    CHECK(t.C(1, 0) == 0.5);
    CHECK(t.C(1, 2) == 0.5);
    CHECK(t.C(0, 0) == 1.0);
}

TEST_CASE("escape chains are acyclic and leave the trapping set") {
    Rng rng(41);
    for (int t = 0; t < 100; ++t) {
        const Grid g(2 + rng.uniform_index(8), 2 + rng.uniform_index(8));
        std::vector<double> w(g.n_cell(), 0.0);
        w[rng.uniform_index(w.size())] = 1.0;
        if (rng.bernoulli(0.5)) w[rng.uniform_index(w.size())] = 1.0;
        const Formation f(DensityVector::from_weights(w));
        const auto a = motion_constraints(g, 1.0);
        if (!check_pi_connectivity(f, a)) continue;
        const auto tr = analyze_trapping(a, f);
        for (std::size_t start : tr.trapped) {
            std::size_t bin = start, hops = 0;
            while (tr.is_trapped[bin]) {
                const std::size_t next = tr.escape.at(bin);
                REQUIRE(a.allowed(bin, next));
                bin = next;
                REQUIRE(++hops <= g.n_cell());
            }
        }
    }
}

TEST_CASE("select transition") {
    const std::vector<double> point{0, 1, 0};
    CHECK(select_transition(point, 0.0) == 1);
    CHECK(select_transition(point, 0.999) == 1);
    const std::vector<double> half{0.5, 0.5};
    CHECK(select_transition(half, 0.25) == 0);
    CHECK(select_transition(half, 0.75) == 1);
    CHECK(select_transition(half, 0.5) == 1);
    const std::vector<double> lead{0, 0, 0.3, 0.7};
    CHECK(select_transition(lead, 0.0) == 2);
    const std::vector<double> bad{0.5, 0.4};
    CHECK_THROWS(select_transition(bad, 0.1));
    CHECK_THROWS(select_transition(half, 1.0));
}

TEST_CASE("ergodicity floor") {
    const Grid g(3, 3);
    const auto f2 = ergodicity_floor(2, g, Formation(DensityVector::uniform(9)));
    CHECK(f2.xi_min == doctest::Approx(0.1767766953));
    CHECK(f2.pi_min == doctest::Approx(1.0 / 9));
    CHECK(f2.alpha_min == doctest::Approx(1.0 / 5));
    CHECK(f2.gamma == doctest::Approx(f2.xi_min * f2.alpha_min * f2.alpha_min * f2.pi_min));
    CHECK(ergodicity_floor(10, Grid(1, 1), Formation(DensityVector::uniform(1))).alpha_min == 1.0);
    CHECK_THROWS(ergodicity_floor(1, g, Formation(DensityVector::uniform(9))));
}

TEST_CASE("positive entries stay above gamma") {
    Rng rng(29);
    for (int t = 0; t < 100; ++t) {
        const Grid g(1 + rng.uniform_index(6), 1 + rng.uniform_index(6));
        const Formation f(random_pi(rng, g.n_cell()));
        const std::size_t m = 2 + rng.uniform_index(500);
        const auto fl = ergodicity_floor(m, g, f);
        const double xi = fl.xi_min + (1 - fl.xi_min) * rng.uniform01();
        const auto mk = build_markov(f.pi(), xi, alpha_vector(g, f.recurrent()[rng.uniform_index(f.n_rec())]));
        for (Eigen::Index i = 0; i < mk.matrix().size(); ++i) {
            const double v = mk.matrix().data()[i];
            if (v > 0.0) REQUIRE(v >= fl.gamma * (1 - 1e-12));
        }
    }
}

TEST_CASE("chain product") {
    std::vector<TransitionMatrix> ids(4, TransitionMatrix::identity(3));
    CHECK(chain_product(ids).matrix() == Eigen::MatrixXd::Identity(3, 3));
    Eigen::MatrixXd two(2, 2);
    two << 0.75, 0.25, 0.25, 0.75;
    std::vector<TransitionMatrix> twenty(20, TransitionMatrix(two));
    const DensityVector half({0.5, 0.5});
    CHECK(max_row_l1_distance(chain_product(twenty), half) <= 2e-4);
    // Repeated squaring oracle: (1/2)^20 off the stationary row in each entry.
    CHECK(chain_product(twenty)(0, 0) == doctest::Approx(0.5 + 0.5 * std::pow(0.5, 20)).epsilon(1e-12));
    const DensityVector pi({0.2, 0.8});
    std::vector<TransitionMatrix> mixed{TransitionMatrix(two), TransitionMatrix::rank_one(pi), TransitionMatrix(two)};
    const auto p = chain_product(mixed);
    const auto pm = TransitionMatrix(two).left_multiply(pi);
    CHECK(p(0, 0) == doctest::Approx(pm(0)));
    CHECK(p(1, 1) == doctest::Approx(pm(1)));
    CHECK_THROWS(chain_product(std::vector<TransitionMatrix>{}));
}

TEST_CASE("products of random family members approach 1 pi monotonically") {
    Rng rng(6);
    const Grid g(5, 1);
    const Formation f(random_pi(rng, 5, 0.0));
    const double xi_min = ergodicity_floor(50, g, f).xi_min;
    std::vector<TransitionMatrix> chain;
    double prev = 2.0;
    for (int k = 0; k < 30; ++k) {
        chain.push_back(build_markov(f.pi(), xi_min + (1 - xi_min) * rng.uniform01(), alpha_vector(g, rng.uniform_index(5))));
        const double d = max_row_l1_distance(chain_product(chain), f.pi());
        REQUIRE(d <= prev + 1e-15);
        prev = d;
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("xi history snap rule") {
    const SnapSettings s;
    const double xi_min = 0.01;
    XiHistory h;
    for (int i = 0; i < 9; ++i) CHECK_FALSE(h.push(0.015, xi_min, s));
    CHECK(h.push(0.015, xi_min, s));
    CHECK(h.values().size() == 10);
    // A jump above reset * xi_min clears the window.
    CHECK_FALSE(h.push(0.05, xi_min, s));
    CHECK(h.values().size() == 1);
    XiHistory spread;
    for (int i = 0; i < 10; ++i) spread.push(i % 2 ? 0.019 : 0.012, xi_min, s);
    CHECK_FALSE(spread.push(0.019, xi_min, s));
    SnapSettings off;
    off.enabled = false;
    XiHistory never;
    for (int i = 0; i < 20; ++i) CHECK_FALSE(never.push(0.0, xi_min, off));
}

}
