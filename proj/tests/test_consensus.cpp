#include <doctest.h>

#include "psg/consensus.hpp"
#include "psg/random.hpp"

#include <cmath>

using namespace psg;

namespace {

DensityVector random_density(Rng& rng, std::size_t n) {
    std::vector<double> w(n);
    for (auto& x : w) x = rng.uniform01();
    return DensityVector::from_weights(w);
}

double frob_deviation(const Eigen::MatrixXd& est) {
    const Eigen::RowVectorXd mean = est.colwise().mean();
    return (est.rowwise() - mean).norm();
}

} // namespace

TEST_SUITE("consensus") {

TEST_CASE("comm graph examples") {
    const Grid line(5, 1);
    const std::vector<std::size_t> same{2, 2, 2};
    const CommGraph g = build_comm_graph(same, line, 0.0);
    CHECK(g.degree(0) == 2);
    CHECK(g.adjacent(1, 2));

    const std::vector<std::size_t> apart{0, 3};
    try {
        build_comm_graph(apart, line, 2.0);
        FAIL("expected a disconnected graph");
    } catch (const DisconnectedGraphError& e) {
        CHECK(e.components().size() == 2);
    }

    const std::vector<std::size_t> path{0, 1, 2};
    const CommGraph p = build_comm_graph(path, line, 1.0);
    CHECK(p.adjacent(0, 1));
    CHECK(p.adjacent(1, 2));
    CHECK_FALSE(p.adjacent(0, 2));
}

TEST_CASE("comm graph validation") {
    CHECK_THROWS(CommGraph(2, {{1}, {}}));
    CHECK_THROWS(CommGraph(2, {{0}, {}}));
}

TEST_CASE("metropolis weights") {
    CHECK(metropolis_weights(CommGraph(1, {{}})).P(0, 0) == 1.0);
    const std::vector<std::pair<std::size_t, std::size_t>> e{{0, 1}, {1, 2}};
    const auto w = metropolis_weights(CommGraph::from_edges(3, e));
    CHECK(w.P(0, 1) == doctest::Approx(1.0 / 3));
    CHECK(w.P(0, 2) == 0.0);
    CHECK(w.P(0, 0) == doctest::Approx(2.0 / 3));
    CHECK(w.P(1, 1) == doctest::Approx(1.0 / 3));
    CHECK(w.P(2, 2) == doctest::Approx(2.0 / 3));
}

TEST_CASE("metropolis weights are symmetric and doubly stochastic") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const std::size_t m = 2 + rng.uniform_index(40);
        std::vector<std::pair<std::size_t, std::size_t>> e;
        for (std::size_t i = 1; i < m; ++i) e.emplace_back(rng.uniform_index(i), i);
        for (std::size_t k = 0; k < m; ++k) {
            const auto a = rng.uniform_index(m), b = rng.uniform_index(m);
            if (a != b) e.emplace_back(a, b);
        }
        const auto g = CommGraph::from_edges(m, e);
        const auto w = metropolis_weights(g);
        REQUIRE((w.P - w.P.transpose()).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((w.P.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
        REQUIRE((w.P.colwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double v = w.P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (i != j && !g.adjacent(i, j)) REQUIRE(v == 0.0);
                if (v > 0.0) REQUIRE(v >= 1.0 / (1.0 + static_cast<double>(m)) - 1e-15);
            }
    }
}

TEST_CASE("second singular value examples") {
    CHECK(second_singular_value(uniform_weights(4)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(second_singular_value(WeightMatrix{Eigen::MatrixXd::Identity(3, 3)}) == doctest::Approx(1.0));
    const std::vector<std::pair<std::size_t, std::size_t>> e{{0, 1}, {1, 2}};
    CHECK(second_singular_value(metropolis_weights(CommGraph::from_edges(3, e))) == doctest::Approx(2.0 / 3));
    CHECK(second_singular_value(uniform_weights(1)) == 0.0);
}

TEST_CASE("required loops") {
    CHECK(required_loops(0.5, 4, 0.25) == 4);
    CHECK(required_loops(0.0, 10, 0.1) == 1);
    CHECK(required_loops(0.9, 4, 4.0) == 1);
    CHECK_THROWS_AS(required_loops(1.0, 4, 0.1), std::domain_error);
    // ln(0.1/2)/ln(0.9) = 28.43...
    CHECK(required_loops(0.9, 1, 0.1) == 29);
}

TEST_CASE("linop round examples") {
    Rng rng(2);
    std::vector<DensityVector> est{random_density(rng, 4), random_density(rng, 4)};
    const auto same = linop_round(est, WeightMatrix{Eigen::MatrixXd::Identity(2, 2)});
    CHECK(same[0] == est[0]);
    const auto avg = linop_round(est, uniform_weights(2));
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(avg[0][i] == doctest::Approx(0.5 * (est[0][i] + est[1][i])));
        CHECK(avg[1][i] == doctest::Approx(avg[0][i]));
    }
}

TEST_CASE("linop preserves the mean and contracts by sigma") {
    Rng rng(9);
    for (int t = 0; t < 30; ++t) {
        const std::size_t m = 3 + rng.uniform_index(30);
        std::vector<std::pair<std::size_t, std::size_t>> e;
        for (std::size_t i = 1; i < m; ++i) e.emplace_back(rng.uniform_index(i), i);
        const auto w = metropolis_weights(CommGraph::from_edges(m, e));
        const double sigma = second_singular_value(w);
        std::vector<DensityVector> est;
        for (std::size_t j = 0; j < m; ++j) est.push_back(random_density(rng, 6));
        Eigen::MatrixXd x = stack_rows(est);
        const Eigen::RowVectorXd mean0 = x.colwise().mean();
        for (int r = 0; r < 10; ++r) {
            const double before = frob_deviation(x);
            x = linop_round(x, w);
            REQUIRE(frob_deviation(x) <= sigma * before + 1e-12);
            REQUIRE((x.colwise().mean() - mean0).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("disagreement examples") {
    const DensityVector truth({0.5, 0.5, 0.0});
    const std::vector<DensityVector> eq{truth, truth};
    CHECK(disagreement(eq, truth).norm == 0.0);
    const std::vector<DensityVector> one{truth, DensityVector::point_mass(3, 2)};
    const auto d = disagreement(one, truth);
    CHECK(d.theta[1] == 2.0);
    CHECK(d.norm == 2.0);

    Rng rng(4);
    std::vector<DensityVector> est;
    for (int j = 0; j < 7; ++j) est.push_back(random_density(rng, 5));
    const DensityVector truth5 = random_density(rng, 5);
    const auto r = disagreement(est, truth5);
    double sq = 0.0;
    for (std::size_t j = 0; j < est.size(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < 5; ++i) s += std::abs(est[j][i] - truth5[i]);
        CHECK(r.theta[j] == doctest::Approx(s).epsilon(1e-14));
        sq += s * s;
    }
    CHECK(r.norm == doctest::Approx(std::sqrt(sq)));
    CHECK(r.norm <= 2.0 * std::sqrt(7.0));
}

TEST_CASE("bound after required loops on random graphs") {
    Rng rng(21);
    for (int t = 0; t < 20; ++t) {
        const std::size_t m = 5 + rng.uniform_index(60);
        std::vector<std::pair<std::size_t, std::size_t>> e;
        for (std::size_t i = 1; i < m; ++i) e.emplace_back(rng.uniform_index(i), i);
        const auto w = metropolis_weights(CommGraph::from_edges(m, e));
        const std::size_t bins = 8;
        std::vector<DensityVector> est;
        std::vector<std::size_t> counts(bins, 0);
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t b = rng.uniform_index(bins);
            ++counts[b];
            est.push_back(DensityVector::point_mass(bins, b));
        }
        Eigen::MatrixXd x = stack_rows(est);
        const std::size_t n = required_loops(second_singular_value(w), m, 1.0 / static_cast<double>(m));
        for (std::size_t r = 0; r < n; ++r) x = linop_round(x, w);
        REQUIRE(disagreement(x, DensityVector::from_counts(counts)).norm <= 1.0 / static_cast<double>(m));
    }
}

TEST_CASE("class reduction matches literal per-agent consensus") {
    Rng rng(31);
    for (int t = 0; t < 60; ++t) {
        const Grid grid(1 + rng.uniform_index(5), 1 + rng.uniform_index(5));
        const std::size_t m = 1 + rng.uniform_index(25);
        std::vector<std::size_t> bins(m), counts(grid.n_cell(), 0);
        for (auto& b : bins) {
            b = rng.uniform_index(grid.n_cell());
            ++counts[b];
        }
        ConsensusSettings cs;
        cs.radius = static_cast<double>(1 + rng.uniform_index(4));
        if (t % 3 == 0) cs.loops = 1 + rng.uniform_index(6);

        CommGraph g(1, {{}});
        try {
            g = build_comm_graph(bins, grid, cs.radius);
        } catch (const DisconnectedGraphError&) {
            CHECK_THROWS_AS(class_consensus(counts, grid, cs), DisconnectedGraphError);
            continue;
        }
        const auto w = metropolis_weights(g);
        const double sigma = second_singular_value(w);
        const auto cc = class_consensus(counts, grid, cs);
        REQUIRE(cc.sigma == doctest::Approx(sigma).epsilon(1e-9));
        const std::size_t n = cs.loops ? *cs.loops : required_loops(sigma, m, 1.0 / static_cast<double>(m));
        REQUIRE(cc.n_loop == n);

        std::vector<DensityVector> est;
        for (auto b : bins) est.push_back(DensityVector::point_mass(grid.n_cell(), b));
        Eigen::MatrixXd x = stack_rows(est);
        for (std::size_t r = 0; r < n; ++r) x = linop_round(x, w);
        const DensityVector truth = DensityVector::from_counts(counts);
        const double lit = disagreement(x, truth).norm;
        REQUIRE(std::abs(cc.theta_norm - lit) <= 1e-9 + 1e-6 * lit);
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t cls = static_cast<std::size_t>(
                std::lower_bound(cc.bins.begin(), cc.bins.end(), bins[j]) - cc.bins.begin());
            const DensityVector e = cc.estimate(cls, grid.n_cell());
            for (std::size_t i = 0; i < grid.n_cell(); ++i)
                REQUIRE(std::abs(e[i] - x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i))) <= 1e-9);
        }
    }
}

TEST_CASE("disconnected fallback uses uniform weights") {
    const Grid line(6, 1);
    std::vector<std::size_t> counts{2, 0, 0, 0, 0, 3};
    ConsensusSettings cs;
    cs.radius = 1.0;
    CHECK_THROWS_AS(class_consensus(counts, line, cs), DisconnectedGraphError);
    cs.on_disconnected = DisconnectedPolicy::CompleteGraph;
    const auto cc = class_consensus(counts, line, cs);
    CHECK(cc.fallback);
    CHECK(cc.sigma == 0.0);
    CHECK(cc.n_loop == 1);
    CHECK(cc.estimate(0, 6)[5] == doctest::Approx(0.6));
    CHECK(cc.theta_norm <= 1e-12);
}

}
