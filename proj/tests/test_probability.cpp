#include <doctest.h>

#include "psg/probability.hpp"

#include <vector>

using namespace psg;

TEST_SUITE("probability") {

TEST_CASE("density vector validation") {
    CHECK_NOTHROW(DensityVector({0.25, 0.75}));
    CHECK_THROWS_AS(DensityVector({0.5, 0.6}), std::invalid_argument);
    CHECK_THROWS_AS(DensityVector({-0.1, 1.1}), std::invalid_argument);
    CHECK_THROWS_AS(DensityVector(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("from_weights normalizes once") {
    const std::vector<double> w{1, 3, 0, 0};
    const auto d = DensityVector::from_weights(w);
    CHECK(d[0] == 0.25);
    CHECK(d[1] == 0.75);
    CHECK(d[2] == 0.0);
    CHECK_THROWS(DensityVector::from_weights(std::vector<double>{0, 0}));
    CHECK_THROWS(DensityVector::from_weights(std::vector<double>{1, -1, 2}));
}

TEST_CASE("from_counts is exact in units of 1/m") {
    const std::vector<std::size_t> c{3, 0, 4};
    const auto d = DensityVector::from_counts(c);
    CHECK(d[0] == 3.0 / 7.0);
    CHECK(d[2] == 4.0 / 7.0);
    CHECK(d.min_positive() == 3.0 / 7.0);
}

TEST_CASE("point mass and uniform") {
    const auto p = DensityVector::point_mass(4, 2);
    CHECK(p[2] == 1.0);
    CHECK(p[0] == 0.0);
    const auto u = DensityVector::uniform(8);
    CHECK(u[5] == 0.125);
}

TEST_CASE("transition matrix validation") {
    Eigen::MatrixXd m(2, 2);
    m << 0.75, 0.25, 0.25, 0.75;
    CHECK_NOTHROW(TransitionMatrix{m});
    m(0, 0) = 0.8;
    CHECK_THROWS(TransitionMatrix{m});
    CHECK_THROWS(TransitionMatrix{Eigen::MatrixXd::Ones(2, 3)});
    Eigen::MatrixXd neg(2, 2);
    neg << 1.5, -0.5, 0, 1;
    CHECK_THROWS(TransitionMatrix{neg});
}

TEST_CASE("rank one and stationarity residual") {
    const DensityVector pi({0.2, 0.3, 0.5});
    const auto r = TransitionMatrix::rank_one(pi);
    CHECK(stationarity_residual(pi, r) <= 1e-15);
    CHECK(r(2, 1) == 0.3);
    const auto i = TransitionMatrix::identity(3);
    CHECK(stationarity_residual(DensityVector({0.1, 0.1, 0.8}), i) == 0.0);
    CHECK(r.row(1) == std::vector<double>{0.2, 0.3, 0.5});
}

}
