#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace psg {

inline constexpr double kMassTolerance = 1e-12;

/// Nonnegative vector over bins that sums to one. Houses the desired
/// formation, swarm distributions, and per-agent estimates.
class DensityVector {
public:
    DensityVector() = default;

    /// Validates without renormalizing: entries in [0,1], sum within 1e-12 of one.
    explicit DensityVector(std::vector<double> values);

    /// Normalizes nonnegative weights once. Throws on negative or all-zero input.
    static DensityVector from_weights(std::span<const double> weights);

    /// Exact histogram / total. Counts must not all be zero.
    static DensityVector from_counts(std::span<const std::size_t> counts);

    static DensityVector point_mass(std::size_t n, std::size_t bin);
    static DensityVector uniform(std::size_t n);

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }

    /// Smallest strictly positive entry.
    double min_positive() const;

    friend bool operator==(const DensityVector&, const DensityVector&) = default;

private:
    std::vector<double> values_;
};

/// Row-stochastic square matrix with entries in [0,1].
class TransitionMatrix {
public:
    TransitionMatrix() = default;

    /// Validates rows sum to one within `tolerance` and entries lie in [0,1].
    explicit TransitionMatrix(Eigen::MatrixXd m, double tolerance = kMassTolerance);

    static TransitionMatrix identity(std::size_t n);
    /// Rank-one matrix whose rows all equal `row`.
    static TransitionMatrix rank_one(const DensityVector& row);

    std::size_t size() const noexcept { return static_cast<std::size_t>(m_.rows()); }
    double operator()(std::size_t i, std::size_t j) const {
        return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    const Eigen::MatrixXd& matrix() const noexcept { return m_; }

    /// Row i as a contiguous vector.
    std::vector<double> row(std::size_t i) const;

    /// Left action x M for a row vector x.
    Eigen::RowVectorXd left_multiply(const DensityVector& x) const;

private:
    Eigen::MatrixXd m_;
};

/// Largest deviation of any row sum from one.
double max_row_sum_error(const Eigen::MatrixXd& m);

/// ||x M - x||_inf, the stationarity residual of x under M.
double stationarity_residual(const DensityVector& x, const TransitionMatrix& m);

Eigen::RowVectorXd to_row(const DensityVector& v);

} // namespace psg
