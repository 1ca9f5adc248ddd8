#include "psg/probability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace psg {

DensityVector::DensityVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw std::invalid_argument("density vector must not be empty");
    double sum = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const double v = values_[i];
        if (!(v >= 0.0 && v <= 1.0)) {
            std::ostringstream os;
            os << "density entry " << i << " = " << v << " outside [0,1]";
            throw std::invalid_argument(os.str());
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kMassTolerance) {
        std::ostringstream os;
        os.precision(17);
        os << "density vector sums to " << sum << ", not 1";
        throw std::invalid_argument(os.str());
    }
}

DensityVector DensityVector::from_weights(std::span<const double> weights) {
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
            std::ostringstream os;
            os << "weight " << i << " = " << weights[i] << " is negative or not finite";
            throw std::invalid_argument(os.str());
        }
        total += weights[i];
    }
    if (total <= 0.0) throw std::invalid_argument("all weights are zero");
    std::vector<double> v(weights.begin(), weights.end());
    for (double& x : v) x /= total;
    return DensityVector(std::move(v));
}

DensityVector DensityVector::from_counts(std::span<const std::size_t> counts) {
    const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    if (total == 0) throw std::invalid_argument("histogram is empty");
    std::vector<double> v(counts.size());
    const double m = static_cast<double>(total);
    for (std::size_t i = 0; i < counts.size(); ++i) v[i] = static_cast<double>(counts[i]) / m;
    return DensityVector(std::move(v));
}

DensityVector DensityVector::point_mass(std::size_t n, std::size_t bin) {
    if (bin >= n) throw std::out_of_range("point mass bin out of range");
    std::vector<double> v(n, 0.0);
    v[bin] = 1.0;
    return DensityVector(std::move(v));
}

DensityVector DensityVector::uniform(std::size_t n) {
    std::vector<double> w(n, 1.0);
    return from_weights(w);
}

double DensityVector::min_positive() const {
    double best = std::numeric_limits<double>::infinity();
    for (double v : values_)
        if (v > 0.0) best = std::min(best, v);
    return best;
}

TransitionMatrix::TransitionMatrix(Eigen::MatrixXd m, double tolerance) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0)
        throw std::invalid_argument("transition matrix must be square and non-empty");
    for (Eigen::Index i = 0; i < m_.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < m_.cols(); ++j) {
            const double v = m_(i, j);
            if (!(v >= 0.0 && v <= 1.0)) {
                std::ostringstream os;
                os << "transition entry (" << i << "," << j << ") = " << v << " outside [0,1]";
                throw std::invalid_argument(os.str());
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > tolerance) {
            std::ostringstream os;
            os.precision(17);
            os << "transition row " << i << " sums to " << sum;
            throw std::invalid_argument(os.str());
        }
    }
}

TransitionMatrix TransitionMatrix::identity(std::size_t n) {
    const auto k = static_cast<Eigen::Index>(n);
    return TransitionMatrix(Eigen::MatrixXd::Identity(k, k));
}

TransitionMatrix TransitionMatrix::rank_one(const DensityVector& row) {
    const auto n = static_cast<Eigen::Index>(row.size());
    Eigen::RowVectorXd r = to_row(row);
    return TransitionMatrix(Eigen::VectorXd::Ones(n) * r);
}

std::vector<double> TransitionMatrix::row(std::size_t i) const {
    std::vector<double> r(size());
    const auto ii = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < m_.cols(); ++j) r[static_cast<std::size_t>(j)] = m_(ii, j);
    return r;
}

Eigen::RowVectorXd TransitionMatrix::left_multiply(const DensityVector& x) const {
    if (x.size() != size()) throw std::invalid_argument("dimension mismatch in x M");
    return to_row(x) * m_;
}

double max_row_sum_error(const Eigen::MatrixXd& m) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) worst = std::max(worst, std::abs(m.row(i).sum() - 1.0));
    return worst;
}

double stationarity_residual(const DensityVector& x, const TransitionMatrix& m) {
    return (m.left_multiply(x) - to_row(x)).cwiseAbs().maxCoeff();
}

Eigen::RowVectorXd to_row(const DensityVector& v) {
    Eigen::RowVectorXd r(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<Eigen::Index>(i)) = v[i];
    return r;
}

} // namespace psg
