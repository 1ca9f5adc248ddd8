#include "psg/consensus.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace psg {

namespace {

std::string describe_components(const std::vector<std::vector<std::size_t>>& components) {
    std::ostringstream os;
    os << "communication graph is not connected (" << components.size() << " components:";
    for (const auto& c : components) os << ' ' << c.size();
    os << " members)";
    return os.str();
}

std::vector<std::vector<std::size_t>> components_of(const std::vector<std::vector<std::size_t>>& adj) {
    const std::size_t n = adj.size();
    std::vector<std::vector<std::size_t>> out;
    std::vector<bool> seen(n, false);
    for (std::size_t s = 0; s < n; ++s) {
        if (seen[s]) continue;
        std::vector<std::size_t> comp;
        std::deque<std::size_t> queue{s};
        seen[s] = true;
        while (!queue.empty()) {
            const std::size_t i = queue.front();
            queue.pop_front();
            comp.push_back(i);
            for (std::size_t j : adj[i])
                if (!seen[j]) {
                    seen[j] = true;
                    queue.push_back(j);
                }
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
    }
    return out;
}

} // namespace

DisconnectedGraphError::DisconnectedGraphError(std::vector<std::vector<std::size_t>> components)
    : std::runtime_error(describe_components(components)), components_(std::move(components)) {}

CommGraph::CommGraph(std::size_t m, std::vector<std::vector<std::size_t>> neighbors)
    : neighbors_(std::move(neighbors)) {
    if (m == 0 || neighbors_.size() != m) throw std::invalid_argument("graph needs one neighbor list per agent");
    for (std::size_t i = 0; i < m; ++i) {
        auto& nb = neighbors_[i];
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        for (std::size_t j : nb) {
            if (j >= m) throw std::out_of_range("neighbor index out of range");
            if (j == i) throw std::invalid_argument("self-edges are not stored");
        }
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j : neighbors_[i])
            if (!std::binary_search(neighbors_[j].begin(), neighbors_[j].end(), i))
                throw std::invalid_argument("communication graph must be symmetric");
}

CommGraph CommGraph::from_edges(std::size_t m, std::span<const std::pair<std::size_t, std::size_t>> edges) {
    std::vector<std::vector<std::size_t>> nb(m);
    for (auto [a, b] : edges) {
        if (a >= m || b >= m) throw std::out_of_range("edge endpoint out of range");
        if (a == b) continue;
        nb[a].push_back(b);
        nb[b].push_back(a);
    }
    return CommGraph(m, std::move(nb));
}

bool CommGraph::adjacent(std::size_t a, std::size_t b) const {
    const auto& nb = neighbors_.at(a);
    return std::binary_search(nb.begin(), nb.end(), b);
}

std::vector<std::vector<std::size_t>> CommGraph::components() const { return components_of(neighbors_); }

CommGraph build_comm_graph(std::span<const std::size_t> agent_bins, const Grid& grid, double radius) {
    if (radius < 0.0) throw std::invalid_argument("communication radius must be nonnegative");
    const std::size_t m = agent_bins.size();
    if (m == 0) throw std::invalid_argument("communication graph needs at least one agent");
    std::vector<std::vector<std::size_t>> nb(m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            if (bin_distance(grid, agent_bins[i], agent_bins[j]) <= radius) {
                nb[i].push_back(j);
                nb[j].push_back(i);
            }
    CommGraph g(m, std::move(nb));
    auto comps = g.components();
    if (comps.size() != 1) throw DisconnectedGraphError(std::move(comps));
    return g;
}

WeightMatrix metropolis_weights(const CommGraph& graph) {
    const std::size_t m = graph.size();
    const auto n = static_cast<Eigen::Index>(m);
    WeightMatrix w{Eigen::MatrixXd::Zero(n, n)};
    for (std::size_t i = 0; i < m; ++i) {
        double off = 0.0;
        for (std::size_t j : graph.neighbors(i)) {
            const double a = 1.0 / (1.0 + static_cast<double>(std::max(graph.degree(i), graph.degree(j))));
            w.P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a;
            off += a;
        }
        w.P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0 - off;
    }
    return w;
}

WeightMatrix uniform_weights(std::size_t m) {
    const auto n = static_cast<Eigen::Index>(m);
    return WeightMatrix{Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(m))};
}

double second_singular_value(const WeightMatrix& weights) {
    const Eigen::Index m = weights.P.rows();
    if (m <= 1) return 0.0;
    const Eigen::MatrixXd deflated =
        weights.P - Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
    if (weights.P.isApprox(weights.P.transpose(), 1e-14)) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(deflated, Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(deflated);
    return svd.singularValues()(0);
}

std::size_t required_loops(double sigma, std::size_t m, double eps_cons) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
    if (sigma >= 1.0) throw std::domain_error("sigma >= 1: consensus cannot be guaranteed");
    if (m == 0 || !(eps_cons > 0.0)) throw std::invalid_argument("need m >= 1 and eps_cons > 0");
    const double target = eps_cons / (2.0 * std::sqrt(static_cast<double>(m)));
    if (sigma == 0.0 || target >= 1.0) return 1;
    const double ratio = std::log(target) / std::log(sigma);
    const double nearest = std::round(ratio);
    const double loops = std::abs(ratio - nearest) < 1e-9 ? nearest : std::ceil(ratio);
    return std::max<std::size_t>(1, static_cast<std::size_t>(loops));
}

Eigen::MatrixXd linop_round(const Eigen::MatrixXd& estimates, const WeightMatrix& weights) {
    if (estimates.rows() != weights.P.rows()) throw std::invalid_argument("estimate count does not match weights");
    // new_j = sum_l P[l, j] old_l
    return weights.P.transpose() * estimates;
}

std::vector<DensityVector> linop_round(std::span<const DensityVector> estimates, const WeightMatrix& weights) {
    const Eigen::MatrixXd next = linop_round(stack_rows(estimates), weights);
    std::vector<DensityVector> out;
    out.reserve(estimates.size());
    for (Eigen::Index j = 0; j < next.rows(); ++j) {
        std::vector<double> v(static_cast<std::size_t>(next.cols()));
        for (Eigen::Index i = 0; i < next.cols(); ++i) v[static_cast<std::size_t>(i)] = std::clamp(next(j, i), 0.0, 1.0);
        out.emplace_back(std::move(v));
    }
    return out;
}

Eigen::MatrixXd stack_rows(std::span<const DensityVector> estimates) {
    if (estimates.empty()) return {};
    const std::size_t n = estimates.front().size();
    Eigen::MatrixXd w(static_cast<Eigen::Index>(estimates.size()), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < estimates.size(); ++j) {
        if (estimates[j].size() != n) throw std::invalid_argument("estimate dimension mismatch");
        for (std::size_t i = 0; i < n; ++i) w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = estimates[j][i];
    }
    return w;
}

Disagreement disagreement(const Eigen::MatrixXd& estimates, const DensityVector& truth) {
    if (static_cast<std::size_t>(estimates.cols()) != truth.size())
        throw std::invalid_argument("estimate dimension mismatch");
    Disagreement d;
    d.theta.resize(static_cast<std::size_t>(estimates.rows()));
    double sq = 0.0;
    for (Eigen::Index j = 0; j < estimates.rows(); ++j) {
        double t = 0.0;
        for (Eigen::Index i = 0; i < estimates.cols(); ++i) t += std::abs(estimates(j, i) - truth[static_cast<std::size_t>(i)]);
        d.theta[static_cast<std::size_t>(j)] = t;
        sq += t * t;
    }
    d.norm = std::sqrt(sq);
    return d;
}

Disagreement disagreement(std::span<const DensityVector> estimates, const DensityVector& truth) {
    return disagreement(stack_rows(estimates), truth);
}

std::size_t ClassConsensus::agent_count() const {
    std::size_t m = 0;
    for (std::size_t c : counts) m += c;
    return m;
}

DensityVector ClassConsensus::estimate(std::size_t b, std::size_t n_cell) const {
    std::vector<double> v(n_cell, 0.0);
    const auto col = static_cast<Eigen::Index>(b);
    for (std::size_t a = 0; a < bins.size(); ++a) v[bins[a]] = estimates(static_cast<Eigen::Index>(a), col);
    return DensityVector(std::move(v));
}

ClassConsensus class_consensus(std::span<const std::size_t> bin_counts, const Grid& grid,
                               const ConsensusSettings& settings) {
    if (bin_counts.size() != grid.n_cell()) throw std::invalid_argument("bin counts do not match grid");
    if (settings.radius < 0.0) throw std::invalid_argument("communication radius must be nonnegative");
    ClassConsensus out;
    for (std::size_t i = 0; i < bin_counts.size(); ++i)
        if (bin_counts[i] > 0) {
            out.bins.push_back(i);
            out.counts.push_back(bin_counts[i]);
        }
    const std::size_t k = out.bins.size();
    if (k == 0) throw std::invalid_argument("consensus needs at least one agent");
    const std::size_t m = out.agent_count();
    const double md = static_cast<double>(m);
    const double eps = settings.eps_cons > 0.0 ? settings.eps_cons : 1.0 / md;
    const auto ki = static_cast<Eigen::Index>(k);

    std::vector<std::vector<std::size_t>> adj(k);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b)
            if (bin_distance(grid, out.bins[a], out.bins[b]) <= settings.radius) {
                adj[a].push_back(b);
                adj[b].push_back(a);
            }

    Eigen::MatrixXd K(ki, ki);
    std::vector<double> within; // eigenvalues of P on vectors that vary inside one class
    auto comps = components_of(adj);
    if (comps.size() != 1) {
        if (settings.on_disconnected == DisconnectedPolicy::Error) {
            for (auto& comp : comps)
                for (auto& c : comp) c = out.bins[c];
            throw DisconnectedGraphError(std::move(comps));
        }
        out.fallback = true;
        for (std::size_t a = 0; a < k; ++a) K.row(static_cast<Eigen::Index>(a)).setConstant(static_cast<double>(out.counts[a]) / md);
    } else {
        std::vector<double> degree(k);
        for (std::size_t a = 0; a < k; ++a) {
            double d = static_cast<double>(out.counts[a]) - 1.0;
            for (std::size_t b : adj[a]) d += static_cast<double>(out.counts[b]);
            degree[a] = d;
        }
        K.setZero();
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b : adj[a])
                K(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) =
                    static_cast<double>(out.counts[b]) / (1.0 + std::max(degree[a], degree[b]));
        for (std::size_t a = 0; a < k; ++a) {
            const auto ai = static_cast<Eigen::Index>(a);
            K(ai, ai) = 1.0 - (K.col(ai).sum() - K(ai, ai));
            if (out.counts[a] >= 2)
                within.push_back(K(ai, ai) - static_cast<double>(out.counts[a]) / (1.0 + degree[a]));
        }
    }

    // S = C^{1/2} W C^{1/2} with K = C W; symmetric and similar to K.
    Eigen::VectorXd sq(ki);
    for (std::size_t a = 0; a < k; ++a) sq(static_cast<Eigen::Index>(a)) = std::sqrt(static_cast<double>(out.counts[a]));
    Eigen::MatrixXd S = sq.cwiseInverse().asDiagonal() * K * sq.asDiagonal();
    S = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const Eigen::VectorXd& lambda = es.eigenvalues(); // ascending; the last is the consensus mode

    if (out.fallback) {
        out.sigma = 0.0;
    } else {
        double sigma = 0.0;
        for (Eigen::Index i = 0; i + 1 < ki; ++i) sigma = std::max(sigma, std::abs(lambda(i)));
        for (double mu : within) sigma = std::max(sigma, std::abs(mu));
        out.sigma = m == 1 ? 0.0 : sigma;
    }
    out.n_loop = settings.loops ? *settings.loops : required_loops(out.sigma, m, eps);

    Eigen::VectorXd powered(ki);
    const double n = static_cast<double>(out.n_loop);
    for (Eigen::Index i = 0; i < ki; ++i) powered(i) = std::pow(lambda(i), n);
    const Eigen::MatrixXd& Q = es.eigenvectors();
    Eigen::MatrixXd Sn = Q * powered.asDiagonal() * Q.transpose();
    out.estimates = sq.asDiagonal() * Sn * sq.cwiseInverse().asDiagonal();
    for (Eigen::Index b = 0; b < ki; ++b) {
        auto col = out.estimates.col(b);
        for (Eigen::Index a = 0; a < ki; ++a) col(a) = std::clamp(col(a), 0.0, 1.0);
        col /= col.sum();
    }

    double sqsum = 0.0;
    for (std::size_t b = 0; b < k; ++b) {
        double theta = 0.0;
        for (std::size_t a = 0; a < k; ++a)
            theta += std::abs(out.estimates(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) -
                              static_cast<double>(out.counts[a]) / md);
        sqsum += static_cast<double>(out.counts[b]) * theta * theta;
    }
    out.theta_norm = std::sqrt(sqsum);
    return out;
}

} // namespace psg
