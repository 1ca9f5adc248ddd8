#include "psg/guidance.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace psg {

double hellinger(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("hellinger: length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = std::sqrt(p[i]) - std::sqrt(q[i]);
        sum += d * d;
    }
    return std::min(1.0, std::sqrt(0.5 * sum));
}

double hellinger(const DensityVector& p, const DensityVector& q) { return hellinger(p.values(), q.values()); }

AlphaVector::AlphaVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw std::invalid_argument("alpha vector must not be empty");
    double peak = 0.0;
    for (double v : values_) {
        if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("alpha entries must lie in (0, 1]");
        peak = std::max(peak, v);
    }
    if (peak != 1.0) throw std::invalid_argument("alpha vector must have maximum entry 1");
}

AlphaVector alpha_from_distances(std::span<const double> distances) {
    double far = 0.0;
    for (double d : distances) {
        if (!(d >= 0.0)) throw std::invalid_argument("distances must be nonnegative");
        far = std::max(far, d);
    }
    std::vector<double> a(distances.size());
    for (std::size_t l = 0; l < a.size(); ++l) a[l] = 1.0 - distances[l] / (far + 1.0);
    return AlphaVector(std::move(a));
}

AlphaVector alpha_vector(const Grid& grid, std::size_t c) {
    std::vector<double> d(grid.n_cell());
    for (std::size_t l = 0; l < d.size(); ++l) d[l] = bin_distance(grid, l, c);
    return alpha_from_distances(d);
}

double weighted_mass(const DensityVector& pi, const AlphaVector& alpha) {
    if (pi.size() != alpha.size()) throw std::invalid_argument("pi and alpha differ in length");
    double s = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) s += pi[i] * alpha[i];
    return s;
}

namespace {

void check_markov_args(const DensityVector& pi, double xi, const AlphaVector& alpha, double pi_alpha) {
    if (pi.size() != alpha.size()) throw std::invalid_argument("pi and alpha differ in length");
    if (!(xi >= 0.0 && xi <= 1.0)) throw std::invalid_argument("xi must lie in [0, 1]");
    // alpha > 0 everywhere makes this unreachable; kept as a hard check.
    if (!(pi_alpha > 0.0)) throw std::invalid_argument("pi . alpha must be nonzero");
}

} // namespace

TransitionMatrix build_markov(const DensityVector& pi, double xi, const AlphaVector& alpha) {
    const double pa = weighted_mass(pi, alpha);
    check_markov_args(pi, xi, alpha, pa);
    const auto n = static_cast<Eigen::Index>(pi.size());
    Eigen::VectorXd a(n);
    Eigen::RowVectorXd pa_row(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        a(i) = alpha[static_cast<std::size_t>(i)];
        pa_row(i) = pi[static_cast<std::size_t>(i)] * a(i);
    }
    Eigen::MatrixXd m = (xi / pa) * (a * pa_row);
    for (Eigen::Index i = 0; i < n; ++i) m(i, i) += 1.0 - xi * a(i);
    return TransitionMatrix(std::move(m));
}

void markov_row(const DensityVector& pi, double xi, const AlphaVector& alpha, double pi_alpha, std::size_t i,
                std::span<double> out) {
    check_markov_args(pi, xi, alpha, pi_alpha);
    if (out.size() != pi.size() || i >= pi.size()) throw std::invalid_argument("markov_row: bad row or buffer");
    const double scale = xi / pi_alpha * alpha[i];
    for (std::size_t l = 0; l < out.size(); ++l) out[l] = scale * pi[l] * alpha[l];
    out[i] += 1.0 - xi * alpha[i];
}

TransitionMatrix apply_constraints(const TransitionMatrix& m, const ConstraintMatrix& a) {
    if (m.size() != a.size()) throw std::invalid_argument("constraint size mismatch");
    Eigen::MatrixXd out = m.matrix();
    const auto n = static_cast<Eigen::Index>(m.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        double folded = 0.0;
        for (Eigen::Index l = 0; l < n; ++l)
            if (!a.allowed(static_cast<std::size_t>(i), static_cast<std::size_t>(l))) {
                folded += out(i, l);
                out(i, l) = 0.0;
            }
        out(i, i) = std::min(1.0, out(i, i) + folded);
    }
    return TransitionMatrix(std::move(out));
}

void constrained_markov_row(const DensityVector& pi, double xi, const AlphaVector& alpha, double pi_alpha,
                            const ConstraintMatrix& a, std::size_t i, std::span<double> out) {
    markov_row(pi, xi, alpha, pi_alpha, i, out);
    if (a.is_all_ones()) return;
    double folded = 0.0;
    for (std::size_t l = 0; l < out.size(); ++l)
        if (!a.allowed(i, l)) {
            folded += out[l];
            out[l] = 0.0;
        }
    out[i] = std::min(1.0, out[i] + folded);
}

std::vector<std::size_t> trapping_set(const ConstraintMatrix& a, const Formation& formation) {
    if (a.size() != formation.n_cell()) throw std::invalid_argument("constraint size mismatch");
    std::vector<std::size_t> trapped;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& reach = a.reachable(i);
        if (std::none_of(reach.begin(), reach.end(), [&](std::size_t l) { return formation.is_recurrent(l); }))
            trapped.push_back(i);
    }
    return trapped;
}

std::map<std::size_t, std::size_t> escape_targets(const ConstraintMatrix& a, const Formation& formation,
                                                  std::span<const std::size_t> trapped) {
    const std::size_t n = a.size();
    if (n != formation.n_cell()) throw std::invalid_argument("constraint size mismatch");
    constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();
    std::vector<bool> in_trap(n, false);
    for (std::size_t t : trapped) in_trap.at(t) = true;

    // Multi-source BFS: hops from every bin to the nearest non-trapped bin.
    std::vector<std::size_t> hops(n, kUnreached);
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < n; ++i)
        if (!in_trap[i]) {
            hops[i] = 0;
            queue.push_back(i);
        }
    while (!queue.empty()) {
        const std::size_t i = queue.front();
        queue.pop_front();
        for (std::size_t l : a.reachable(i))
            if (hops[l] == kUnreached) {
                hops[l] = hops[i] + 1;
                queue.push_back(l);
            }
    }

    std::map<std::size_t, std::size_t> escape;
    for (std::size_t t : trapped) {
        std::size_t best = kUnreached;
        for (std::size_t l : a.reachable(t)) {
            if (l == t || hops[l] == kUnreached) continue;
            if (best == kUnreached || hops[l] < hops[best]) best = l;
        }
        if (best == kUnreached || hops[best] >= hops[t])
            throw std::logic_error("no admissible escape target for trapped bin " + std::to_string(t));
        escape.emplace(t, best);
    }
    return escape;
}

TransitionMatrix escape_matrix(const ConstraintMatrix& a, const Formation& formation,
                               std::span<const std::size_t> trapped,
                               const std::map<std::size_t, std::size_t>& escape) {
    const std::size_t n = a.size();
    const auto ni = static_cast<Eigen::Index>(n);
    std::vector<bool> in_trap(n, false);
    for (std::size_t t : trapped) in_trap.at(t) = true;
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(ni, ni);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        if (formation.is_recurrent(i)) {
            c(ii, ii) = 1.0;
        } else if (in_trap[i]) {
            const auto it = escape.find(i);
            if (it == escape.end()) throw std::invalid_argument("trapped bin without escape target");
            if (!a.allowed(i, it->second)) throw std::invalid_argument("escape target is not reachable");
            c(ii, static_cast<Eigen::Index>(it->second)) = 1.0;
        } else {
            std::vector<std::size_t> targets;
            for (std::size_t l : a.reachable(i))
                if (formation.is_recurrent(l)) targets.push_back(l);
            if (targets.empty()) throw std::invalid_argument("non-trapped transient bin cannot reach the formation");
            const double w = 1.0 / static_cast<double>(targets.size());
            for (std::size_t l : targets) c(ii, static_cast<Eigen::Index>(l)) = w;
        }
    }
    return TransitionMatrix(std::move(c));
}

TrappingAnalysis analyze_trapping(const ConstraintMatrix& a, const Formation& formation) {
    TrappingAnalysis t;
    t.trapped = trapping_set(a, formation);
    t.is_trapped.assign(a.size(), false);
    for (std::size_t i : t.trapped) t.is_trapped[i] = true;
    t.escape = escape_targets(a, formation, t.trapped);
    t.C = escape_matrix(a, formation, t.trapped, t.escape);
    return t;
}

std::size_t select_transition(std::span<const double> row, double z) {
    if (row.empty()) throw std::invalid_argument("empty transition row");
    if (!(z >= 0.0 && z < 1.0)) throw std::invalid_argument("z must lie in [0, 1)");
    double total = 0.0;
    for (double v : row) total += v;
    if (std::abs(total - 1.0) > 1e-9) {
        std::ostringstream os;
        os.precision(17);
        os << "transition row sums to " << total;
        throw std::invalid_argument(os.str());
    }
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t q = 0; q < row.size(); ++q) {
        if (row[q] <= 0.0) continue;
        last_positive = q;
        cum += row[q];
        if (z < cum) return q;
    }
    // z fell into the rounding gap below 1.
    return last_positive;
}

ErgodicityFloor ergodicity_floor(std::size_t m, const Grid& grid, const Formation& formation) {
    if (m < 2) throw std::invalid_argument("ergodicity floor needs m >= 2");
    ErgodicityFloor f;
    f.xi_min = 1.0 / (std::pow(2.0, 1.5) * static_cast<double>(m));
    const double far = max_bin_distance(grid);
    f.alpha_min = 1.0 - far / (far + 1.0);
    f.pi_min = formation.pi().min_positive();
    f.gamma = f.xi_min * f.alpha_min * f.alpha_min * f.pi_min;
    return f;
}

TransitionMatrix chain_product(std::span<const TransitionMatrix> matrices) {
    if (matrices.empty()) throw std::invalid_argument("chain_product needs at least one matrix");
    Eigen::MatrixXd u = matrices.front().matrix();
    for (std::size_t k = 1; k < matrices.size(); ++k) {
        if (matrices[k].size() != matrices.front().size()) throw std::invalid_argument("matrices are not conformable");
        u = u * matrices[k].matrix();
    }
    return TransitionMatrix(u.cwiseMax(0.0).cwiseMin(1.0), 1e-10);
}

double max_row_l1_distance(const TransitionMatrix& m, const DensityVector& target) {
    if (m.size() != target.size()) throw std::invalid_argument("dimension mismatch");
    const Eigen::RowVectorXd t = to_row(target);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m.matrix().rows(); ++i)
        worst = std::max(worst, (m.matrix().row(i) - t).cwiseAbs().sum());
    return worst;
}

bool XiHistory::push(double xi, double xi_min, const SnapSettings& s) {
    if (xi > s.reset * xi_min) values_.clear();
    values_.push_back(xi);
    while (values_.size() > s.window) values_.pop_front();
    if (!s.enabled || values_.size() < s.window || !(xi < s.factor * xi_min)) return false;
    const auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
    return (*hi - *lo) < s.spread * xi_min;
}

} // namespace psg
