#pragma once

#include "psg/grid.hpp"
#include "psg/probability.hpp"

#include <cstddef>
#include <deque>
#include <map>
#include <span>
#include <vector>

namespace psg {

/// Hellinger distance (1/sqrt2) * ||sqrt p - sqrt q||_2, in [0, 1].
double hellinger(std::span<const double> p, std::span<const double> q);
double hellinger(const DensityVector& p, const DensityVector& q);

/// Per-bin weights in (0, 1] with maximum exactly 1.
class AlphaVector {
public:
    explicit AlphaVector(std::vector<double> values);

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }

private:
    std::vector<double> values_;
};

/// alpha[l] = 1 - d[l] / (max_q d[q] + 1) for distances d to the reference bin.
AlphaVector alpha_from_distances(std::span<const double> distances);

/// Distance-based alpha around reference bin `c`.
AlphaVector alpha_vector(const Grid& grid, std::size_t c);

/// pi . alpha
double weighted_mass(const DensityVector& pi, const AlphaVector& alpha);

/// M = alpha (xi / pi alpha) pi diag(alpha) + I - xi diag(alpha).
TransitionMatrix build_markov(const DensityVector& pi, double xi, const AlphaVector& alpha);

/// Row i of build_markov without forming the matrix. `pi_alpha` is pi . alpha.
void markov_row(const DensityVector& pi, double xi, const AlphaVector& alpha, double pi_alpha, std::size_t i,
                std::span<double> out);

/// Blocked transitions folded onto the diagonal, then zeroed.
TransitionMatrix apply_constraints(const TransitionMatrix& m, const ConstraintMatrix& a);

/// Row i of apply_constraints(build_markov(...), a), computed directly.
void constrained_markov_row(const DensityVector& pi, double xi, const AlphaVector& alpha, double pi_alpha,
                            const ConstraintMatrix& a, std::size_t i, std::span<double> out);

/// Bins whose one-step reachable set misses the formation support.
std::vector<std::size_t> trapping_set(const ConstraintMatrix& a, const Formation& formation);

/// Escape target for each trapped bin: the reachable bin closest (in hops)
/// to a non-trapped bin, lowest index on ties.
std::map<std::size_t, std::size_t> escape_targets(const ConstraintMatrix& a, const Formation& formation,
                                                  std::span<const std::size_t> trapped);

/// Trapped rows jump to their escape target; other transient rows spread
/// uniformly over reachable recurrent bins; recurrent rows are identity rows.
TransitionMatrix escape_matrix(const ConstraintMatrix& a, const Formation& formation,
                               std::span<const std::size_t> trapped,
                               const std::map<std::size_t, std::size_t>& escape);

/// Trapping analysis bundled with its escape matrix.
struct TrappingAnalysis {
    std::vector<std::size_t> trapped;
    std::vector<bool> is_trapped;
    std::map<std::size_t, std::size_t> escape;
    TransitionMatrix C;
};

TrappingAnalysis analyze_trapping(const ConstraintMatrix& a, const Formation& formation);

/// Inverse-CDF selection: the bin q with cdf(q-1) <= z < cdf(q).
/// Throws if the row is not normalized within 1e-9.
std::size_t select_transition(std::span<const double> row, double z);

/// Positive per-entry floor for matrices built with xi >= xi_min.
struct ErgodicityFloor {
    double xi_min = 0.0;
    double alpha_min = 0.0;
    double pi_min = 0.0;
    double gamma = 0.0;
};

ErgodicityFloor ergodicity_floor(std::size_t m, const Grid& grid, const Formation& formation);

/// Forward product M_0 M_1 ... M_{k-1}.
TransitionMatrix chain_product(std::span<const TransitionMatrix> matrices);

/// Largest l1 distance between a row of `m` and `target`.
double max_row_l1_distance(const TransitionMatrix& m, const DensityVector& target);

/// Identity-snap rule: force M = I once xi is below `factor * xi_min` and the
/// last `window` values span less than `spread * xi_min`. The window clears
/// when xi jumps above `reset * xi_min`.
struct SnapSettings {
    bool enabled = true;
    double factor = 2.0;
    std::size_t window = 10;
    double spread = 0.5;
    double reset = 4.0;
};

class XiHistory {
public:
    /// Records xi; returns true when the snap condition holds after recording.
    bool push(double xi, double xi_min, const SnapSettings& s);
    const std::deque<double>& values() const noexcept { return values_; }
    void clear() { values_.clear(); }

private:
    std::deque<double> values_;
};

} // namespace psg
