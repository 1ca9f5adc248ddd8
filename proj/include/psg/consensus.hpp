#pragma once

#include "psg/grid.hpp"
#include "psg/probability.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace psg {

/// Thrown when the proximity graph splits. Carries the component partition
/// (agent ids for agent-level graphs, occupied-bin ids for bin-level ones).
class DisconnectedGraphError : public std::runtime_error {
public:
    DisconnectedGraphError(std::vector<std::vector<std::size_t>> components);
    const std::vector<std::vector<std::size_t>>& components() const noexcept { return components_; }

private:
    std::vector<std::vector<std::size_t>> components_;
};

/// Undirected agent communication graph. Neighbor lists exclude self.
class CommGraph {
public:
    CommGraph(std::size_t m, std::vector<std::vector<std::size_t>> neighbors);
    static CommGraph from_edges(std::size_t m, std::span<const std::pair<std::size_t, std::size_t>> edges);

    std::size_t size() const noexcept { return neighbors_.size(); }
    const std::vector<std::size_t>& neighbors(std::size_t agent) const { return neighbors_[agent]; }
    std::size_t degree(std::size_t agent) const { return neighbors_[agent].size(); }
    bool adjacent(std::size_t a, std::size_t b) const;

    std::vector<std::vector<std::size_t>> components() const;
    bool connected() const { return components().size() == 1; }

private:
    std::vector<std::vector<std::size_t>> neighbors_;
};

/// Edge (i, j) iff the agents' bins are within `radius` (l1, grid units).
/// Throws DisconnectedGraphError unless the result is connected.
CommGraph build_comm_graph(std::span<const std::size_t> agent_bins, const Grid& grid, double radius);

/// Weighting factors P[l, j]: agent j takes P[l, j] of agent l's estimate.
struct WeightMatrix {
    Eigen::MatrixXd P;
    std::size_t size() const noexcept { return static_cast<std::size_t>(P.rows()); }
};

/// Metropolis rule: 1/(1 + max(deg l, deg j)) on edges; the diagonal absorbs the rest.
WeightMatrix metropolis_weights(const CommGraph& graph);

/// Uniform averaging 1/m everywhere (the complete-graph fallback).
WeightMatrix uniform_weights(std::size_t m);

/// Largest singular value of P on the complement of the consensus direction.
/// Returns 0 for m = 1.
double second_singular_value(const WeightMatrix& weights);

/// Loop count guaranteeing ||theta||_2 <= eps_cons after the consensus stage.
/// Throws std::domain_error when sigma >= 1.
std::size_t required_loops(double sigma, std::size_t m, double eps_cons);

/// One LinOP round on estimates stored as rows (agent j is row j).
Eigen::MatrixXd linop_round(const Eigen::MatrixXd& estimates, const WeightMatrix& weights);
std::vector<DensityVector> linop_round(std::span<const DensityVector> estimates, const WeightMatrix& weights);

struct Disagreement {
    std::vector<double> theta; // per-agent l1 distance to the truth
    double norm = 0.0;         // ||theta||_2
};

Disagreement disagreement(const Eigen::MatrixXd& estimates, const DensityVector& truth);
Disagreement disagreement(std::span<const DensityVector> estimates, const DensityVector& truth);

Eigen::MatrixXd stack_rows(std::span<const DensityVector> estimates);

enum class DisconnectedPolicy { Error, CompleteGraph };

/// Consensus over agents grouped by the bin they occupy.
///
/// Co-located agents share their neighborhood and Metropolis degree, so their
/// estimates coincide after every LinOP round. The stage therefore reduces
/// exactly to a weighted problem over occupied bins: class b's estimate after
/// n rounds is column b of K^n, where K[b', b] sums P[l, j] over agents l in
/// class b' for any j in b. K is similar to a symmetric matrix, which gives
/// both sigma_{m-1}(P) and K^n from one eigendecomposition.
struct ClassConsensus {
    std::vector<std::size_t> bins;   // occupied bins, ascending
    std::vector<std::size_t> counts; // agents per occupied bin
    double sigma = 0.0;              // second singular value of the full m x m P
    std::size_t n_loop = 0;
    bool fallback = false;           // complete-graph weights were substituted
    /// estimates(b', b): class b's estimated mass on bins[b']. Bins that no
    /// agent occupies carry zero mass in every estimate.
    Eigen::MatrixXd estimates;
    double theta_norm = 0.0;         // ||theta||_2 over all m agents

    std::size_t agent_count() const;
    /// Full-length estimate for class b.
    DensityVector estimate(std::size_t b, std::size_t n_cell) const;
};

struct ConsensusSettings {
    double radius = 0.0;
    double eps_cons = 0.0;                   // <= 0 means 1/m
    std::optional<std::size_t> loops;        // overrides the count derived from sigma
    DisconnectedPolicy on_disconnected = DisconnectedPolicy::Error;
};

/// `bin_counts` holds the number of agents in each bin (length n_cell).
ClassConsensus class_consensus(std::span<const std::size_t> bin_counts, const Grid& grid,
                               const ConsensusSettings& settings);

} // namespace psg
