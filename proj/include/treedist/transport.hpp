#pragma once

#include <cstddef>
#include <vector>

#include "treedist/metric.hpp"
#include "treedist/tree.hpp"

namespace treedist {

/// Balanced transportation problem with a dense row-major cost matrix
/// (costs already on the d^p scale).
struct TransportProblem {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> cost;  // rows * cols
    std::vector<double> supply;
    std::vector<double> demand;

    [[nodiscard]] double c(std::size_t i, std::size_t j) const { return cost[i * cols + j]; }
};

struct TransportPlan {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> flow;  // rows * cols
    double value = 0.0;        // sum of cost * flow
    std::size_t pivots = 0;

    [[nodiscard]] double at(std::size_t i, std::size_t j) const { return flow[i * cols + j]; }
    /// Largest absolute deviation of row/column sums from the given marginals.
    [[nodiscard]] double marginal_residual(const std::vector<double>& supply,
                                           const std::vector<double>& demand) const;
};

inline constexpr double kBalanceTolerance = 1e-9;

/// Exact optimum of the transportation LP by the primal transportation
/// simplex (u-v potentials on a spanning-tree basis). Dantzig pricing, with a
/// switch to Bland's rule after a run of degenerate pivots.
///
/// Zero-mass atoms are removed before solving and come back as zero rows or
/// columns. If |sum(supply) - sum(demand)| <= 1e-9 the demand is rescaled to
/// the supply total; larger imbalance throws InfeasibleError. Negative mass,
/// negative or non-finite cost throws ValidationError.
TransportPlan solve_transport(const TransportProblem& problem);

/// The same LP handed to the general simplex solver, optionally with the
/// redundant total-mass row sum(pi) = sum(supply). Used to cross-check the
/// transportation simplex and the redundancy of that row.
double solve_transport_as_lp(const TransportProblem& problem, bool with_total_mass_row);

/// Cost matrix d_t^p(x_i, y_j) between two marginals.
TransportProblem make_transport_problem(const StageMarginal& p, const StageMarginal& q,
                                        const StagewiseMetric& metric, int stage);

/// Wasserstein distance of order p between two stage marginals, on the d^p scale.
double wasserstein_p(const StageMarginal& p, const StageMarginal& q, const StagewiseMetric& metric, int stage);

}  // namespace treedist
