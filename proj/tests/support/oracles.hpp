#pragma once

#include <cstddef>
#include <vector>

#include "treedist/metric.hpp"
#include "treedist/tree.hpp"

// Reference computations that share no code with the library solvers.
namespace treedist::testing {

/// min over permutations s of (1/n) sum_i cost[i][s(i)], row-major n x n.
double permutation_minimum(const std::vector<double>& cost, std::size_t n);

/// Optimal value of a 2 x 2 transport problem by evaluating the two vertices
/// of its one-dimensional feasible segment.
double two_by_two_transport(const std::vector<double>& cost, const std::vector<double>& supply,
                            const std::vector<double>& demand);

/// Minimum weighted within-cluster sum of squares over all partitions of the
/// points into exactly k nonempty groups (k^n enumeration).
double exhaustive_kmeans(const std::vector<Point>& points, const std::vector<double>& weights, std::size_t k);

/// Stage-t marginal by summing leaf probabilities over the leaves whose
/// stage-t ancestor carries each outcome; result sorted by outcome.
StageMarginal leaf_sum_marginal(const ProbabilityTree& tree, int t);

/// Direct sum_t w_t * |x_t - y_t|^p using std::pow and std::hypot style loops.
double path_distance_p(const StagewiseMetric& metric, const std::vector<Point>& x, const std::vector<Point>& y);

/// Scenario list of the product tree assembled from the two factor scenario
/// lists directly: (leaf of a, leaf of b) -> path_a ++ path_b[1:], P_a * P_b.
/// Paths are returned sorted.
struct FlatScenario {
    std::vector<Point> path;
    double probability;
};
std::vector<FlatScenario> product_scenarios(const ProbabilityTree& a, const ProbabilityTree& b);

/// Scenarios of a tree walked through parent links only, sorted by path.
std::vector<FlatScenario> flat_scenarios(const ProbabilityTree& tree);

/// 1-D W_1 between discrete laws on the real line via the CDF formula
/// integral |F - G|.
double cdf_w1(const StageMarginal& p, const StageMarginal& q);

}  // namespace treedist::testing
