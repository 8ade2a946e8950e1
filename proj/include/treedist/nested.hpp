#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "treedist/lp.hpp"
#include "treedist/metric.hpp"
#include "treedist/transport.hpp"
#include "treedist/tree.hpp"

namespace treedist {

enum class NestedMethod { lp, dp, swi };

std::string to_string(NestedMethod m);

inline constexpr std::size_t kDefaultLpCap = 10'000;

struct NestedOptions {
    /// Store the optimal local transport plan for every node pair.
    bool keep_plans = false;
    /// Largest leaves(A) * leaves(B) admitted by the monolithic LP.
    std::size_t lp_cap = kDefaultLpCap;
    /// Worker threads for the per-stage sweep; 0 picks hardware concurrency.
    unsigned threads = 0;
};

/// Sub-tree distances d^p(k, l) for all node pairs, stage by stage.
class NodePairTable {
public:
    NodePairTable(const ProbabilityTree& a, const ProbabilityTree& b);

    [[nodiscard]] int stages() const { return static_cast<int>(stages_.size()); }
    [[nodiscard]] double at(NodeId k, NodeId l) const;
    /// True when P(k) = 0 or Q(l) = 0: the entry carries no coupling mass.
    [[nodiscard]] bool mass_free(NodeId k, NodeId l) const;
    /// Local optimal plan over (k,l)_+ (rows: children of k, cols: children of l), if kept.
    [[nodiscard]] const TransportPlan* plan(NodeId k, NodeId l) const;

    [[nodiscard]] std::size_t rows(int t) const { return stage(t).a_nodes.size(); }
    [[nodiscard]] std::size_t cols(int t) const { return stage(t).b_nodes.size(); }
    [[nodiscard]] NodeId a_node(int t, std::size_t r) const { return stage(t).a_nodes.at(r); }
    [[nodiscard]] NodeId b_node(int t, std::size_t c) const { return stage(t).b_nodes.at(c); }
    /// Row-major |A_t| x |B_t| values of stage t.
    [[nodiscard]] const std::vector<double>& values(int t) const { return stage(t).values; }

private:
    friend class NestedSweep;

    struct Stage {
        std::vector<NodeId> a_nodes;
        std::vector<NodeId> b_nodes;
        std::vector<double> values;
        std::vector<char> mass_free;
        std::vector<std::optional<TransportPlan>> plans;
    };

    [[nodiscard]] const Stage& stage(int t) const;
    [[nodiscard]] std::size_t slot(NodeId k, NodeId l, int& t) const;

    std::vector<Stage> stages_;
    std::vector<std::size_t> pos_a_;
    std::vector<std::size_t> pos_b_;
    std::vector<int> stage_a_;
    std::vector<int> stage_b_;
};

struct NestedResult {
    double value_p = 0.0;     // LP scale, d^p
    double value_root = 0.0;  // value_p^(1/p)
    NestedMethod method = NestedMethod::dp;
    std::optional<NodePairTable> table;
    /// Per-stage terms w_t * W_p(P_t, Q_t) (fast path only).
    std::vector<double> stage_terms;
    /// Optimal leaf coupling pi_{i,j}, row-major over tree.leaves() order (LP only).
    std::vector<double> leaf_coupling;
};

/// Nested distance via the monolithic LP over leaf-pair variables, with the
/// conditional-marginal constraints written for every node pair of every stage.
/// Throws SizeCapError above options.lp_cap, StageMismatchError on stage counts.
NestedResult nested_lp(const ProbabilityTree& a, const ProbabilityTree& b, const StagewiseMetric& metric,
                       const NestedOptions& options = {});

/// Nested distance by backward recursion over node pairs: each interior
/// d^p(k,l) is the optimal value of a unit-mass transport problem between the
/// conditional successor distributions with costs d^p(r,s).
NestedResult nested_dp(const ProbabilityTree& a, const ProbabilityTree& b, const StagewiseMetric& metric,
                       const NestedOptions& options = {});

/// d^p(k,l) for two nodes of the same stage (StageMismatchError otherwise).
double subtree_distance(const ProbabilityTree& a, const ProbabilityTree& b, const StagewiseMetric& metric,
                        NodeId k, NodeId l);

/// Leaf-variable LP: min sum pi_ij d^p_ij subject to
///   sum_{j>l} pi_ij = P(i|k) * sum_{(i',j)>(k,l)} pi_i'j   for all t < T, (k,l), i > k
/// (and symmetrically for B), plus sum pi = 1. Variables: leaves(A) x leaves(B), row-major.
LinearProgram leaf_form_lp(const ProbabilityTree& a, const ProbabilityTree& b, const StagewiseMetric& metric);

/// Successor-form LP over node-pair variables pi_{k,l} restricted to the
/// subtrees below (k0, l0), with pi_{k0,l0} = mass. With the two roots and unit
/// mass this is the full successor-form nested distance LP.
struct SuccessorFormLp {
    LinearProgram lp;
    /// Variable index of each node pair, row-major per stage; absent pairs map to npos.
    std::vector<std::size_t> var_of_pair;  // a.size() * b.size()
    std::size_t b_size = 0;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    [[nodiscard]] std::size_t var(NodeId k, NodeId l) const { return var_of_pair[k * b_size + l]; }
};

SuccessorFormLp successor_form_lp(const ProbabilityTree& a, const ProbabilityTree& b,
                                  const StagewiseMetric& metric, NodeId k0, NodeId l0, double mass);

struct ConstraintEquivalenceReport {
    double leaf_form_value = 0.0;
    double successor_form_value = 0.0;
    /// Residual of the leaf-form optimum inside the successor-form constraints, and vice versa.
    double leaf_solution_in_successor_form = 0.0;
    double successor_solution_in_leaf_form = 0.0;
    double tolerance = 1e-8;
    [[nodiscard]] bool ok() const;
};

/// Solves both constraint forms independently and cross-checks optima and feasibility.
/// Throws SizeCapError when leaves(A) * leaves(B) exceeds `cap`.
ConstraintEquivalenceReport check_constraint_equivalence(const ProbabilityTree& a, const ProbabilityTree& b,
                                                         const StagewiseMetric& metric,
                                                         std::size_t cap = 2'000);

struct HomogeneityReport {
    double alpha = 0.0;
    double phi_alpha = 0.0;  // Phi_t(k, l, alpha)
    double phi_one = 0.0;    // Phi_t(k, l, 1)
    double tolerance = 1e-9;
    [[nodiscard]] double defect() const;
    [[nodiscard]] bool ok() const;
};

/// Solves the mass-propagating subproblem at (k,l) with total mass alpha and
/// with unit mass and compares Phi(alpha) against alpha * Phi(1).
HomogeneityReport check_homogeneity(const ProbabilityTree& a, const ProbabilityTree& b,
                                    const StagewiseMetric& metric, NodeId k, NodeId l, double alpha);

/// Throws StageMismatchError / ValidationError unless both trees are valid and
/// have the metric's stage count.
void require_comparable(const ProbabilityTree& a, const ProbabilityTree& b, const StagewiseMetric& metric);

}  // namespace treedist
