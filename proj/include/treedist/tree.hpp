#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace treedist {

using Point = std::vector<double>;
using NodeId = std::size_t;

inline constexpr double kDefaultTreeTolerance = 1e-9;

/// Input record for one node. `stage` is 1-based; `prob` is the unconditional P(k).
struct NodeSpec {
    long long label = 0;
    std::optional<long long> parent;
    int stage = 1;
    Point outcome;
    double prob = 0.0;
};

/// Distribution of the process value at one stage: distinct support points with masses.
struct StageMarginal {
    std::vector<Point> points;
    std::vector<double> probs;

    [[nodiscard]] std::size_t size() const { return points.size(); }
    [[nodiscard]] double total_mass() const;
};

/// Checks mass nonnegativity, total mass 1 within `tol`, pairwise distinct points
/// of equal dimension. Throws ValidationError.
void check_marginal(const StageMarginal& marginal, double tol = kDefaultTreeTolerance);

/// One root-to-leaf path.
struct ScenarioPath {
    NodeId leaf = 0;
    std::vector<Point> outcomes;
    double probability = 0.0;
};

struct Violation {
    std::string rule;
    std::optional<long long> node;  // external label
    double residual = 0.0;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    [[nodiscard]] bool ok() const { return violations.empty(); }
};

/// Rooted staged probability tree with unconditional node probabilities.
///
/// Immutable after construction. Nodes are stored stage by stage (stage 1 first);
/// within a stage, input order is kept. Construction rejects topologies that
/// cannot be traversed (missing parent, stage not parent+1, several roots,
/// dimension mismatch); probability consistency is left to validate().
class ProbabilityTree {
public:
    ProbabilityTree(int stages, std::size_t dimension, std::vector<NodeSpec> nodes);

    [[nodiscard]] int stages() const { return stages_; }
    [[nodiscard]] std::size_t dimension() const { return dimension_; }
    [[nodiscard]] std::size_t size() const { return nodes_.size(); }

    [[nodiscard]] NodeId root() const { return 0; }
    [[nodiscard]] int stage(NodeId k) const { return nodes_.at(k).stage; }
    [[nodiscard]] std::optional<NodeId> parent(NodeId k) const { return nodes_.at(k).parent; }
    [[nodiscard]] const Point& outcome(NodeId k) const { return nodes_.at(k).outcome; }
    [[nodiscard]] double prob(NodeId k) const { return nodes_.at(k).prob; }
    [[nodiscard]] long long label(NodeId k) const { return nodes_.at(k).label; }
    [[nodiscard]] std::span<const NodeId> children(NodeId k) const { return nodes_.at(k).children; }
    [[nodiscard]] bool is_leaf(NodeId k) const { return nodes_.at(k).children.empty(); }

    /// Nodes of stage t (1-based).
    [[nodiscard]] std::span<const NodeId> stage_nodes(int t) const;
    /// Leaves, i.e. nodes without successors. For a valid tree these are the stage-T nodes.
    [[nodiscard]] std::span<const NodeId> leaves() const { return leaves_; }
    /// Leaves descending from k (k itself when it is a leaf).
    [[nodiscard]] std::vector<NodeId> leaves_under(NodeId k) const;
    /// Ancestor of k at stage t <= stage(k).
    [[nodiscard]] NodeId ancestor_at(NodeId k, int t) const;
    /// True when m is k or a descendant of k.
    [[nodiscard]] bool descends_from(NodeId m, NodeId k) const;
    /// Outcomes from the root down to k.
    [[nodiscard]] std::vector<Point> path_outcomes(NodeId k) const;
    [[nodiscard]] std::optional<NodeId> find_label(long long label) const;

    /// Re-exports the nodes in storage order (labels preserved).
    [[nodiscard]] std::vector<NodeSpec> node_specs() const;

private:
    struct Node {
        long long label;
        std::optional<NodeId> parent;
        int stage;
        Point outcome;
        double prob;
        std::vector<NodeId> children;
    };

    int stages_;
    std::size_t dimension_;
    std::vector<Node> nodes_;
    std::vector<std::size_t> stage_offsets_;  // stage t occupies [offsets[t-1], offsets[t])
    std::vector<NodeId> stage_index_;
    std::vector<NodeId> leaves_;
};

ValidationReport validate(const ProbabilityTree& tree, double tol = kDefaultTreeTolerance);

/// P(m | k): P(m)/P(k) when m is k or below it, else 0. Throws ConditioningError if P(k) = 0.
double conditional_probability(const ProbabilityTree& tree, NodeId descendant, NodeId ancestor);

/// Stage-t nodes grouped by bitwise-equal outcome, masses summed. Order of first appearance.
StageMarginal stage_marginal(const ProbabilityTree& tree, int t);

/// Attaches a copy of `b` under every leaf of `a`, identifying b's root with that
/// leaf (b's root outcome is dropped). The result has T_A + T_B - 1 stages and one
/// leaf per (leaf of a, leaf of b) pair with probability P_A(a') * P_B(b'').
/// A single-node right factor is the identity.
ProbabilityTree tree_product(const ProbabilityTree& a, const ProbabilityTree& b);

std::vector<ScenarioPath> scenarios(const ProbabilityTree& tree);

/// The root-to-k path followed by the subtree rooted at k, renormalised so
/// that k carries unit mass. Throws ConditioningError if P(k) = 0.
ProbabilityTree path_extended_subtree(const ProbabilityTree& tree, NodeId k);

}  // namespace treedist
