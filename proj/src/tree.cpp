#include "treedist/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "treedist/errors.hpp"

namespace treedist {

double StageMarginal::total_mass() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

void check_marginal(const StageMarginal& marginal, double tol) {
    if (marginal.points.empty()) throw ValidationError("marginal has no support points");
    if (marginal.points.size() != marginal.probs.size())
        throw ValidationError("marginal has mismatched point and probability counts");
    const std::size_t dim = marginal.points.front().size();
    for (std::size_t i = 0; i < marginal.size(); ++i) {
        if (marginal.points[i].size() != dim) throw ValidationError("marginal points differ in dimension");
        if (!(marginal.probs[i] >= 0.0) || !std::isfinite(marginal.probs[i]))
            throw ValidationError("marginal has a negative or non-finite probability");
        for (double x : marginal.points[i])
            if (!std::isfinite(x)) throw ValidationError("marginal has a non-finite coordinate");
    }
    const double mass = marginal.total_mass();
    if (std::abs(mass - 1.0) > tol) {
        std::ostringstream os;
        os << "marginal mass " << mass << " differs from 1 by " << mass - 1.0;
        throw ValidationError(os.str());
    }
    auto sorted = marginal.points;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ValidationError("marginal has repeated support points");
}

ProbabilityTree::ProbabilityTree(int stages, std::size_t dimension, std::vector<NodeSpec> specs)
    : stages_(stages), dimension_(dimension) {
    if (stages < 1) throw ValidationError("tree needs at least one stage");
    if (specs.empty()) throw ValidationError("tree has no nodes");

    std::stable_sort(specs.begin(), specs.end(),
                     [](const NodeSpec& a, const NodeSpec& b) { return a.stage < b.stage; });

    std::unordered_map<long long, NodeId> by_label;
    by_label.reserve(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (!by_label.emplace(specs[i].label, i).second)
            throw ValidationError("duplicate node id " + std::to_string(specs[i].label));
    }

    nodes_.reserve(specs.size());
    std::size_t roots = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        auto& s = specs[i];
        const std::string where = "node " + std::to_string(s.label);
        if (s.stage < 1 || s.stage > stages) throw ValidationError(where + ": stage out of range");
        if (s.outcome.size() != dimension) throw ValidationError(where + ": outcome dimension mismatch");
        if (!std::isfinite(s.prob)) throw ValidationError(where + ": probability is not finite");
        std::optional<NodeId> parent;
        if (s.parent) {
            auto it = by_label.find(*s.parent);
            if (it == by_label.end()) throw ValidationError(where + ": unknown parent");
            if (specs[it->second].stage + 1 != s.stage)
                throw ValidationError(where + ": stage is not parent stage + 1");
            parent = it->second;
        } else {
            ++roots;
            if (s.stage != 1) throw ValidationError(where + ": root must be at stage 1");
        }
        nodes_.push_back(Node{s.label, parent, s.stage, std::move(s.outcome), s.prob, {}});
    }
    if (roots != 1) throw ValidationError("tree must have exactly one root");

    for (NodeId k = 1; k < nodes_.size(); ++k) nodes_[*nodes_[k].parent].children.push_back(k);

    stage_offsets_.assign(static_cast<std::size_t>(stages) + 1, 0);
    for (const auto& n : nodes_) ++stage_offsets_[static_cast<std::size_t>(n.stage)];
    std::partial_sum(stage_offsets_.begin(), stage_offsets_.end(), stage_offsets_.begin());
    stage_index_.resize(nodes_.size());
    std::iota(stage_index_.begin(), stage_index_.end(), NodeId{0});
    for (NodeId k = 0; k < nodes_.size(); ++k)
        if (nodes_[k].children.empty()) leaves_.push_back(k);
}

std::span<const NodeId> ProbabilityTree::stage_nodes(int t) const {
    if (t < 1 || t > stages_) throw ValidationError("stage index " + std::to_string(t) + " out of range");
    const auto begin = stage_offsets_[static_cast<std::size_t>(t) - 1];
    const auto end = stage_offsets_[static_cast<std::size_t>(t)];
    return std::span<const NodeId>(stage_index_).subspan(begin, end - begin);
}

std::vector<NodeId> ProbabilityTree::leaves_under(NodeId k) const {
    std::vector<NodeId> out;
    std::vector<NodeId> stack{k};
    while (!stack.empty()) {
        const NodeId n = stack.back();
        stack.pop_back();
        const auto& ch = nodes_.at(n).children;
        if (ch.empty()) {
            out.push_back(n);
        } else {
            for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
        }
    }
    return out;
}

NodeId ProbabilityTree::ancestor_at(NodeId k, int t) const {
    if (t < 1 || t > stage(k)) throw ValidationError("ancestor stage out of range");
    while (nodes_[k].stage > t) k = *nodes_[k].parent;
    return k;
}

bool ProbabilityTree::descends_from(NodeId m, NodeId k) const {
    if (stage(m) < stage(k)) return false;
    return ancestor_at(m, stage(k)) == k;
}

std::vector<Point> ProbabilityTree::path_outcomes(NodeId k) const {
    std::vector<Point> out(static_cast<std::size_t>(stage(k)));
    for (std::optional<NodeId> n = k; n; n = nodes_[*n].parent)
        out[static_cast<std::size_t>(nodes_[*n].stage) - 1] = nodes_[*n].outcome;
    return out;
}

std::optional<NodeId> ProbabilityTree::find_label(long long label) const {
    for (NodeId k = 0; k < nodes_.size(); ++k)
        if (nodes_[k].label == label) return k;
    return std::nullopt;
}

std::vector<NodeSpec> ProbabilityTree::node_specs() const {
    std::vector<NodeSpec> out;
    out.reserve(nodes_.size());
    for (const auto& n : nodes_) {
        std::optional<long long> parent;
        if (n.parent) parent = nodes_[*n.parent].label;
        out.push_back(NodeSpec{n.label, parent, n.stage, n.outcome, n.prob});
    }
    return out;
}

ValidationReport validate(const ProbabilityTree& tree, double tol) {
    ValidationReport report;
    auto add = [&](std::string rule, std::optional<long long> node, double residual, std::string msg) {
        report.violations.push_back(Violation{std::move(rule), node, residual, std::move(msg)});
    };

    const double root_prob = tree.prob(tree.root());
    if (std::abs(root_prob - 1.0) > tol)
        add("root_probability", tree.label(tree.root()), root_prob - 1.0, "root probability is not 1");

    double leaf_sum = 0.0;
    for (NodeId k = 0; k < tree.size(); ++k) {
        if (tree.prob(k) < 0.0) add("nonnegative", tree.label(k), tree.prob(k), "negative probability");
        if (tree.is_leaf(k)) {
            leaf_sum += tree.prob(k);
            if (tree.stage(k) != tree.stages())
                add("leaf_stage", tree.label(k), 0.0, "leaf is not at the last stage");
            continue;
        }
        double child_sum = 0.0;
        for (NodeId m : tree.children(k)) child_sum += tree.prob(m);
        const double residual = child_sum - tree.prob(k);
        if (std::abs(residual) > tol)
            add("node_identity", tree.label(k), residual, "successor probabilities do not sum to P(k)");
    }
    if (std::abs(leaf_sum - 1.0) > tol) {
        std::ostringstream os;
        os << "leaf probabilities sum to " << leaf_sum;
        add("leaf_sum", std::nullopt, leaf_sum - 1.0, os.str());
    }
    return report;
}

double conditional_probability(const ProbabilityTree& tree, NodeId descendant, NodeId ancestor) {
    const double pk = tree.prob(ancestor);
    if (!(pk > 0.0))
        throw ConditioningError("conditioning on node " + std::to_string(tree.label(ancestor)) +
                                " with zero probability");
    if (!tree.descends_from(descendant, ancestor)) return 0.0;
    if (descendant == ancestor) return 1.0;
    return tree.prob(descendant) / pk;
}

StageMarginal stage_marginal(const ProbabilityTree& tree, int t) {
    StageMarginal out;
    for (NodeId k : tree.stage_nodes(t)) {
        const auto& x = tree.outcome(k);
        auto it = std::find(out.points.begin(), out.points.end(), x);
        if (it == out.points.end()) {
            out.points.push_back(x);
            out.probs.push_back(tree.prob(k));
        } else {
            out.probs[static_cast<std::size_t>(it - out.points.begin())] += tree.prob(k);
        }
    }
    return out;
}

ProbabilityTree tree_product(const ProbabilityTree& a, const ProbabilityTree& b) {
    if (a.dimension() != b.dimension()) throw ValidationError("tree product: outcome dimension mismatch");

    // Relabel densely: a's nodes keep their storage index, copies of b follow.
    std::vector<NodeSpec> nodes = a.node_specs();
    for (NodeId k = 0; k < a.size(); ++k) {
        nodes[k].label = static_cast<long long>(k);
        nodes[k].parent.reset();
        if (auto p = a.parent(k)) nodes[k].parent = static_cast<long long>(*p);
    }
    auto next = static_cast<long long>(a.size());

    std::vector<long long> copy_label(b.size());
    for (NodeId leaf : a.leaves()) {
        copy_label[b.root()] = static_cast<long long>(leaf);
        for (NodeId m = 1; m < b.size(); ++m) {
            copy_label[m] = next++;
            nodes.push_back(NodeSpec{copy_label[m], copy_label[*b.parent(m)], a.stage(leaf) + b.stage(m) - 1,
                                     b.outcome(m), a.prob(leaf) * b.prob(m)});
        }
    }
    return ProbabilityTree(a.stages() + b.stages() - 1, a.dimension(), std::move(nodes));
}

std::vector<ScenarioPath> scenarios(const ProbabilityTree& tree) {
    std::vector<ScenarioPath> out;
    out.reserve(tree.leaves().size());
    for (NodeId leaf : tree.leaves()) out.push_back(ScenarioPath{leaf, tree.path_outcomes(leaf), tree.prob(leaf)});
    return out;
}

ProbabilityTree path_extended_subtree(const ProbabilityTree& tree, NodeId k) {
    const double pk = tree.prob(k);
    if (!(pk > 0.0))
        throw ConditioningError("cannot extract the subtree of zero-probability node " +
                                std::to_string(tree.label(k)));
    std::vector<NodeSpec> nodes;
    for (std::optional<NodeId> n = tree.parent(k); n; n = tree.parent(*n)) {
        std::optional<long long> parent;
        if (tree.parent(*n)) parent = tree.label(*tree.parent(*n));
        nodes.push_back(NodeSpec{tree.label(*n), parent, tree.stage(*n), tree.outcome(*n), 1.0});
    }
    std::vector<NodeId> stack{k};
    while (!stack.empty()) {
        const NodeId n = stack.back();
        stack.pop_back();
        std::optional<long long> parent;
        if (tree.parent(n)) parent = tree.label(*tree.parent(n));
        const double p = n == k ? 1.0 : tree.prob(n) / pk;
        nodes.push_back(NodeSpec{tree.label(n), parent, tree.stage(n), tree.outcome(n), p});
        for (NodeId m : tree.children(n)) stack.push_back(m);
    }
    return ProbabilityTree(tree.stages(), tree.dimension(), std::move(nodes));
}

}  // namespace treedist
