#include "treedist/swi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "parallel.hpp"
#include "treedist/errors.hpp"
#include "treedist/transport.hpp"

namespace treedist {

void check_swi_spec(const SwiSpec& spec, double tol) {
    if (spec.stages.empty()) throw ValidationError("SWI spec has no stages");
    for (const auto& m : spec.stages) check_marginal(m, tol);
    if (spec.stages.front().size() != 1)
        throw ValidationError("SWI spec: stage 1 must be a single deterministic point");
    const std::size_t dim = spec.stages.front().points.front().size();
    for (const auto& m : spec.stages)
        if (m.points.front().size() != dim) throw ValidationError("SWI spec: stages differ in dimension");
}

ProbabilityTree build_swi_tree(const SwiSpec& spec) {
    check_swi_spec(spec);
    const auto& first = spec.stages.front();
    std::vector<NodeSpec> nodes{NodeSpec{0, std::nullopt, 1, first.points.front(), 1.0}};
    std::vector<std::size_t> frontier{0};
    for (std::size_t t = 1; t < spec.stages.size(); ++t) {
        const auto& law = spec.stages[t];
        std::vector<std::size_t> next;
        next.reserve(frontier.size() * law.size());
        for (auto parent : frontier) {
            const double p = nodes[parent].prob;
            for (std::size_t s = 0; s < law.size(); ++s) {
                next.push_back(nodes.size());
                nodes.push_back(NodeSpec{static_cast<long long>(nodes.size()), nodes[parent].label,
                                         static_cast<int>(t) + 1, law.points[s], p * law.probs[s]});
            }
        }
        frontier = std::move(next);
    }
    return ProbabilityTree(static_cast<int>(spec.stages.size()), first.points.front().size(), std::move(nodes));
}

namespace {

// Successor law of k with children sharing an outcome merged; kept in order of
// first appearance. Conditional masses are zero when P(k) = 0.
StageMarginal successor_law(const ProbabilityTree& tree, NodeId k) {
    StageMarginal law;
    const double pk = tree.prob(k);
    for (NodeId m : tree.children(k)) {
        const double p = pk > 0.0 ? tree.prob(m) / pk : 0.0;
        auto it = std::find(law.points.begin(), law.points.end(), tree.outcome(m));
        if (it == law.points.end()) {
            law.points.push_back(tree.outcome(m));
            law.probs.push_back(p);
        } else {
            law.probs[static_cast<std::size_t>(it - law.points.begin())] += p;
        }
    }
    return law;
}

std::vector<std::size_t> sorted_order(const StageMarginal& law) {
    std::vector<std::size_t> idx(law.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return law.points[x] < law.points[y]; });
    return idx;
}

}  // namespace

SwiDetection detect_swi(const ProbabilityTree& tree, double tol) {
    SwiDetection result;
    SwiSpec spec;
    spec.stages.push_back(StageMarginal{{tree.outcome(tree.root())}, {1.0}});

    for (int t = 1; t < tree.stages(); ++t) {
        const auto nodes = tree.stage_nodes(t);
        auto ref_it = std::find_if(nodes.begin(), nodes.end(), [&](NodeId k) { return tree.prob(k) > 0.0; });
        if (ref_it == nodes.end()) ref_it = nodes.begin();
        const NodeId ref = *ref_it;
        const auto ref_law = successor_law(tree, ref);
        const auto ref_order = sorted_order(ref_law);

        for (NodeId k : nodes) {
            if (k == ref) continue;
            auto fail = [&](std::string why) {
                result.violation = SwiViolation{t, tree.label(ref), tree.label(k), std::move(why)};
            };
            const auto law = successor_law(tree, k);
            if (law.size() != ref_law.size()) {
                fail("successor outcomes differ in number");
                return result;
            }
            const auto order = sorted_order(law);
            for (std::size_t s = 0; s < law.size(); ++s) {
                const auto a = ref_order[s], b = order[s];
                if (law.points[b] != ref_law.points[a]) {
                    fail("successor outcomes differ");
                    return result;
                }
                if (tree.prob(k) > 0.0 && std::abs(law.probs[b] - ref_law.probs[a]) > tol) {
                    fail("conditional successor probabilities differ");
                    return result;
                }
            }
        }
        spec.stages.push_back(ref_law);
    }
    result.spec = std::move(spec);
    return result;
}

NotStagewiseIndependentError::NotStagewiseIndependentError(std::string which, SwiViolation violation)
    : Error("tree " + which + " is not stagewise independent: node " + std::to_string(violation.node) +
            " at stage " + std::to_string(violation.stage) + " (" + violation.message + ", reference node " +
            std::to_string(violation.reference_node) + ")"),
      which_(std::move(which)),
      violation_(std::move(violation)) {}

namespace {

SwiSpec require_swi(const ProbabilityTree& tree, const char* which) {
    auto detection = detect_swi(tree);
    if (!detection.ok()) throw NotStagewiseIndependentError(which, *detection.violation);
    return std::move(*detection.spec);
}

// Unweighted W_p(P_t, Q_t) for every stage, in stage order.
std::vector<double> stage_wasserstein(const SwiSpec& p, const SwiSpec& q, const StagewiseMetric& metric,
                                      unsigned threads) {
    std::vector<double> w(p.stages.size());
    detail::parallel_for(w.size(), threads, [&](std::size_t t) {
        w[t] = wasserstein_p(p.stages[t], q.stages[t], metric, static_cast<int>(t) + 1);
    });
    return w;
}

}  // namespace

NestedResult nested_swi(const ProbabilityTree& a, const ProbabilityTree& b, const StagewiseMetric& metric,
                        const NestedOptions& options) {
    require_comparable(a, b, metric);
    const auto pa = require_swi(a, "A");
    const auto pb = require_swi(b, "B");
    const auto w = stage_wasserstein(pa, pb, metric, options.threads);

    NestedResult result;
    result.method = NestedMethod::swi;
    result.stage_terms.resize(w.size());
    for (std::size_t t = 0; t < w.size(); ++t) {
        result.stage_terms[t] = metric.weight(static_cast<int>(t) + 1) * w[t];
        result.value_p += result.stage_terms[t];
    }
    result.value_root = root_of(result.value_p, metric.order());
    return result;
}

SubtreeIdentityReport subtree_identity_check(const ProbabilityTree& a, const ProbabilityTree& b,
                                             const StagewiseMetric& metric, std::optional<NodeId> k,
                                             std::optional<NodeId> l) {
    require_comparable(a, b, metric);
    if (k.has_value() != l.has_value()) throw ValidationError("subtree identity check needs both nodes or neither");
    const auto pa = require_swi(a, "A");
    const auto pb = require_swi(b, "B");
    const auto w = stage_wasserstein(pa, pb, metric, 0);

    // remainder[t] = sum_{tau > t} w_tau W_tau, with t 1-based (remainder[T] = 0).
    const int T = a.stages();
    std::vector<double> remainder(static_cast<std::size_t>(T) + 1, 0.0);
    for (int t = T - 1; t >= 0; --t)
        remainder[static_cast<std::size_t>(t)] =
            remainder[static_cast<std::size_t>(t) + 1] + metric.weight(t + 1) * w[static_cast<std::size_t>(t)];

    const auto dp = nested_dp(a, b, metric);
    const auto& table = *dp.table;

    SubtreeIdentityReport report;
    auto check = [&](NodeId x, NodeId y) {
        const int t = a.stage(x);
        if (b.stage(y) != t) throw StageMismatchError("subtree identity check needs a same-stage node pair");
        const auto px = a.path_outcomes(x);
        const auto py = b.path_outcomes(y);
        double expected = 0.0;
        for (int tau = 1; tau <= t; ++tau)
            expected += metric.weight(tau) * ground_distance_p(metric, tau, px[static_cast<std::size_t>(tau) - 1],
                                                               py[static_cast<std::size_t>(tau) - 1]);
        expected += remainder[static_cast<std::size_t>(t)];
        const double defect = std::abs(table.at(x, y) - expected) / std::max(1.0, std::abs(expected));
        ++report.pairs_checked;
        if (report.pairs_checked == 1 || defect > report.max_defect) {
            report.max_defect = defect;
            report.worst_a = a.label(x);
            report.worst_b = b.label(y);
        }
    };

    if (k) {
        if (*k >= a.size() || *l >= b.size()) throw ValidationError("node id out of range");
        check(*k, *l);
        return report;
    }
    for (int t = 1; t <= T; ++t)
        for (NodeId x : a.stage_nodes(t))
            for (NodeId y : b.stage_nodes(t)) check(x, y);
    return report;
}

}  // namespace treedist
