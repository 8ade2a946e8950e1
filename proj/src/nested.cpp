#include "treedist/nested.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "parallel.hpp"
#include "treedist/errors.hpp"

namespace treedist {

std::string to_string(NestedMethod m) {
    switch (m) {
        case NestedMethod::lp: return "lp";
        case NestedMethod::dp: return "dp";
        case NestedMethod::swi: return "swi";
    }
    return "unknown";
}

void require_comparable(const ProbabilityTree& a, const ProbabilityTree& b, const StagewiseMetric& metric) {
    if (a.stages() != b.stages())
        throw StageMismatchError("trees have different stage counts (" + std::to_string(a.stages()) + " vs " +
                                 std::to_string(b.stages()) + ")");
    if (a.dimension() != b.dimension()) throw ValidationError("trees have different outcome dimensions");
    metric.require_stages(a.stages());
    for (const auto* tree : {&a, &b}) {
        const auto report = validate(*tree);
        if (!report.ok()) throw ValidationError("invalid tree: " + report.violations.front().message);
    }
}

// ---------------------------------------------------------------------------
// NodePairTable

NodePairTable::NodePairTable(const ProbabilityTree& a, const ProbabilityTree& b)
    : pos_a_(a.size()), pos_b_(b.size()), stage_a_(a.size()), stage_b_(b.size()) {
    const int T = a.stages();
    stages_.resize(static_cast<std::size_t>(T));
    for (int t = 1; t <= T; ++t) {
        auto& st = stages_[static_cast<std::size_t>(t) - 1];
        const auto an = a.stage_nodes(t);
        const auto bn = b.stage_nodes(t);
        st.a_nodes.assign(an.begin(), an.end());
        st.b_nodes.assign(bn.begin(), bn.end());
        for (std::size_t r = 0; r < an.size(); ++r) {
            pos_a_[an[r]] = r;
            stage_a_[an[r]] = t;
        }
        for (std::size_t c = 0; c < bn.size(); ++c) {
            pos_b_[bn[c]] = c;
            stage_b_[bn[c]] = t;
        }
        st.values.assign(an.size() * bn.size(), 0.0);
        st.mass_free.assign(an.size() * bn.size(), 0);
    }
}

const NodePairTable::Stage& NodePairTable::stage(int t) const {
    if (t < 1 || t > stages()) throw ValidationError("table stage out of range");
    return stages_[static_cast<std::size_t>(t) - 1];
}

std::size_t NodePairTable::slot(NodeId k, NodeId l, int& t) const {
    if (k >= pos_a_.size() || l >= pos_b_.size()) throw ValidationError("node id out of range");
    t = stage_a_[k];
    if (t != stage_b_[l])
        throw StageMismatchError("nodes are at different stages (" + std::to_string(stage_a_[k]) + " vs " +
                                 std::to_string(stage_b_[l]) + ")");
    return pos_a_[k] * stage(t).b_nodes.size() + pos_b_[l];
}

double NodePairTable::at(NodeId k, NodeId l) const {
    int t = 0;
    const auto s = slot(k, l, t);
    return stage(t).values[s];
}

bool NodePairTable::mass_free(NodeId k, NodeId l) const {
    int t = 0;
    const auto s = slot(k, l, t);
    return stage(t).mass_free[s] != 0;
}

const TransportPlan* NodePairTable::plan(NodeId k, NodeId l) const {
    int t = 0;
    const auto s = slot(k, l, t);
    const auto& plans = stage(t).plans;
    if (plans.empty() || !plans[s]) return nullptr;
    return &*plans[s];
}

// ---------------------------------------------------------------------------
// Dynamic programming

namespace {

// Conditional successor distribution of k. A node without mass gets uniform
// conditionals; its entry never receives coupling mass from its parent pair.
std::vector<double> successor_conditionals(const ProbabilityTree& tree, NodeId k) {
    const auto ch = tree.children(k);
    std::vector<double> out(ch.size());
    const double pk = tree.prob(k);
    for (std::size_t r = 0; r < ch.size(); ++r)
        out[r] = pk > 0.0 ? tree.prob(ch[r]) / pk : 1.0 / static_cast<double>(ch.size());
    return out;
}

}  // namespace

class NestedSweep {
public:
    static NodePairTable run(const ProbabilityTree& a, const ProbabilityTree& b, const StagewiseMetric& metric,
                             const NestedOptions& options) {
        NodePairTable table(a, b);
        const int T = a.stages();

        {
            auto& st = table.stages_[static_cast<std::size_t>(T) - 1];
            const std::size_t nb = st.b_nodes.size();
            std::vector<std::vector<Point>> paths_b(nb);
            for (std::size_t c = 0; c < nb; ++c) paths_b[c] = b.path_outcomes(st.b_nodes[c]);
            detail::parallel_for(st.a_nodes.size(), options.threads, [&](std::size_t r) {
                const auto path_a = a.path_outcomes(st.a_nodes[r]);
                for (std::size_t c = 0; c < nb; ++c) {
                    st.values[r * nb + c] = scenario_distance_p(metric, path_a, paths_b[c]);
                    st.mass_free[r * nb + c] = !(a.prob(st.a_nodes[r]) > 0.0 && b.prob(st.b_nodes[c]) > 0.0);
                }
            });
        }

        for (int t = T - 1; t >= 1; --t) {
            auto& st = table.stages_[static_cast<std::size_t>(t) - 1];
            const auto& next = table.stages_[static_cast<std::size_t>(t)];
            const std::size_t na = st.a_nodes.size(), nb = st.b_nodes.size();
            const std::size_t next_cols = next.b_nodes.size();
            if (options.keep_plans) st.plans.assign(na * nb, std::nullopt);

            std::vector<std::vector<double>> cond_b(nb);
            for (std::size_t c = 0; c < nb; ++c) cond_b[c] = successor_conditionals(b, st.b_nodes[c]);

            detail::parallel_for(na, options.threads, [&](std::size_t r) {
                const NodeId k = st.a_nodes[r];
                const auto kids_a = a.children(k);
                const auto cond_a = successor_conditionals(a, k);
                for (std::size_t c = 0; c < nb; ++c) {
                    const NodeId l = st.b_nodes[c];
                    const auto kids_b = b.children(l);
                    TransportProblem local;
                    local.rows = kids_a.size();
                    local.cols = kids_b.size();
                    local.supply = cond_a;
                    local.demand = cond_b[c];
                    local.cost.resize(local.rows * local.cols);
                    for (std::size_t i = 0; i < local.rows; ++i)
                        for (std::size_t j = 0; j < local.cols; ++j)
                            local.cost[i * local.cols + j] =
                                next.values[table.pos_a_[kids_a[i]] * next_cols + table.pos_b_[kids_b[j]]];
                    auto plan = solve_transport(local);
                    st.values[r * nb + c] = plan.value;
                    st.mass_free[r * nb + c] = !(a.prob(k) > 0.0 && b.prob(l) > 0.0);
                    if (options.keep_plans) st.plans[r * nb + c] = std::move(plan);
                }
            });
        }
        return table;
    }
};

NestedResult nested_dp(const ProbabilityTree& a, const ProbabilityTree& b, const StagewiseMetric& metric,
                       const NestedOptions& options) {
    require_comparable(a, b, metric);
    NestedResult result;
    result.method = NestedMethod::dp;
    result.table = NestedSweep::run(a, b, metric, options);
    result.value_p = result.table->at(a.root(), b.root());
    result.value_root = root_of(result.value_p, metric.order());
    return result;
}

double subtree_distance(const ProbabilityTree& a, const ProbabilityTree& b, const StagewiseMetric& metric,
                        NodeId k, NodeId l) {
    if (k >= a.size() || l >= b.size()) throw ValidationError("node id out of range");
    if (a.stage(k) != b.stage(l))
        throw StageMismatchError("subtree distance needs nodes of the same stage");
    return nested_dp(a, b, metric).table->at(k, l);
}

// ---------------------------------------------------------------------------
// Monolithic LPs

LinearProgram leaf_form_lp(const ProbabilityTree& a, const ProbabilityTree& b, const StagewiseMetric& metric) {
    const auto leaves_a = a.leaves();
    const auto leaves_b = b.leaves();
    const std::size_t nb = leaves_b.size();
    LinearProgram lp(leaves_a.size() * nb);

    std::vector<std::size_t> leaf_pos_a(a.size()), leaf_pos_b(b.size());
    for (std::size_t i = 0; i < leaves_a.size(); ++i) leaf_pos_a[leaves_a[i]] = i;
    for (std::size_t j = 0; j < nb; ++j) leaf_pos_b[leaves_b[j]] = j;

    const auto paths_a = scenarios(a);
    const auto paths_b = scenarios(b);
    for (std::size_t i = 0; i < leaves_a.size(); ++i)
        for (std::size_t j = 0; j < nb; ++j) lp.set_cost(i * nb + j, scenario_distance_p(metric, paths_a[i], paths_b[j]));

    // At stage T every constraint reads pi_ij = pi_ij; only t < T contributes.
    for (int t = 1; t < a.stages(); ++t) {
        for (NodeId k : a.stage_nodes(t)) {
            const auto under_k = a.leaves_under(k);
            for (NodeId l : b.stage_nodes(t)) {
                const auto under_l = b.leaves_under(l);
                // Rows whose conditional is undefined (zero mass) are implied by the root rows.
                if (a.prob(k) > 0.0) {
                    for (NodeId i : under_k) {
                        const double cond = a.prob(i) / a.prob(k);
                        const auto row = lp.add_row(0.0);
                        for (NodeId i2 : under_k) {
                            const double coeff = (i2 == i ? 1.0 : 0.0) - cond;
                            if (coeff == 0.0) continue;
                            for (NodeId j : under_l) lp.add(row, leaf_pos_a[i2] * nb + leaf_pos_b[j], coeff);
                        }
                    }
                }
                if (b.prob(l) > 0.0) {
                    for (NodeId j : under_l) {
                        const double cond = b.prob(j) / b.prob(l);
                        const auto row = lp.add_row(0.0);
                        for (NodeId j2 : under_l) {
                            const double coeff = (j2 == j ? 1.0 : 0.0) - cond;
                            if (coeff == 0.0) continue;
                            for (NodeId i : under_k) lp.add(row, leaf_pos_a[i] * nb + leaf_pos_b[j2], coeff);
                        }
                    }
                }
            }
        }
    }
    const auto total = lp.add_row(1.0);
    for (std::size_t v = 0; v < lp.num_vars(); ++v) lp.add(total, v, 1.0);
    return lp;
}

SuccessorFormLp successor_form_lp(const ProbabilityTree& a, const ProbabilityTree& b,
                                  const StagewiseMetric& metric, NodeId k0, NodeId l0, double mass) {
    if (a.stage(k0) != b.stage(l0)) throw StageMismatchError("successor-form LP needs a same-stage node pair");
    if (!(mass >= 0.0)) throw ValidationError("subproblem mass must be nonnegative");

    SuccessorFormLp out{LinearProgram(0), std::vector<std::size_t>(a.size() * b.size(), SuccessorFormLp::npos),
                        b.size()};

    // Enumerate pairs below (k0, l0) stage by stage.
    std::vector<std::pair<NodeId, NodeId>> pairs{{k0, l0}};
    for (std::size_t h = 0; h < pairs.size(); ++h) {
        const auto [k, l] = pairs[h];
        out.var_of_pair[k * b.size() + l] = h;
        for (NodeId r : a.children(k))
            for (NodeId s : b.children(l)) pairs.emplace_back(r, s);
    }
    LinearProgram lp(pairs.size());
    for (std::size_t h = 0; h < pairs.size(); ++h) {
        const auto [k, l] = pairs[h];
        if (a.is_leaf(k) && b.is_leaf(l))
            lp.set_cost(h, scenario_distance_p(metric, a.path_outcomes(k), b.path_outcomes(l)));
    }

    const auto anchor = lp.add_row(mass);
    lp.add(anchor, 0, 1.0);
    for (std::size_t h = 0; h < pairs.size(); ++h) {
        const auto [k, l] = pairs[h];
        const auto kids_a = a.children(k);
        const auto kids_b = b.children(l);
        if (kids_a.empty() || kids_b.empty()) continue;
        auto v = [&](NodeId r, NodeId s) { return out.var_of_pair[r * b.size() + s]; };
        if (a.prob(k) > 0.0) {
            for (NodeId r : kids_a) {
                const auto row = lp.add_row(0.0);
                for (NodeId s : kids_b) lp.add(row, v(r, s), 1.0);
                lp.add(row, h, -a.prob(r) / a.prob(k));
            }
        }
        if (b.prob(l) > 0.0) {
            for (NodeId s : kids_b) {
                const auto row = lp.add_row(0.0);
                for (NodeId r : kids_a) lp.add(row, v(r, s), 1.0);
                lp.add(row, h, -b.prob(s) / b.prob(l));
            }
        }
        const auto row = lp.add_row(0.0);
        for (NodeId r : kids_a)
            for (NodeId s : kids_b) lp.add(row, v(r, s), 1.0);
        lp.add(row, h, -1.0);
    }
    out.lp = std::move(lp);
    return out;
}

namespace {

void check_cap(const ProbabilityTree& a, const ProbabilityTree& b, std::size_t cap) {
    const std::size_t n = a.leaves().size() * b.leaves().size();
    if (n > cap) {
        std::ostringstream os;
        os << "monolithic LP needs " << n << " leaf-pair variables, above the cap of " << cap;
        throw SizeCapError(os.str());
    }
}

LpSolution solve_or_throw(const LinearProgram& lp, const char* what) {
    auto sol = solve_lp(lp);
    if (sol.status != LpStatus::optimal)
        throw InfeasibleError(std::string(what) + " not solved: " + to_string(sol.status));
    return sol;
}

}  // namespace

NestedResult nested_lp(const ProbabilityTree& a, const ProbabilityTree& b, const StagewiseMetric& metric,
                       const NestedOptions& options) {
    require_comparable(a, b, metric);
    check_cap(a, b, options.lp_cap);
    const auto lp = leaf_form_lp(a, b, metric);
    auto sol = solve_or_throw(lp, "nested distance LP");
    NestedResult result;
    result.method = NestedMethod::lp;
    result.value_p = sol.objective;
    result.value_root = root_of(sol.objective, metric.order());
    result.leaf_coupling = std::move(sol.x);
    return result;
}

bool ConstraintEquivalenceReport::ok() const {
    const double scale = std::max(1.0, std::abs(leaf_form_value));
    return std::abs(leaf_form_value - successor_form_value) <= tolerance * scale &&
           leaf_solution_in_successor_form <= tolerance && successor_solution_in_leaf_form <= tolerance;
}

ConstraintEquivalenceReport check_constraint_equivalence(const ProbabilityTree& a, const ProbabilityTree& b,
                                                         const StagewiseMetric& metric, std::size_t cap) {
    require_comparable(a, b, metric);
    check_cap(a, b, cap);

    const auto leaf_lp = leaf_form_lp(a, b, metric);
    const auto succ = successor_form_lp(a, b, metric, a.root(), b.root(), 1.0);
    const auto leaf_sol = solve_or_throw(leaf_lp, "leaf-form LP");
    const auto succ_sol = solve_or_throw(succ.lp, "successor-form LP");

    const auto leaves_a = a.leaves();
    const auto leaves_b = b.leaves();
    const std::size_t nb = leaves_b.size();

    // Leaf-form optimum lifted to node pairs: pi_{k,l} = sum of leaf pairs below.
    std::vector<double> lifted(succ.lp.num_vars(), 0.0);
    for (std::size_t i = 0; i < leaves_a.size(); ++i) {
        for (std::size_t j = 0; j < nb; ++j) {
            const double x = leaf_sol.x[i * nb + j];
            if (x == 0.0) continue;
            std::optional<NodeId> k = leaves_a[i];
            std::optional<NodeId> l = leaves_b[j];
            for (; k && l; k = a.parent(*k), l = b.parent(*l)) lifted[succ.var(*k, *l)] += x;
        }
    }
    // Successor-form optimum restricted to leaf pairs.
    std::vector<double> projected(leaf_lp.num_vars(), 0.0);
    for (std::size_t i = 0; i < leaves_a.size(); ++i)
        for (std::size_t j = 0; j < nb; ++j) projected[i * nb + j] = succ_sol.x[succ.var(leaves_a[i], leaves_b[j])];

    ConstraintEquivalenceReport report;
    report.leaf_form_value = leaf_sol.objective;
    report.successor_form_value = succ_sol.objective;
    report.leaf_solution_in_successor_form = succ.lp.residual(lifted);
    report.successor_solution_in_leaf_form = leaf_lp.residual(projected);
    return report;
}

double HomogeneityReport::defect() const { return std::abs(phi_alpha - alpha * phi_one); }

bool HomogeneityReport::ok() const { return defect() <= tolerance * std::max(1.0, alpha); }

HomogeneityReport check_homogeneity(const ProbabilityTree& a, const ProbabilityTree& b,
                                    const StagewiseMetric& metric, NodeId k, NodeId l, double alpha) {
    require_comparable(a, b, metric);
    if (k >= a.size() || l >= b.size()) throw ValidationError("node id out of range");
    if (!(alpha >= 0.0)) throw ValidationError("homogeneity check needs alpha >= 0");
    const auto scaled = successor_form_lp(a, b, metric, k, l, alpha);
    const auto unit = successor_form_lp(a, b, metric, k, l, 1.0);
    HomogeneityReport report;
    report.alpha = alpha;
    report.phi_alpha = solve_or_throw(scaled.lp, "homogeneity subproblem").objective;
    report.phi_one = solve_or_throw(unit.lp, "homogeneity subproblem").objective;
    return report;
}

}  // namespace treedist
