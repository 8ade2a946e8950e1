#include "treedist/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "treedist/errors.hpp"
#include "treedist/transport.hpp"

namespace treedist::cli {

using io::json;

namespace {

void require_inputs(const RunConfig& config, std::size_t min, std::size_t max) {
    if (config.inputs.size() < min || config.inputs.size() > max) {
        std::ostringstream os;
        os << config.command << " expects " << min;
        if (max != min) os << " to " << max;
        os << " input file(s), got " << config.inputs.size();
        throw ValidationError(os.str());
    }
}

ProbabilityTree load_tree(const std::string& path) { return io::tree_from_json(io::read_json_file(path)); }

StagewiseMetric load_metric(const RunConfig& config, int stages) {
    if (!config.metric_path) return StagewiseMetric::defaults(stages);
    return io::metric_from_json(io::read_json_file(*config.metric_path), stages);
}

std::size_t lp_cap(const RunConfig& config) {
    if (config.lp_cap) return *config.lp_cap;
    if (const char* env = std::getenv("TREEDIST_LP_CAP")) {
        char* end = nullptr;
        const auto v = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0') throw ValidationError("TREEDIST_LP_CAP must be a positive integer");
        return static_cast<std::size_t>(v);
    }
    return kDefaultLpCap;
}

// Loads and validates a tree; a failing validation produces the exit-2 report.
std::optional<Outcome> load_valid_tree(const RunConfig& config, const std::string& path,
                                       std::optional<ProbabilityTree>& out) {
    out.emplace(load_tree(path));
    const auto report = validate(*out, config.tree_tol);
    if (report.ok()) return std::nullopt;
    auto body = io::validation_to_json(report);
    body["error"] = "validation";
    body["file"] = path;
    body["message"] = report.violations.front().message;
    return Outcome{kValidation, std::move(body)};
}

bool within(double x, double y, double tol) { return std::abs(x - y) <= tol * std::max(1.0, std::abs(y)); }

template <typename Fn>
double seconds_per_run(Fn&& fn) {
    using clock = std::chrono::steady_clock;
    std::size_t runs = 0;
    const auto start = clock::now();
    double elapsed = 0.0;
    do {
        fn();
        ++runs;
        elapsed = std::chrono::duration<double>(clock::now() - start).count();
    } while (elapsed < 0.05 && runs < 1000);
    return elapsed / static_cast<double>(runs);
}

}  // namespace

std::vector<std::size_t> parse_targets(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(item, &used);
        } catch (const std::exception&) {
            throw ValidationError("bad target '" + item + "'");
        }
        if (used != item.size() || v < 0) throw ValidationError("bad target '" + item + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw ValidationError("no reduction targets given");
    return out;
}

Outcome cmd_validate(const RunConfig& config) {
    require_inputs(config, 1, 1);
    const auto tree = load_tree(config.inputs[0]);
    const auto report = validate(tree, config.tree_tol);
    auto body = io::validation_to_json(report);
    body["stages"] = tree.stages();
    body["nodes"] = tree.size();
    body["leaves"] = tree.leaves().size();
    return Outcome{report.ok() ? kOk : kValidation, std::move(body)};
}

Outcome cmd_wasserstein(const RunConfig& config) {
    require_inputs(config, 2, 2);
    std::vector<StageMarginal> marginals;
    for (const auto& path : config.inputs) {
        auto m = io::marginal_from_json(io::read_json_file(path));
        const double residual = m.total_mass() - 1.0;
        if (std::abs(residual) > config.tree_tol) {
            json body = {{"error", "validation"},
                         {"file", path},
                         {"message", "marginal mass differs from 1"},
                         {"residual", residual}};
            return Outcome{kValidation, std::move(body)};
        }
        check_marginal(m, config.tree_tol);
        marginals.push_back(std::move(m));
    }
    const auto metric = load_metric(config, std::max(1, config.stage));
    const auto problem = make_transport_problem(marginals[0], marginals[1], metric, config.stage);
    const auto plan = solve_transport(problem);
    json body = {{"value_p", plan.value}, {"value_root", root_of(plan.value, metric.order())}, {"p", metric.order()}};
    if (config.include_plan) {
        json rows = json::array();
        for (std::size_t i = 0; i < plan.rows; ++i) {
            json row = json::array();
            for (std::size_t j = 0; j < plan.cols; ++j) row.push_back(plan.at(i, j));
            rows.push_back(std::move(row));
        }
        body["plan"] = std::move(rows);
    }
    return Outcome{kOk, std::move(body)};
}

Outcome cmd_nested(const RunConfig& config) {
    require_inputs(config, 2, 2);
    std::optional<ProbabilityTree> a, b;
    if (auto bad = load_valid_tree(config, config.inputs[0], a)) return *bad;
    if (auto bad = load_valid_tree(config, config.inputs[1], b)) return *bad;
    if (a->stages() != b->stages())
        throw StageMismatchError("trees have " + std::to_string(a->stages()) + " and " +
                                 std::to_string(b->stages()) + " stages");
    const auto metric = load_metric(config, a->stages());

    NestedOptions options;
    options.lp_cap = lp_cap(config);

    std::string method = config.force_dp ? "dp" : config.method;
    bool swi_a = false, swi_b = false;
    if (method == "auto" || config.bench) {
        swi_a = detect_swi(*a, config.swi_tol).ok();
        swi_b = detect_swi(*b, config.swi_tol).ok();
    }
    if (method == "auto") method = swi_a && swi_b ? "swi" : "dp";

    NestedResult result;
    if (method == "lp") {
        result = nested_lp(*a, *b, metric, options);
    } else if (method == "dp") {
        result = nested_dp(*a, *b, metric, options);
    } else if (method == "swi") {
        for (const auto* tree : {&*a, &*b}) {
            const auto detection = detect_swi(*tree, config.swi_tol);
            if (!detection.ok())
                throw NotStagewiseIndependentError(tree == &*a ? "A" : "B", *detection.violation);
        }
        result = nested_swi(*a, *b, metric, options);
    } else {
        throw ValidationError("unknown method '" + method + "' (expected auto, lp, dp or swi)");
    }

    auto body = io::nested_result_to_json(result, *a, *b, config.include_table);
    if (config.bench) {
        json bench;
        double dp_value = 0.0;
        bench["dp_seconds"] = seconds_per_run([&] { dp_value = nested_dp(*a, *b, metric, options).value_p; });
        bench["dp_value_p"] = dp_value;
        if (swi_a && swi_b) {
            double swi_value = 0.0;
            const double swi_seconds =
                seconds_per_run([&] { swi_value = nested_swi(*a, *b, metric, options).value_p; });
            bench["swi_seconds"] = swi_seconds;
            bench["swi_value_p"] = swi_value;
            bench["speedup"] = bench["dp_seconds"].get<double>() / std::max(swi_seconds, 1e-12);
        } else {
            bench["swi_seconds"] = nullptr;
            bench["note"] = "swi method unavailable: inputs are not stagewise independent";
        }
        body["bench"] = std::move(bench);
    }
    return Outcome{kOk, std::move(body)};
}

Outcome cmd_swi_check(const RunConfig& config) {
    require_inputs(config, 1, 2);
    std::vector<ProbabilityTree> trees;
    json body;
    json per_tree = json::array();
    bool all_passed = true;
    for (const auto& path : config.inputs) {
        std::optional<ProbabilityTree> t;
        if (auto bad = load_valid_tree(config, path, t)) return *bad;
        const auto detection = detect_swi(*t, config.swi_tol);
        json entry = {{"file", path}, {"swi", detection.ok() ? "pass" : "fail"}};
        if (!detection.ok()) entry["violation"] = io::swi_violation_to_json(*detection.violation);
        per_tree.push_back(std::move(entry));
        trees.push_back(std::move(*t));
    }
    body["trees"] = std::move(per_tree);

    if (trees.size() == 2) {
        const auto& a = trees[0];
        const auto& b = trees[1];
        if (a.stages() != b.stages()) throw StageMismatchError("trees have different stage counts");
        const auto metric = load_metric(config, a.stages());
        const bool both_swi = detect_swi(a, config.swi_tol).ok() && detect_swi(b, config.swi_tol).ok();
        const std::size_t leaf_pairs = a.leaves().size() * b.leaves().size();
        constexpr std::size_t kCheckCap = 2'000;
        json props;

        const auto dp = nested_dp(a, b, metric);
        if (both_swi) {
            const auto fast = nested_swi(a, b, metric);
            const bool pass = within(fast.value_p, dp.value_p, 1e-8);
            props["swi_equals_dp"] = {{"pass", pass}, {"dp_value_p", dp.value_p}, {"swi_value_p", fast.value_p}};
            all_passed &= pass;

            const auto identity = subtree_identity_check(a, b, metric);
            props["subtree_identity"] = {{"pass", identity.ok()},
                                         {"pairs_checked", identity.pairs_checked},
                                         {"max_defect", identity.max_defect}};
            all_passed &= identity.ok();
        } else {
            props["swi_equals_dp"] = {{"skipped", "inputs are not both stagewise independent"}};
        }

        if (leaf_pairs <= kCheckCap) {
            const auto lp = nested_lp(a, b, metric);
            const bool pass = within(lp.value_p, dp.value_p, 1e-8);
            props["dp_vs_lp"] = {{"pass", pass}, {"dp_value_p", dp.value_p}, {"lp_value_p", lp.value_p}};
            all_passed &= pass;

            const auto eq = check_constraint_equivalence(a, b, metric, kCheckCap);
            props["constraint_equivalence"] = {{"pass", eq.ok()},
                                               {"leaf_form_value", eq.leaf_form_value},
                                               {"successor_form_value", eq.successor_form_value},
                                               {"leaf_solution_residual", eq.leaf_solution_in_successor_form},
                                               {"successor_solution_residual", eq.successor_solution_in_leaf_form}};
            all_passed &= eq.ok();

            std::vector<std::pair<NodeId, NodeId>> pairs{{a.root(), b.root()}};
            if (a.stages() >= 3) pairs.emplace_back(a.stage_nodes(2).front(), b.stage_nodes(2).front());
            json hom = json::array();
            bool hom_pass = true;
            for (const auto& [k, l] : pairs) {
                for (double alpha : {0.0, 0.37, 1.0, 2.5}) {
                    const auto r = check_homogeneity(a, b, metric, k, l, alpha);
                    hom.push_back({{"a_node", a.label(k)},
                                   {"b_node", b.label(l)},
                                   {"alpha", alpha},
                                   {"phi_alpha", r.phi_alpha},
                                   {"phi_one", r.phi_one},
                                   {"pass", r.ok()}});
                    hom_pass &= r.ok();
                }
            }
            props["homogeneity"] = {{"pass", hom_pass}, {"cases", std::move(hom)}};
            all_passed &= hom_pass;
        } else {
            const std::string why = "leaf pairs " + std::to_string(leaf_pairs) + " exceed " + std::to_string(kCheckCap);
            props["dp_vs_lp"] = {{"skipped", why}};
            props["constraint_equivalence"] = {{"skipped", why}};
            props["homogeneity"] = {{"skipped", why}};
        }
        body["properties"] = std::move(props);
    }
    body["all_passed"] = all_passed;
    return Outcome{kOk, std::move(body)};
}

Outcome cmd_product(const RunConfig& config) {
    require_inputs(config, 2, 2);
    std::optional<ProbabilityTree> a, b;
    if (auto bad = load_valid_tree(config, config.inputs[0], a)) return *bad;
    if (auto bad = load_valid_tree(config, config.inputs[1], b)) return *bad;
    return Outcome{kOk, io::tree_to_json(tree_product(*a, *b))};
}

Outcome cmd_reduce(const RunConfig& config) {
    require_inputs(config, 1, 1);
    const auto spec = io::swi_spec_from_json(io::read_json_file(config.inputs[0]));
    check_swi_spec(spec, config.tree_tol);
    const auto metric = load_metric(config, static_cast<int>(spec.stages.size()));
    // Single-threaded so the output does not depend on scheduling.
    const auto result = reduce_swi(spec, config.targets, metric, config.seed, 1);
    return Outcome{kOk, io::reduction_to_json(result)};
}

Outcome run(const RunConfig& config) {
    auto error = [](int code, const char* kind, const std::exception& e) {
        return Outcome{code, json{{"error", kind}, {"message", e.what()}}};
    };
    try {
        if (config.command == "validate") return cmd_validate(config);
        if (config.command == "wasserstein") return cmd_wasserstein(config);
        if (config.command == "nested") return cmd_nested(config);
        if (config.command == "swi-check") return cmd_swi_check(config);
        if (config.command == "product") return cmd_product(config);
        if (config.command == "reduce") return cmd_reduce(config);
        return Outcome{kUsage, json{{"error", "usage"}, {"message", "unknown command '" + config.command + "'"}}};
    } catch (const NotStagewiseIndependentError& e) {
        auto out = error(kNotStagewiseIndependent, "not_stagewise_independent", e);
        out.report["tree"] = e.which();
        out.report["violation"] = io::swi_violation_to_json(e.violation());
        return out;
    } catch (const StageMismatchError& e) {
        return error(kStageMismatch, "stage_mismatch", e);
    } catch (const SizeCapError& e) {
        return error(kSizeCap, "size_cap", e);
    } catch (const InfeasibleError& e) {
        return error(kInfeasible, "infeasible", e);
    } catch (const ValidationError& e) {
        return error(kValidation, "validation", e);
    } catch (const ConditioningError& e) {
        return error(kValidation, "validation", e);
    } catch (const std::exception& e) {
        return error(kUsage, "internal", e);
    }
}

}  // namespace treedist::cli
