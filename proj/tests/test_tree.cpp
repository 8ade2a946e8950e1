#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "treedist/errors.hpp"
#include "treedist/swi.hpp"
#include "treedist/tree.hpp"

using namespace treedist;
using namespace treedist::testing;

namespace {

ProbabilityTree fan(std::vector<double> probs, std::vector<double> outcomes) {
    std::vector<TreeRow> rows{{-1, {0.0}, 1.0}};
    for (std::size_t i = 0; i < probs.size(); ++i) rows.push_back({0, {outcomes[i]}, probs[i]});
    return tree_from_rows(2, rows);
}

// Binary 3-stage tree with hand-set probabilities; two stage-2 nodes share outcome 1.
ProbabilityTree three_stage() {
    return tree_from_rows(3, {{-1, {0.0}, 1.0},
                              {0, {1.0}, 0.4},
                              {0, {2.0}, 0.6},
                              {1, {5.0}, 0.2},
                              {1, {6.0}, 0.8},
                              {2, {5.0}, 0.5},
                              {2, {7.0}, 0.5}});
}

bool has_rule(const ValidationReport& r, const std::string& rule) {
    return std::any_of(r.violations.begin(), r.violations.end(), [&](const auto& v) { return v.rule == rule; });
}

}  // namespace

TEST_CASE("validate accepts a consistent two-stage tree") {
    CHECK(validate(fan({0.5, 0.5}, {1.0, 2.0})).ok());
}

TEST_CASE("validate reports a leaf sum of 1.1") {
    std::vector<NodeSpec> nodes{{0, std::nullopt, 1, {0.0}, 1.0}, {1, 0, 2, {1.0}, 0.5}, {2, 0, 2, {2.0}, 0.6}};
    const auto report = validate(ProbabilityTree(2, 1, nodes));
    REQUIRE_FALSE(report.ok());
    CHECK(has_rule(report, "leaf_sum"));
    const auto it = std::find_if(report.violations.begin(), report.violations.end(),
                                 [](const auto& v) { return v.rule == "leaf_sum"; });
    CHECK(std::abs(it->residual) == doctest::Approx(0.1));
}

TEST_CASE("validate names the internal node whose successors sum to 0.9 P(k)") {
    std::vector<NodeSpec> nodes{{10, std::nullopt, 1, {0.0}, 1.0}, {11, 10, 2, {1.0}, 0.5}, {12, 10, 2, {2.0}, 0.5},
                                {13, 11, 3, {1.0}, 0.25}, {14, 11, 3, {2.0}, 0.2},  {15, 12, 3, {1.0}, 0.5}};
    const auto report = validate(ProbabilityTree(3, 1, nodes));
    REQUIRE_FALSE(report.ok());
    const auto it = std::find_if(report.violations.begin(), report.violations.end(),
                                 [](const auto& v) { return v.rule == "node_identity"; });
    REQUIRE(it != report.violations.end());
    CHECK(it->node == 11);
    CHECK(std::abs(it->residual) == doctest::Approx(0.05));
}

TEST_CASE("validate flags root probability and negative mass") {
    std::vector<NodeSpec> nodes{{0, std::nullopt, 1, {0.0}, 0.9}, {1, 0, 2, {1.0}, 1.2}, {2, 0, 2, {2.0}, -0.3}};
    const auto report = validate(ProbabilityTree(2, 1, nodes));
    CHECK(has_rule(report, "root_probability"));
    CHECK(has_rule(report, "nonnegative"));
}

TEST_CASE("validate flags leaves before the last stage") {
    std::vector<NodeSpec> nodes{{0, std::nullopt, 1, {0.0}, 1.0}, {1, 0, 2, {1.0}, 0.5}, {2, 0, 2, {2.0}, 0.5},
                                {3, 1, 3, {1.0}, 0.5}};
    CHECK(has_rule(validate(ProbabilityTree(3, 1, nodes)), "leaf_stage"));
}

TEST_CASE("construction rejects broken topology") {
    using V = std::vector<NodeSpec>;
    CHECK_THROWS_AS(ProbabilityTree(2, 1, V{{0, std::nullopt, 1, {0.0}, 1.0}, {1, 7, 2, {1.0}, 1.0}}),
                    ValidationError);
    CHECK_THROWS_AS(ProbabilityTree(3, 1, V{{0, std::nullopt, 1, {0.0}, 1.0}, {1, 0, 3, {1.0}, 1.0}}),
                    ValidationError);
    CHECK_THROWS_AS(ProbabilityTree(2, 1, V{{0, std::nullopt, 1, {0.0}, 1.0}, {1, std::nullopt, 1, {1.0}, 1.0}}),
                    ValidationError);
    CHECK_THROWS_AS(ProbabilityTree(2, 1, V{{0, std::nullopt, 1, {0.0}, 1.0}, {0, 0, 2, {1.0}, 1.0}}),
                    ValidationError);
    CHECK_THROWS_AS(ProbabilityTree(2, 2, V{{0, std::nullopt, 1, {0.0, 0.0}, 1.0}, {1, 0, 2, {1.0}, 1.0}}),
                    ValidationError);
}

TEST_CASE("nodes are stored stage by stage with the root first") {
    std::vector<NodeSpec> nodes{{5, 1, 3, {3.0}, 1.0}, {1, 0, 2, {1.0}, 1.0}, {0, std::nullopt, 1, {0.0}, 1.0}};
    const ProbabilityTree tree(3, 1, nodes);
    CHECK(tree.label(tree.root()) == 0);
    CHECK(tree.stage_nodes(3).size() == 1);
    CHECK(tree.label(tree.leaves().front()) == 5);
    CHECK(tree.find_label(1).has_value());
    CHECK_FALSE(tree.find_label(99).has_value());
}

TEST_CASE("conditional probability") {
    const auto tree = three_stage();
    const NodeId k = *tree.find_label(1);
    const NodeId m = *tree.find_label(3);
    SUBCASE("root conditioning returns the unconditional probability") {
        for (NodeId x = 0; x < tree.size(); ++x) CHECK(conditional_probability(tree, x, tree.root()) == tree.prob(x));
    }
    SUBCASE("self conditioning") { CHECK(conditional_probability(tree, k, k) == 1.0); }
    SUBCASE("0.08 below 0.4 gives 0.2, matching the leaf sums") {
        CHECK(tree.prob(k) == doctest::Approx(0.4));
        CHECK(tree.prob(m) == doctest::Approx(0.08));
        double under_m = 0.0, under_k = 0.0;
        for (NodeId leaf : tree.leaves()) {
            if (tree.descends_from(leaf, m)) under_m += tree.prob(leaf);
            if (tree.descends_from(leaf, k)) under_k += tree.prob(leaf);
        }
        CHECK(conditional_probability(tree, m, k) == doctest::Approx(under_m / under_k).epsilon(1e-14));
        CHECK(conditional_probability(tree, m, k) == doctest::Approx(0.2).epsilon(1e-14));
    }
    SUBCASE("non-descendants get zero") { CHECK(conditional_probability(tree, *tree.find_label(5), k) == 0.0); }
    SUBCASE("null conditioning event") {
        std::vector<NodeSpec> nodes{{0, std::nullopt, 1, {0.0}, 1.0}, {1, 0, 2, {1.0}, 1.0}, {2, 0, 2, {2.0}, 0.0}};
        const ProbabilityTree z(2, 1, nodes);
        CHECK_THROWS_AS(conditional_probability(z, 2, 2), ConditioningError);
    }
}

TEST_CASE("P(m | k) P(k) reproduces P(m) on random trees") {
    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const auto tree = random_tree(rng, 4, 3, 2);
        for (NodeId m = 0; m < tree.size(); ++m)
            for (int t = 1; t <= tree.stage(m); ++t) {
                const NodeId k = tree.ancestor_at(m, t);
                CHECK(std::abs(conditional_probability(tree, m, k) * tree.prob(k) - tree.prob(m)) <= 1e-12);
            }
    }
}

TEST_CASE("stage marginals") {
    SUBCASE("stage 1 is the root point") {
        const auto m = stage_marginal(three_stage(), 1);
        REQUIRE(m.size() == 1);
        CHECK(m.probs[0] == 1.0);
        CHECK(m.points[0] == Point{0.0});
    }
    SUBCASE("hand-built three-stage tree agrees with the leaf-sum oracle") {
        const auto tree = three_stage();
        for (int t = 1; t <= 3; ++t) {
            auto got = stage_marginal(tree, t);
            const auto want = leaf_sum_marginal(tree, t);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                const auto j = static_cast<std::size_t>(
                    std::find(want.points.begin(), want.points.end(), got.points[i]) - want.points.begin());
                REQUIRE(j < want.size());
                CHECK(got.probs[i] == doctest::Approx(want.probs[j]).epsilon(1e-14));
            }
        }
        // Outcome 5 is reached from both stage-2 nodes: 0.4*0.2 + 0.6*0.5.
        const auto last = stage_marginal(tree, 3);
        const auto five = std::find(last.points.begin(), last.points.end(), Point{5.0}) - last.points.begin();
        CHECK(last.probs[static_cast<std::size_t>(five)] == doctest::Approx(0.38));
    }
    SUBCASE("product-built tree reproduces its factors") {
        SwiSpec spec{{StageMarginal{{{0.0}}, {1.0}}, StageMarginal{{{1.0}, {2.0}}, {0.3, 0.7}},
                      StageMarginal{{{4.0}, {5.0}, {6.0}}, {0.2, 0.3, 0.5}}}};
        const auto tree = build_swi_tree(spec);
        for (int t = 1; t <= 3; ++t) {
            const auto m = stage_marginal(tree, t);
            REQUIRE(m.size() == spec.stages[static_cast<std::size_t>(t) - 1].size());
            for (std::size_t i = 0; i < m.size(); ++i) {
                CHECK(m.points[i] == spec.stages[static_cast<std::size_t>(t) - 1].points[i]);
                CHECK(m.probs[i] == doctest::Approx(spec.stages[static_cast<std::size_t>(t) - 1].probs[i]));
            }
        }
    }
    SUBCASE("last-stage mass is one on random trees") {
        Rng rng(3);
        for (int rep = 0; rep < 20; ++rep) {
            const auto tree = random_tree(rng, 3, 4, 1);
            CHECK(stage_marginal(tree, 3).total_mass() == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("tree product") {
    SUBCASE("0.4 times 0.2") {
        const auto a = fan({0.4, 0.6}, {1.0, 2.0});
        const auto b = fan({0.2, 0.8}, {3.0, 4.0});
        const auto ab = tree_product(a, b);
        CHECK(ab.stages() == 3);
        bool found = false;
        for (NodeId leaf : ab.leaves()) {
            const auto path = ab.path_outcomes(leaf);
            if (path[1] == Point{1.0} && path[2] == Point{3.0}) {
                CHECK(ab.prob(leaf) == doctest::Approx(0.08).epsilon(1e-14));
                found = true;
            }
        }
        CHECK(found);
        CHECK(validate(ab).ok());
    }
    SUBCASE("single-node factor leaves probabilities unchanged") {
        const auto a = three_stage();
        const ProbabilityTree one(1, 1, {NodeSpec{0, std::nullopt, 1, {9.0}, 1.0}});
        const auto ab = tree_product(a, one);
        CHECK(ab.stages() == a.stages());
        std::vector<double> pa, pab;
        for (NodeId l : a.leaves()) pa.push_back(a.prob(l));
        for (NodeId l : ab.leaves()) pab.push_back(ab.prob(l));
        std::sort(pa.begin(), pa.end());
        std::sort(pab.begin(), pab.end());
        CHECK(pa == pab);
    }
    SUBCASE("2 leaves times 3 leaves") {
        const auto ab = tree_product(fan({0.5, 0.5}, {1.0, 2.0}), fan({0.2, 0.3, 0.5}, {1.0, 2.0, 3.0}));
        CHECK(ab.leaves().size() == 6);
        double s = 0.0;
        for (NodeId l : ab.leaves()) s += ab.prob(l);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("random products: leaf count, validity and path concatenation") {
        Rng rng(11);
        for (int rep = 0; rep < 10; ++rep) {
            const auto a = random_tree(rng, 3, 3, 2);
            const auto b = random_tree(rng, 2, 3, 2);
            const auto ab = tree_product(a, b);
            CHECK(ab.stages() == a.stages() + b.stages() - 1);
            CHECK(ab.leaves().size() == a.leaves().size() * b.leaves().size());
            CHECK(validate(ab).ok());
            const auto got = flat_scenarios(ab);
            const auto want = product_scenarios(a, b);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].path == want[i].path);
                CHECK(got[i].probability == doctest::Approx(want[i].probability).epsilon(1e-14));
            }
        }
    }
    SUBCASE("associative up to relabeling") {
        Rng rng(5);
        for (int rep = 0; rep < 10; ++rep) {
            const auto a = random_tree(rng, 2, 3, 1);
            const auto b = random_tree(rng, 3, 2, 1);
            const auto c = random_tree(rng, 2, 3, 1);
            const auto left = flat_scenarios(tree_product(tree_product(a, b), c));
            const auto right = flat_scenarios(tree_product(a, tree_product(b, c)));
            REQUIRE(left.size() == right.size());
            for (std::size_t i = 0; i < left.size(); ++i) {
                CHECK(left[i].path == right[i].path);
                CHECK(std::abs(left[i].probability - right[i].probability) <= 1e-12);
            }
        }
    }
}

TEST_CASE("scenarios") {
    SUBCASE("single node") {
        const ProbabilityTree one(1, 1, {NodeSpec{0, std::nullopt, 1, {2.0}, 1.0}});
        const auto s = scenarios(one);
        REQUIRE(s.size() == 1);
        CHECK(s[0].probability == 1.0);
        CHECK(s[0].outcomes == std::vector<Point>{{2.0}});
    }
    SUBCASE("complete binary three-stage tree") {
        const auto s = scenarios(three_stage());
        CHECK(s.size() == 4);
        double total = 0.0;
        for (const auto& x : s) {
            CHECK(x.outcomes.size() == 3);
            total += x.probability;
        }
        CHECK(total == doctest::Approx(1.0));
    }
}

TEST_CASE("path-extended subtree") {
    const auto tree = three_stage();
    const NodeId k = *tree.find_label(2);
    const auto sub = path_extended_subtree(tree, k);
    CHECK(validate(sub).ok());
    CHECK(sub.stages() == 3);
    CHECK(sub.leaves().size() == 2);
    for (NodeId l : sub.leaves()) CHECK(sub.prob(l) == doctest::Approx(0.5));
    CHECK(sub.path_outcomes(sub.leaves().front())[1] == Point{2.0});
}
