#include <cmath>

#include "doctest.h"
#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "treedist/errors.hpp"
#include "treedist/transport.hpp"

using namespace treedist;
using namespace treedist::testing;

namespace {

TransportProblem random_problem(Rng& rng, std::size_t m, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 10.0);
    TransportProblem pb{m, n, std::vector<double>(m * n), random_probs(rng, m), random_probs(rng, n)};
    for (auto& c : pb.cost) c = u(rng);
    return pb;
}

}  // namespace

TEST_CASE("single cell") {
    const auto plan = solve_transport(TransportProblem{1, 1, {7.0}, {1.0}, {1.0}});
    CHECK(plan.value == 7.0);
    CHECK(plan.at(0, 0) == 1.0);
}

TEST_CASE("zero diagonal costs give value zero") {
    Rng rng(4);
    auto pb = random_problem(rng, 5, 5);
    pb.demand = pb.supply;
    for (std::size_t i = 0; i < 5; ++i) pb.cost[i * 5 + i] = 0.0;
    const auto plan = solve_transport(pb);
    CHECK(plan.value == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("uniform problems match the permutation minimum") {
    Rng rng(99);
    for (std::size_t n = 1; n <= 6; ++n)
        for (int rep = 0; rep < 5; ++rep) {
            auto pb = random_problem(rng, n, n);
            pb.supply.assign(n, 1.0 / static_cast<double>(n));
            pb.demand = pb.supply;
            const auto plan = solve_transport(pb);
            CHECK(std::abs(plan.value - permutation_minimum(pb.cost, n)) <= 1e-10);
            CHECK(plan.marginal_residual(pb.supply, pb.demand) <= 1e-12);
        }
}

TEST_CASE("2x2 problems match vertex enumeration") {
    Rng rng(8);
    for (int rep = 0; rep < 50; ++rep) {
        const auto pb = random_problem(rng, 2, 2);
        CHECK(solve_transport(pb).value ==
              doctest::Approx(two_by_two_transport(pb.cost, pb.supply, pb.demand)).epsilon(1e-12));
    }
}

TEST_CASE("agrees with the general LP, with and without the total mass row") {
    Rng rng(12);
    for (int rep = 0; rep < 30; ++rep) {
        std::uniform_int_distribution<std::size_t> size(1, 8);
        const auto pb = random_problem(rng, size(rng), size(rng));
        const double v = solve_transport(pb).value;
        CHECK(solve_transport_as_lp(pb, false) == doctest::Approx(v).epsilon(1e-10));
        CHECK(solve_transport_as_lp(pb, true) == doctest::Approx(v).epsilon(1e-10));
    }
}

TEST_CASE("feasibility and symmetry on larger random problems") {
    Rng rng(21);
    for (int rep = 0; rep < 10; ++rep) {
        const auto pb = random_problem(rng, 30, 45);
        const auto plan = solve_transport(pb);
        CHECK(plan.marginal_residual(pb.supply, pb.demand) <= 1e-8);
        for (double f : plan.flow) CHECK(f >= 0.0);
        TransportProblem tr{pb.cols, pb.rows, std::vector<double>(pb.cost.size()), pb.demand, pb.supply};
        for (std::size_t i = 0; i < pb.rows; ++i)
            for (std::size_t j = 0; j < pb.cols; ++j) tr.cost[j * pb.rows + i] = pb.c(i, j);
        CHECK(std::abs(solve_transport(tr).value - plan.value) <= 1e-10);
    }
}

TEST_CASE("zero-mass atoms come back as empty rows and columns") {
    TransportProblem pb{3, 2, {1.0, 2.0, 0.0, 0.0, 3.0, 1.0}, {0.5, 0.0, 0.5}, {0.0, 1.0}};
    const auto plan = solve_transport(pb);
    CHECK(plan.value == doctest::Approx(1.5));
    CHECK(plan.at(1, 0) == 0.0);
    CHECK(plan.at(1, 1) == 0.0);
    CHECK(plan.at(0, 0) == 0.0);
}

TEST_CASE("input errors") {
    CHECK_THROWS_AS(solve_transport(TransportProblem{1, 2, {1.0, 1.0}, {1.0}, {0.5, 0.6}}), InfeasibleError);
    CHECK_THROWS_AS(solve_transport(TransportProblem{2, 1, {1.0, 1.0}, {1.5, -0.5}, {1.0}}), ValidationError);
    CHECK_THROWS_AS(solve_transport(TransportProblem{1, 1, {-1.0}, {1.0}, {1.0}}), ValidationError);
    // Within the balance tolerance the demand is rescaled.
    const auto plan = solve_transport(TransportProblem{1, 2, {1.0, 3.0}, {1.0}, {0.5, 0.5 + 5e-10}});
    CHECK(plan.value == doctest::Approx(2.0));
}

TEST_CASE("wasserstein distances between marginals") {
    const auto quad = StagewiseMetric::defaults(1);
    const StagewiseMetric lin(1.0, {1.0}, GroundMetric::abs);
    SUBCASE("identical marginals") {
        StageMarginal p{{{0.0}, {1.0}, {4.0}}, {0.2, 0.3, 0.5}};
        CHECK(wasserstein_p(p, p, quad, 1) == doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("two point masses") {
        CHECK(wasserstein_p(StageMarginal{{{0.0}}, {1.0}}, StageMarginal{{{3.0}}, {1.0}}, lin, 1) == 3.0);
    }
    SUBCASE("uniform{0,1} against uniform{0,2}") {
        const StageMarginal p{{{0.0}, {1.0}}, {0.5, 0.5}}, q{{{0.0}, {2.0}}, {0.5, 0.5}};
        const auto pb = make_transport_problem(p, q, lin, 1);
        const double oracle = two_by_two_transport(pb.cost, pb.supply, pb.demand);
        CHECK(oracle == doctest::Approx(0.5));
        CHECK(wasserstein_p(p, q, lin, 1) == doctest::Approx(oracle).epsilon(1e-14));
    }
    SUBCASE("one-dimensional W1 matches the CDF formula") {
        Rng rng(31);
        for (int rep = 0; rep < 30; ++rep) {
            StageMarginal p{{}, random_probs(rng, 5)}, q{{}, random_probs(rng, 4)};
            for (std::size_t i = 0; i < 5; ++i) p.points.push_back(random_point(rng, 1));
            for (std::size_t j = 0; j < 4; ++j) q.points.push_back(random_point(rng, 1));
            CHECK(wasserstein_p(p, q, lin, 1) == doctest::Approx(cdf_w1(p, q)).epsilon(1e-12));
        }
    }
    SUBCASE("unbalanced marginal is rejected") {
        CHECK_THROWS_AS(wasserstein_p(StageMarginal{{{0.0}}, {1.0}}, StageMarginal{{{1.0}}, {0.8}}, quad, 1),
                        ValidationError);
    }
}
