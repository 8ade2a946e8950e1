#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "parallel.hpp"
#include "treedist/errors.hpp"
#include "treedist/swi.hpp"
#include "treedist/transport.hpp"

namespace treedist {

namespace {

double squared_distance(const Point& x, const Point& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return s;
}

std::vector<std::size_t> farthest_point_seeds(std::size_t n, std::size_t k, std::size_t first,
                                              const auto& dist) {
    std::vector<std::size_t> seeds{first};
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = dist(i, first);
    while (seeds.size() < k) {
        std::size_t pick = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (nearest[i] > nearest[pick]) pick = i;
        seeds.push_back(pick);
        for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], dist(i, pick));
    }
    return seeds;
}

std::vector<std::size_t> first_picks(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(std::min(n, kKMeansRestarts));
    return order;
}

}  // namespace

KMeansResult weighted_kmeans_from(const std::vector<Point>& points, const std::vector<double>& weights,
                                  std::size_t k, std::size_t first) {
    const std::size_t n = points.size();
    if (k == 0 || k > n) throw ValidationError("k-means: cluster count must be in [1, number of points]");
    if (weights.size() != n) throw ValidationError("k-means: weight count mismatch");
    if (first >= n) throw ValidationError("k-means: first seed out of range");

    KMeansResult res;
    const auto seeds = farthest_point_seeds(
        n, k, first, [&](std::size_t i, std::size_t j) { return squared_distance(points[i], points[j]); });
    for (auto s : seeds) res.centroids.push_back(points[s]);

    constexpr auto unassigned = std::numeric_limits<std::size_t>::max();
    res.assignment.assign(n, unassigned);
    const std::size_t dim = points.front().size();

    while (true) {
        // Assignment step: a point moves only to a strictly closer centroid.
        bool changed = false;
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = res.assignment[i];
            double best_d = best == unassigned ? std::numeric_limits<double>::infinity()
                                               : squared_distance(points[i], res.centroids[best]);
            for (std::size_t c = 0; c < k; ++c) {
                const double d = squared_distance(points[i], res.centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (best != res.assignment[i]) changed = true;
            res.assignment[i] = best;
            objective += weights[i] * best_d;
        }

        // An empty cluster takes over the point contributing most to the objective.
        std::vector<double> mass(k, 0.0);
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            mass[res.assignment[i]] += weights[i];
            ++count[res.assignment[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] > 0) continue;
            std::size_t donor = n;
            double worst = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (count[res.assignment[i]] < 2) continue;
                const double contrib = weights[i] * squared_distance(points[i], res.centroids[res.assignment[i]]);
                if (contrib > worst) {
                    worst = contrib;
                    donor = i;
                }
            }
            objective -= worst;
            mass[res.assignment[donor]] -= weights[donor];
            --count[res.assignment[donor]];
            res.assignment[donor] = c;
            res.centroids[c] = points[donor];
            mass[c] = weights[donor];
            count[c] = 1;
            changed = true;
        }
        res.objective_history.push_back(objective);
        ++res.iterations;
        if (!changed || res.iterations >= kKMeansMaxIterations) {
            res.masses = std::move(mass);
            break;
        }

        // Centroid step: weighted means.
        std::vector<Point> sums(k, Point(dim, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < dim; ++d) sums[res.assignment[i]][d] += weights[i] * points[i][d];
        for (std::size_t c = 0; c < k; ++c) {
            if (!(mass[c] > 0.0)) continue;
            for (std::size_t d = 0; d < dim; ++d) res.centroids[c][d] = sums[c][d] / mass[c];
        }
    }
    return res;
}

KMeansResult weighted_kmeans(const std::vector<Point>& points, const std::vector<double>& weights, std::size_t k,
                             std::uint64_t seed) {
    if (points.empty()) throw ValidationError("k-means: no points");
    std::optional<KMeansResult> best;
    for (auto first : first_picks(points.size(), seed)) {
        auto run = weighted_kmeans_from(points, weights, k, first);
        if (!best || run.objective() < best->objective()) best = std::move(run);
    }
    return std::move(*best);
}

namespace {

// Support subset of the original points by best-improvement swaps; every
// point ships its mass to the nearest selected point, which is the optimal
// transport to a fixed support.
StageMarginal subset_reduction(const StageMarginal& m, std::size_t target, const StagewiseMetric& metric,
                               int stage, std::uint64_t seed) {
    const std::size_t n = m.size();
    std::vector<double> dist(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) dist[i * n + j] = ground_distance_p(metric, stage, m.points[i], m.points[j]);

    auto cost_of = [&](const std::vector<std::size_t>& support) {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (auto s : support) best = std::min(best, dist[i * n + s]);
            c += m.probs[i] * best;
        }
        return c;
    };

    std::vector<std::size_t> best_support;
    double best_cost = std::numeric_limits<double>::infinity();
    for (auto first : first_picks(n, seed)) {
        auto support =
            farthest_point_seeds(n, target, first, [&](std::size_t i, std::size_t j) { return dist[i * n + j]; });
        double cost = cost_of(support);
        for (std::size_t round = 0; round < 1000; ++round) {
            std::vector<char> chosen(n, 0);
            for (auto s : support) chosen[s] = 1;
            double round_best = cost;
            std::size_t out = target, in = n;
            for (std::size_t o = 0; o < target; ++o) {
                for (std::size_t c = 0; c < n; ++c) {
                    if (chosen[c]) continue;
                    auto trial = support;
                    trial[o] = c;
                    const double tc = cost_of(trial);
                    if (tc < round_best - 1e-15 * std::max(1.0, round_best)) {
                        round_best = tc;
                        out = o;
                        in = c;
                    }
                }
            }
            if (in == n) break;
            support[out] = in;
            cost = round_best;
        }
        if (cost < best_cost) {
            best_cost = cost;
            best_support = support;
        }
    }

    std::sort(best_support.begin(), best_support.end());
    StageMarginal out;
    out.probs.assign(target, 0.0);
    for (auto s : best_support) out.points.push_back(m.points[s]);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t arg = 0;
        for (std::size_t s = 1; s < target; ++s)
            if (dist[i * n + best_support[s]] < dist[i * n + best_support[arg]]) arg = s;
        out.probs[arg] += m.probs[i];
    }
    return out;
}

}  // namespace

StageMarginal reduce_marginal(const StageMarginal& marginal, std::size_t target, const StagewiseMetric& metric,
                              int stage, std::uint64_t seed) {
    check_marginal(marginal);
    if (target == 0) throw ValidationError("reduction target must be at least 1");
    if (target > marginal.size())
        throw ValidationError("reduction target " + std::to_string(target) + " exceeds support size " +
                              std::to_string(marginal.size()));
    if (target == marginal.size()) return marginal;

    // Zero-mass atoms play no role in the transport cost.
    StageMarginal live;
    for (std::size_t i = 0; i < marginal.size(); ++i) {
        if (marginal.probs[i] > 0.0) {
            live.points.push_back(marginal.points[i]);
            live.probs.push_back(marginal.probs[i]);
        }
    }
    if (target > live.size())
        throw ValidationError("reduction target exceeds the number of atoms with positive mass");
    if (target == live.size()) return live;

    if (metric.order() == 2.0 && metric.ground(stage) == GroundMetric::euclidean) {
        auto km = weighted_kmeans(live.points, live.probs, target, seed);
        return StageMarginal{std::move(km.centroids), std::move(km.masses)};
    }
    return subset_reduction(live, target, metric, stage, seed);
}

ReductionResult reduce_swi(const SwiSpec& spec, const std::vector<std::size_t>& targets,
                           const StagewiseMetric& metric, std::uint64_t seed, unsigned threads) {
    check_swi_spec(spec);
    const std::size_t T = spec.stages.size();
    metric.require_stages(static_cast<int>(T));
    if (targets.size() != T)
        throw ValidationError("expected " + std::to_string(T) + " reduction targets, got " +
                              std::to_string(targets.size()));
    if (targets.front() != 1) throw ValidationError("stage 1 is deterministic; its target must be 1");

    ReductionResult res;
    res.reduced.stages.resize(T);
    res.stage_values.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        if (targets[t] == 0 || targets[t] > spec.stages[t].size())
            throw ValidationError("reduction target for stage " + std::to_string(t + 1) + " must be in [1, " +
                                  std::to_string(spec.stages[t].size()) + "]");
    }
    detail::parallel_for(T, threads, [&](std::size_t t) {
        const int stage = static_cast<int>(t) + 1;
        res.reduced.stages[t] = reduce_marginal(spec.stages[t], targets[t], metric, stage, seed + t);
        res.stage_values[t] = wasserstein_p(spec.stages[t], res.reduced.stages[t], metric, stage);
    });
    for (std::size_t t = 0; t < T; ++t) res.total_p += metric.weight(static_cast<int>(t) + 1) * res.stage_values[t];
    return res;
}

}  // namespace treedist
