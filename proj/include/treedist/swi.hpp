#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "treedist/errors.hpp"
#include "treedist/metric.hpp"
#include "treedist/nested.hpp"
#include "treedist/tree.hpp"

namespace treedist {

/// Per-stage marginals of a stagewise independent process, stage 1 first.
struct SwiSpec {
    std::vector<StageMarginal> stages;
};

/// Validates each marginal and requires a deterministic (single-point) first stage.
void check_swi_spec(const SwiSpec& spec, double tol = kDefaultTreeTolerance);

/// Product tree of single-stage fans: every stage-t node has one child per
/// point of the stage-(t+1) marginal, with that marginal as conditional law.
ProbabilityTree build_swi_tree(const SwiSpec& spec);

struct SwiViolation {
    int stage = 0;                 // stage of the offending node
    long long reference_node = 0;  // label of the node whose successors define the stage law
    long long node = 0;            // label of the first node that disagrees
    std::string message;
};

struct SwiDetection {
    std::optional<SwiSpec> spec;
    std::optional<SwiViolation> violation;
    [[nodiscard]] bool ok() const { return spec.has_value(); }
};

inline constexpr double kDefaultSwiTolerance = 1e-9;

/// Succeeds when, at every stage, all nodes with positive mass have the same
/// successor law: identical outcome multiset (bitwise) with conditional
/// probabilities equal within `tol`. Successors sharing an outcome are merged.
/// Zero-mass nodes are only required to have the same successor outcomes.
SwiDetection detect_swi(const ProbabilityTree& tree, double tol = kDefaultSwiTolerance);

/// Raised by the fast path when a tree is not stagewise independent.
class NotStagewiseIndependentError : public Error {
public:
    NotStagewiseIndependentError(std::string which, SwiViolation violation);
    [[nodiscard]] const std::string& which() const { return which_; }
    [[nodiscard]] const SwiViolation& violation() const { return violation_; }

private:
    std::string which_;
    SwiViolation violation_;
};

/// Fast path for stagewise independent trees:
///   d^p(A, B) = sum_t w_t * W_p(P_t, Q_t)
/// with the stage marginals recovered by detect_swi. stage_terms holds each
/// weighted summand; no node-pair table is produced.
NestedResult nested_swi(const ProbabilityTree& a, const ProbabilityTree& b, const StagewiseMetric& metric,
                        const NestedOptions& options = {});

struct SubtreeIdentityReport {
    std::size_t pairs_checked = 0;
    double max_defect = 0.0;
    long long worst_a = 0;
    long long worst_b = 0;
    double tolerance = 1e-8;
    [[nodiscard]] bool ok() const { return max_defect <= tolerance; }
};

/// Compares the DP table entry d^p(k,l) against
///   sum_{tau <= t} w_tau d_tau^p(xi_tau^k, zeta_tau^l) + sum_{tau > t} w_tau W_p(P_tau, Q_tau)
/// for the given pair, or for every node pair when k and l are omitted.
/// Defects are scaled by max(1, |value|).
SubtreeIdentityReport subtree_identity_check(const ProbabilityTree& a, const ProbabilityTree& b,
                                             const StagewiseMetric& metric, std::optional<NodeId> k = std::nullopt,
                                             std::optional<NodeId> l = std::nullopt);

// ---------------------------------------------------------------------------
// Reduction

struct KMeansResult {
    std::vector<Point> centroids;
    std::vector<double> masses;              // cluster masses
    std::vector<std::size_t> assignment;     // point -> centroid
    std::vector<double> objective_history;   // weighted SSE after each assignment step
    std::size_t iterations = 0;
    [[nodiscard]] double objective() const { return objective_history.back(); }
};

inline constexpr std::size_t kKMeansMaxIterations = 200;
inline constexpr std::size_t kKMeansRestarts = 10;

/// One weighted Lloyd run from farthest-point seeding, the first seed being
/// `first`. Stops when assignments are stable or after 200 iterations.
KMeansResult weighted_kmeans_from(const std::vector<Point>& points, const std::vector<double>& weights,
                                  std::size_t k, std::size_t first);

/// Best of up to 10 seeded restarts (distinct first seeds drawn from `seed`).
KMeansResult weighted_kmeans(const std::vector<Point>& points, const std::vector<double>& weights, std::size_t k,
                             std::uint64_t seed);

struct ReductionResult {
    SwiSpec reduced;
    std::vector<double> stage_values;  // W_p(P_t, Q_t), unweighted
    double total_p = 0.0;              // sum_t w_t * stage_values[t]
};

/// Reduces every stage marginal independently to `targets[t]` points.
/// p = 2 with Euclidean ground metric: weighted K-means. Otherwise: support
/// subset chosen by swap local search, masses from nearest-point assignment.
/// Deterministic for a fixed seed. Throws ValidationError on bad targets.
ReductionResult reduce_swi(const SwiSpec& spec, const std::vector<std::size_t>& targets,
                           const StagewiseMetric& metric, std::uint64_t seed, unsigned threads = 0);

/// Reduction of a single marginal (stage index selects the ground metric).
StageMarginal reduce_marginal(const StageMarginal& marginal, std::size_t target, const StagewiseMetric& metric,
                              int stage, std::uint64_t seed);

}  // namespace treedist
