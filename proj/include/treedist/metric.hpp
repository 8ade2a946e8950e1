#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "treedist/tree.hpp"

namespace treedist {

enum class GroundMetric {
    euclidean,  // ||x - y||_2
    abs,        // sum_i |x_i - y_i|
};

GroundMetric parse_ground_metric(const std::string& name);
std::string to_string(GroundMetric g);

/// Weighted stagewise distance of order p: d^p(xi, zeta) = sum_t w_t * d_t(xi_t, zeta_t)^p.
///
/// All computations stay on the d^p scale; the p-th root is only taken when
/// a final value is reported.
class StagewiseMetric {
public:
    StagewiseMetric(double order, std::vector<double> weights, std::vector<GroundMetric> ground);
    StagewiseMetric(double order, std::vector<double> weights, GroundMetric ground = GroundMetric::euclidean);

    /// p = 2, unit weights, Euclidean ground metric on every stage.
    static StagewiseMetric defaults(int stages);

    [[nodiscard]] double order() const { return order_; }
    [[nodiscard]] int stages() const { return static_cast<int>(weights_.size()); }
    [[nodiscard]] double weight(int t) const;
    [[nodiscard]] GroundMetric ground(int t) const;
    [[nodiscard]] const std::vector<double>& weights() const { return weights_; }

    /// Throws StageMismatchError unless the metric covers exactly `stages` stages.
    void require_stages(int stages) const;

private:
    double order_;
    std::vector<double> weights_;
    std::vector<GroundMetric> ground_;
};

/// d_t(x, y)^p for the ground metric of stage t (1-based).
double ground_distance_p(const StagewiseMetric& metric, int t, const Point& x, const Point& y);

/// sum_t w_t * d_t^p over two outcome sequences of length T.
double scenario_distance_p(const StagewiseMetric& metric, const std::vector<Point>& a,
                           const std::vector<Point>& b);
double scenario_distance_p(const StagewiseMetric& metric, const ScenarioPath& a, const ScenarioPath& b);

/// value^(1/p), clamping tiny negative round-off to zero.
double root_of(double value_p, double order);

}  // namespace treedist
