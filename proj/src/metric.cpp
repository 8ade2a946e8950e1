#include "treedist/metric.hpp"

#include <cmath>

#include "treedist/errors.hpp"

namespace treedist {

GroundMetric parse_ground_metric(const std::string& name) {
    if (name == "euclidean") return GroundMetric::euclidean;
    if (name == "abs") return GroundMetric::abs;
    throw ValidationError("unknown ground metric '" + name + "'");
}

std::string to_string(GroundMetric g) { return g == GroundMetric::euclidean ? "euclidean" : "abs"; }

StagewiseMetric::StagewiseMetric(double order, std::vector<double> weights, std::vector<GroundMetric> ground)
    : order_(order), weights_(std::move(weights)), ground_(std::move(ground)) {
    if (!(order_ >= 1.0) || !std::isfinite(order_)) throw ValidationError("metric order p must be >= 1");
    if (weights_.empty()) throw ValidationError("metric needs one weight per stage");
    for (double w : weights_)
        if (!(w > 0.0) || !std::isfinite(w)) throw ValidationError("metric weights must be positive");
    if (ground_.size() == 1 && weights_.size() > 1) ground_.resize(weights_.size(), ground_.front());
    if (ground_.size() != weights_.size()) throw ValidationError("ground metric count differs from weight count");
}

StagewiseMetric::StagewiseMetric(double order, std::vector<double> weights, GroundMetric ground)
    : StagewiseMetric(order, std::move(weights), std::vector<GroundMetric>{ground}) {}

StagewiseMetric StagewiseMetric::defaults(int stages) {
    return StagewiseMetric(2.0, std::vector<double>(static_cast<std::size_t>(stages), 1.0));
}

double StagewiseMetric::weight(int t) const {
    if (t < 1 || t > stages()) throw ValidationError("metric stage index out of range");
    return weights_[static_cast<std::size_t>(t) - 1];
}

GroundMetric StagewiseMetric::ground(int t) const {
    if (t < 1 || t > stages()) throw ValidationError("metric stage index out of range");
    return ground_[static_cast<std::size_t>(t) - 1];
}

void StagewiseMetric::require_stages(int stages) const {
    if (stages != this->stages())
        throw StageMismatchError("metric has " + std::to_string(this->stages()) + " weights but trees have " +
                                 std::to_string(stages) + " stages");
}

double ground_distance_p(const StagewiseMetric& metric, int t, const Point& x, const Point& y) {
    if (x.size() != y.size()) throw ValidationError("ground distance: dimension mismatch");
    const double p = metric.order();
    if (metric.ground(t) == GroundMetric::euclidean) {
        double sq = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) sq += (x[i] - y[i]) * (x[i] - y[i]);
        if (p == 2.0) return sq;
        if (p == 1.0) return std::sqrt(sq);
        return std::pow(sq, p / 2.0);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
    if (p == 1.0) return s;
    if (p == 2.0) return s * s;
    return std::pow(s, p);
}

double scenario_distance_p(const StagewiseMetric& metric, const std::vector<Point>& a,
                           const std::vector<Point>& b) {
    if (a.size() != b.size()) throw ValidationError("scenario distance: path length mismatch");
    metric.require_stages(static_cast<int>(a.size()));
    double sum = 0.0;
    for (int t = 1; t <= metric.stages(); ++t) {
        const auto i = static_cast<std::size_t>(t) - 1;
        sum += metric.weight(t) * ground_distance_p(metric, t, a[i], b[i]);
    }
    return sum;
}

double scenario_distance_p(const StagewiseMetric& metric, const ScenarioPath& a, const ScenarioPath& b) {
    return scenario_distance_p(metric, a.outcomes, b.outcomes);
}

double root_of(double value_p, double order) {
    if (value_p <= 0.0) return 0.0;
    if (order == 1.0) return value_p;
    if (order == 2.0) return std::sqrt(value_p);
    return std::pow(value_p, 1.0 / order);
}

}  // namespace treedist
