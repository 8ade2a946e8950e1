#include "treedist/io.hpp"

#include <fstream>

#include "treedist/errors.hpp"

namespace treedist::io {

namespace {

template <typename T>
T field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad field '") + key + "': " + e.what());
    }
}

Point point_from(const json& j) {
    if (!j.is_array()) throw ValidationError("point must be an array of numbers");
    Point p;
    for (const auto& x : j) {
        if (!x.is_number()) throw ValidationError("point coordinates must be numbers");
        p.push_back(x.get<double>());
    }
    return p;
}

}  // namespace

ProbabilityTree tree_from_json(const json& j) {
    const int stages = field<int>(j, "stages");
    const auto dimension = field<long long>(j, "dimension");
    if (dimension < 0) throw ValidationError("dimension must be nonnegative");
    if (!j.contains("nodes") || !j["nodes"].is_array()) throw ValidationError("missing 'nodes' array");
    std::vector<NodeSpec> nodes;
    for (const auto& n : j["nodes"]) {
        NodeSpec s;
        s.label = field<long long>(n, "id");
        if (!n.contains("parent")) throw ValidationError("node without 'parent' field");
        if (!n["parent"].is_null()) s.parent = field<long long>(n, "parent");
        s.stage = field<int>(n, "stage");
        if (!n.contains("outcome")) throw ValidationError("node without 'outcome'");
        s.outcome = point_from(n["outcome"]);
        s.prob = field<double>(n, "prob");
        nodes.push_back(std::move(s));
    }
    return ProbabilityTree(stages, static_cast<std::size_t>(dimension), std::move(nodes));
}

json tree_to_json(const ProbabilityTree& tree) {
    json nodes = json::array();
    for (const auto& s : tree.node_specs()) {
        nodes.push_back({{"id", s.label},
                         {"parent", s.parent ? json(*s.parent) : json(nullptr)},
                         {"stage", s.stage},
                         {"outcome", s.outcome},
                         {"prob", s.prob}});
    }
    return {{"stages", tree.stages()}, {"dimension", tree.dimension()}, {"nodes", std::move(nodes)}};
}

StageMarginal marginal_from_json(const json& j) {
    if (!j.is_array()) throw ValidationError("marginal must be an array of {point, prob} entries");
    StageMarginal m;
    for (const auto& e : j) {
        if (!e.contains("point")) throw ValidationError("marginal entry without 'point'");
        m.points.push_back(point_from(e["point"]));
        m.probs.push_back(field<double>(e, "prob"));
    }
    return m;
}

json marginal_to_json(const StageMarginal& m) {
    json out = json::array();
    for (std::size_t i = 0; i < m.size(); ++i) out.push_back({{"point", m.points[i]}, {"prob", m.probs[i]}});
    return out;
}

SwiSpec swi_spec_from_json(const json& j) {
    if (!j.is_object() || !j.contains("stages") || !j["stages"].is_array())
        throw ValidationError("SWI spec needs a 'stages' array");
    SwiSpec spec;
    for (const auto& s : j["stages"]) spec.stages.push_back(marginal_from_json(s));
    return spec;
}

json swi_spec_to_json(const SwiSpec& spec) {
    json stages = json::array();
    for (const auto& m : spec.stages) stages.push_back(marginal_to_json(m));
    return {{"stages", std::move(stages)}};
}

StagewiseMetric metric_from_json(const json& j, int stages) {
    if (!j.is_object()) throw ValidationError("metric must be a JSON object");
    const double p = j.contains("p") ? field<double>(j, "p") : 2.0;
    std::vector<double> weights(static_cast<std::size_t>(stages), 1.0);
    if (j.contains("weights")) weights = field<std::vector<double>>(j, "weights");
    std::vector<GroundMetric> ground{GroundMetric::euclidean};
    if (j.contains("ground")) {
        ground.clear();
        if (j["ground"].is_array()) {
            for (const auto& g : j["ground"]) ground.push_back(parse_ground_metric(g.get<std::string>()));
        } else {
            ground.push_back(parse_ground_metric(field<std::string>(j, "ground")));
        }
    }
    StagewiseMetric metric(p, std::move(weights), std::move(ground));
    metric.require_stages(stages);
    return metric;
}

json metric_to_json(const StagewiseMetric& metric) {
    json ground = json::array();
    for (int t = 1; t <= metric.stages(); ++t) ground.push_back(to_string(metric.ground(t)));
    return {{"p", metric.order()}, {"weights", metric.weights()}, {"ground", std::move(ground)}};
}

json nested_result_to_json(const NestedResult& result, const ProbabilityTree& a, const ProbabilityTree& b,
                           bool include_table) {
    json out = {{"value_p", result.value_p}, {"value_root", result.value_root}, {"method", to_string(result.method)}};
    if (!result.stage_terms.empty()) out["stage_terms"] = result.stage_terms;
    if (include_table && result.table) {
        const auto& table = *result.table;
        json stages = json::array();
        for (int t = 1; t <= table.stages(); ++t) {
            json a_nodes = json::array(), b_nodes = json::array(), values = json::array();
            for (std::size_t r = 0; r < table.rows(t); ++r) a_nodes.push_back(a.label(table.a_node(t, r)));
            for (std::size_t c = 0; c < table.cols(t); ++c) b_nodes.push_back(b.label(table.b_node(t, c)));
            const auto& v = table.values(t);
            for (std::size_t r = 0; r < table.rows(t); ++r)
                values.push_back(std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(r * table.cols(t)),
                                                     v.begin() + static_cast<std::ptrdiff_t>((r + 1) * table.cols(t))));
            stages.push_back({{"stage", t}, {"a_nodes", a_nodes}, {"b_nodes", b_nodes}, {"values", values}});
        }
        out["table"] = std::move(stages);
    }
    return out;
}

json reduction_to_json(const ReductionResult& result) {
    json out = swi_spec_to_json(result.reduced);
    out["stage_values"] = result.stage_values;
    out["total_p"] = result.total_p;
    return out;
}

json validation_to_json(const ValidationReport& report) {
    json violations = json::array();
    for (const auto& v : report.violations) {
        violations.push_back({{"rule", v.rule},
                              {"node", v.node ? json(*v.node) : json(nullptr)},
                              {"residual", v.residual},
                              {"message", v.message}});
    }
    return {{"valid", report.ok()}, {"violations", std::move(violations)}};
}

json swi_violation_to_json(const SwiViolation& v) {
    return {{"stage", v.stage}, {"node", v.node}, {"reference_node", v.reference_node}, {"message", v.message}};
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace treedist::io
