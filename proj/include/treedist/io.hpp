#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "treedist/metric.hpp"
#include "treedist/nested.hpp"
#include "treedist/swi.hpp"
#include "treedist/tree.hpp"

namespace treedist::io {

using json = nlohmann::json;

/// {"stages", "dimension", "nodes": [{"id", "parent", "stage", "outcome", "prob"}]}
ProbabilityTree tree_from_json(const json& j);
json tree_to_json(const ProbabilityTree& tree);

/// [{"point": [...], "prob": p}, ...]
StageMarginal marginal_from_json(const json& j);
json marginal_to_json(const StageMarginal& m);

/// {"stages": [[{"point": [...], "prob": p}, ...], ...]}
SwiSpec swi_spec_from_json(const json& j);
json swi_spec_to_json(const SwiSpec& spec);

/// {"p": float, "weights": [float...], "ground": "euclidean"|"abs"|[...]}.
/// Missing fields fall back to p = 2, unit weights over `stages`, Euclidean.
StagewiseMetric metric_from_json(const json& j, int stages);
json metric_to_json(const StagewiseMetric& metric);

json nested_result_to_json(const NestedResult& result, const ProbabilityTree& a, const ProbabilityTree& b,
                           bool include_table);
json reduction_to_json(const ReductionResult& result);
json validation_to_json(const ValidationReport& report);
json swi_violation_to_json(const SwiViolation& v);

json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; doubles use the shortest round-trip form.
std::string dump(const json& j);

}  // namespace treedist::io
