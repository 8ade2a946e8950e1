#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "treedist/io.hpp"

namespace treedist::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kValidation = 2,
    kInfeasible = 3,
    kStageMismatch = 4,
    kNotStagewiseIndependent = 5,
    kSizeCap = 6,
};

struct RunConfig {
    std::string command;  // validate | wasserstein | nested | swi-check | product | reduce
    std::vector<std::string> inputs;
    std::optional<std::string> metric_path;
    std::optional<std::string> output_path;
    double tree_tol = kDefaultTreeTolerance;
    double swi_tol = kDefaultSwiTolerance;
    std::string method = "auto";  // auto | lp | dp | swi
    bool force_dp = false;
    bool bench = false;
    bool include_table = false;
    bool include_plan = false;
    int stage = 1;  // metric stage used by `wasserstein`
    std::uint64_t seed = 0;
    std::vector<std::size_t> targets;
    std::optional<std::size_t> lp_cap;  // falls back to TREEDIST_LP_CAP, then 10000
    int verbosity = 0;
};

struct Outcome {
    int exit_code = kOk;
    io::json report;
};

Outcome cmd_validate(const RunConfig& config);
Outcome cmd_wasserstein(const RunConfig& config);
Outcome cmd_nested(const RunConfig& config);
Outcome cmd_swi_check(const RunConfig& config);
Outcome cmd_product(const RunConfig& config);
Outcome cmd_reduce(const RunConfig& config);

/// Dispatches on config.command and maps library exceptions to exit codes
/// with an {"error": ..., "message": ...} report.
Outcome run(const RunConfig& config);

/// Parses "1,3,3,2".
std::vector<std::size_t> parse_targets(const std::string& text);

}  // namespace treedist::cli
