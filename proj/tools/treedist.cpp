#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "treedist/commands.hpp"

namespace {

using treedist::cli::RunConfig;

void add_common(CLI::App* cmd, RunConfig& config) {
    cmd->add_option("-o,--output", config.output_path, "Write the JSON result to this file instead of stdout");
    cmd->add_option("--tol", config.tree_tol, "Tree/marginal validation tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_flag("-v,--verbose", config.verbosity, "Print a one-line summary to stderr");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wasserstein and nested distances between scenario trees"};
    app.require_subcommand(1);
    RunConfig config;

    auto* validate = app.add_subcommand("validate", "Check the probability invariants of a tree");
    validate->add_option("tree", config.inputs, "Tree JSON file")->required()->check(CLI::ExistingFile);
    add_common(validate, config);

    auto* wasserstein = app.add_subcommand("wasserstein", "Wasserstein distance between two marginals");
    wasserstein->add_option("marginals", config.inputs, "Two marginal JSON files")
        ->required()
        ->expected(2)
        ->check(CLI::ExistingFile);
    wasserstein->add_option("--metric", config.metric_path, "Metric JSON file")->check(CLI::ExistingFile);
    wasserstein->add_option("--stage", config.stage, "Metric stage whose ground distance is used")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    wasserstein->add_flag("--plan", config.include_plan, "Include the optimal transport plan");
    add_common(wasserstein, config);

    auto* nested = app.add_subcommand("nested", "Nested distance between two trees");
    nested->add_option("trees", config.inputs, "Two tree JSON files")->required()->expected(2)->check(CLI::ExistingFile);
    nested->add_option("--metric", config.metric_path, "Metric JSON file")->check(CLI::ExistingFile);
    nested->add_option("--method", config.method, "auto, lp, dp or swi")
        ->check(CLI::IsMember({"auto", "lp", "dp", "swi"}))
        ->capture_default_str();
    nested->add_flag("--force-dp", config.force_dp, "Use dynamic programming even for stagewise independent input");
    nested->add_flag("--bench", config.bench, "Report wall time of dp against swi");
    nested->add_flag("--table", config.include_table, "Include the node-pair table (dp)");
    nested->add_option("--swi-tol", config.swi_tol, "Tolerance on conditional probabilities for SWI detection")
        ->check(CLI::PositiveNumber);
    add_common(nested, config);

    auto* swi_check = app.add_subcommand("swi-check", "Stagewise independence and verification report");
    swi_check->add_option("trees", config.inputs, "One or two tree JSON files")
        ->required()
        ->expected(1, 2)
        ->check(CLI::ExistingFile);
    swi_check->add_option("--metric", config.metric_path, "Metric JSON file")->check(CLI::ExistingFile);
    swi_check->add_option("--swi-tol", config.swi_tol, "Tolerance on conditional probabilities")
        ->check(CLI::PositiveNumber);
    add_common(swi_check, config);

    auto* product = app.add_subcommand("product", "Tree product A (x) B");
    product->add_option("trees", config.inputs, "Two tree JSON files")->required()->expected(2)->check(CLI::ExistingFile);
    add_common(product, config);

    std::string targets;
    auto* reduce = app.add_subcommand("reduce", "Stagewise reduction of an SWI spec");
    reduce->add_option("spec", config.inputs, "SWI spec JSON file")->required()->check(CLI::ExistingFile);
    reduce->add_option("--targets", targets, "Comma-separated support sizes per stage, e.g. 1,3,3,2")->required();
    reduce->add_option("--seed", config.seed, "Seed for the K-means restarts")->capture_default_str();
    reduce->add_option("--metric", config.metric_path, "Metric JSON file")->check(CLI::ExistingFile);
    add_common(reduce, config);

    CLI11_PARSE(app, argc, argv);
    config.command = app.get_subcommands().front()->get_name();

    treedist::cli::Outcome outcome;
    if (config.command == "reduce") {
        try {
            config.targets = treedist::cli::parse_targets(targets);
        } catch (const std::exception& e) {
            outcome = {treedist::cli::kValidation, {{"error", "validation"}, {"message", e.what()}}};
        }
    }
    if (outcome.report.is_null()) outcome = treedist::cli::run(config);

    const std::string text = treedist::io::dump(outcome.report);
    if (config.output_path && outcome.exit_code == treedist::cli::kOk) {
        std::ofstream out(*config.output_path, std::ios::binary);
        if (!out) {
            std::cerr << "treedist: cannot write " << *config.output_path << "\n";
            return treedist::cli::kUsage;
        }
        out << text;
    } else {
        std::cout << text;
    }
    if (outcome.exit_code != treedist::cli::kOk && outcome.report.contains("message"))
        std::cerr << "treedist: " << outcome.report["message"].get<std::string>() << "\n";
    if (config.verbosity > 0 && outcome.report.contains("value_p"))
        std::cerr << config.command << ": value_p = " << outcome.report["value_p"].get<double>() << "\n";
    return outcome.exit_code;
}
