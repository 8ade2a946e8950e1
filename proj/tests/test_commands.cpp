#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "support/generators.hpp"
#include "treedist/commands.hpp"

using namespace treedist;
using namespace treedist::testing;
using treedist::io::json;
namespace fs = std::filesystem;

namespace {

struct Workdir {
    fs::path dir;
    Workdir() : dir(fs::temp_directory_path() / ("treedist_cmd_" + std::to_string(::getpid()))) {
        fs::create_directories(dir);
    }
    ~Workdir() { fs::remove_all(dir); }
    std::string write(const std::string& name, const json& j) const {
        const auto path = dir / name;
        std::ofstream(path) << j.dump();
        return path.string();
    }
};

cli::RunConfig config(std::string command, std::vector<std::string> inputs) {
    cli::RunConfig c;
    c.command = std::move(command);
    c.inputs = std::move(inputs);
    return c;
}

SwiSpec small_spec(Rng& rng) { return random_swi_spec(rng, 3, 3, 1, 2); }

}  // namespace

TEST_CASE("validate command") {
    Workdir w;
    Rng rng(1);
    const auto good = w.write("good.json", io::tree_to_json(random_tree(rng, 3, 2, 1)));
    auto out = cli::run(config("validate", {good}));
    CHECK(out.exit_code == cli::kOk);
    CHECK(out.report["valid"] == true);

    auto j = io::tree_to_json(random_tree(rng, 2, 2, 1));
    j["nodes"][1]["prob"] = j["nodes"][1]["prob"].get<double>() + 0.1;
    out = cli::run(config("validate", {w.write("bad.json", j)}));
    CHECK(out.exit_code == cli::kValidation);
    CHECK(out.report["valid"] == false);
}

TEST_CASE("wasserstein command") {
    Workdir w;
    const auto zero = w.write("zero.json", io::marginal_to_json(StageMarginal{{{0.0}}, {1.0}}));
    const auto three = w.write("three.json", io::marginal_to_json(StageMarginal{{{3.0}}, {1.0}}));
    const auto heavy = w.write("heavy.json", json::parse(R"([{"point": [0], "prob": 0.7}, {"point": [1], "prob": 0.5}])"));
    const auto lin = w.write("lin.json", json::parse(R"({"p": 1, "weights": [1]})"));

    auto same = cli::run(config("wasserstein", {zero, zero}));
    CHECK(same.exit_code == cli::kOk);
    CHECK(same.report["value_p"] == 0.0);

    auto c = config("wasserstein", {zero, three});
    c.metric_path = lin;
    c.include_plan = true;
    const auto out = cli::run(c);
    CHECK(out.exit_code == cli::kOk);
    CHECK(out.report["value_p"] == 3.0);
    CHECK(out.report["plan"][0][0] == 1.0);

    const auto bad = cli::run(config("wasserstein", {zero, heavy}));
    CHECK(bad.exit_code == cli::kValidation);
    CHECK(bad.report["residual"].get<double>() == doctest::Approx(0.2));
}

TEST_CASE("nested command") {
    Workdir w;
    Rng rng(2);
    const auto a_tree = build_swi_tree(small_spec(rng));
    const auto b_tree = build_swi_tree(small_spec(rng));
    const auto a = w.write("a.json", io::tree_to_json(a_tree));
    const auto b = w.write("b.json", io::tree_to_json(b_tree));
    const auto bad_tree = shift_successor_mass(b_tree, b_tree.stage_nodes(2)[0], 0.1);
    const auto bad = w.write("bad.json", io::tree_to_json(bad_tree));

    SUBCASE("identical files use the fast path") {
        const auto out = cli::run(config("nested", {a, a}));
        CHECK(out.exit_code == cli::kOk);
        CHECK(out.report["method"] == "swi");
        CHECK(out.report["value_p"] == 0.0);
        CHECK(out.report["stage_terms"].size() == 3);
    }
    SUBCASE("dp, lp and swi agree") {
        std::vector<double> values;
        for (const char* m : {"dp", "lp", "swi"}) {
            auto c = config("nested", {a, b});
            c.method = m;
            const auto out = cli::run(c);
            REQUIRE(out.exit_code == cli::kOk);
            CHECK(out.report["method"] == m);
            values.push_back(out.report["value_p"].get<double>());
        }
        CHECK(std::abs(values[0] - values[1]) <= 1e-8 * std::max(1.0, values[0]));
        CHECK(std::abs(values[0] - values[2]) <= 1e-8 * std::max(1.0, values[0]));
    }
    SUBCASE("auto falls back to dp, --method swi is refused") {
        CHECK(cli::run(config("nested", {a, bad})).report["method"] == "dp");
        auto c = config("nested", {a, bad});
        c.method = "swi";
        const auto out = cli::run(c);
        CHECK(out.exit_code == cli::kNotStagewiseIndependent);
        CHECK(out.report["tree"] == "B");
        CHECK(out.report["violation"]["stage"] == 2);
    }
    SUBCASE("force dp and table") {
        auto c = config("nested", {a, b});
        c.force_dp = true;
        c.include_table = true;
        const auto out = cli::run(c);
        CHECK(out.report["method"] == "dp");
        CHECK(out.report["table"].size() == 3);
    }
    SUBCASE("bench") {
        auto c = config("nested", {a, b});
        c.bench = true;
        const auto out = cli::run(c);
        CHECK(out.report["bench"]["dp_seconds"].get<double>() > 0.0);
        CHECK(out.report["bench"].contains("speedup"));
    }
    SUBCASE("stage mismatch") {
        const auto two = w.write("two.json", io::tree_to_json(random_tree(rng, 2, 2, 1)));
        CHECK(cli::run(config("nested", {a, two})).exit_code == cli::kStageMismatch);
    }
    SUBCASE("size cap for the LP") {
        auto c = config("nested", {a, b});
        c.method = "lp";
        c.lp_cap = 1;
        CHECK(cli::run(c).exit_code == cli::kSizeCap);
        ::setenv("TREEDIST_LP_CAP", "1", 1);
        c.lp_cap.reset();
        CHECK(cli::run(c).exit_code == cli::kSizeCap);
        ::unsetenv("TREEDIST_LP_CAP");
        CHECK(cli::run(c).exit_code == cli::kOk);
    }
}

TEST_CASE("swi-check command") {
    Workdir w;
    Rng rng(3);
    const auto a_tree = build_swi_tree(small_spec(rng));
    const auto b_tree = build_swi_tree(small_spec(rng));
    const auto a = w.write("a.json", io::tree_to_json(a_tree));
    const auto b = w.write("b.json", io::tree_to_json(b_tree));
    const auto bad = w.write("bad.json", io::tree_to_json(shift_successor_mass(a_tree, a_tree.stage_nodes(2)[1], 0.05)));

    auto one = cli::run(config("swi-check", {a}));
    CHECK(one.exit_code == cli::kOk);
    CHECK(one.report["trees"][0]["swi"] == "pass");

    auto fail = cli::run(config("swi-check", {bad}));
    CHECK(fail.report["trees"][0]["swi"] == "fail");
    CHECK(fail.report["trees"][0]["violation"]["node"] == a_tree.label(a_tree.stage_nodes(2)[1]));

    auto pair = cli::run(config("swi-check", {a, b}));
    CHECK(pair.report["all_passed"] == true);
    for (const char* key : {"swi_equals_dp", "subtree_identity", "dp_vs_lp", "constraint_equivalence", "homogeneity"})
        CHECK(pair.report["properties"][key]["pass"] == true);
}

TEST_CASE("product command") {
    Workdir w;
    Rng rng(4);
    const auto a = w.write("a.json", io::tree_to_json(random_tree(rng, 2, 2, 1, 2)));
    const auto b = w.write("b.json", io::tree_to_json(random_tree(rng, 2, 3, 1, 3)));
    const auto out = cli::run(config("product", {a, b}));
    REQUIRE(out.exit_code == cli::kOk);
    const auto tree = io::tree_from_json(out.report);
    CHECK(tree.stages() == 3);
    CHECK(tree.leaves().size() == 6);
}

TEST_CASE("reduce command") {
    Workdir w;
    const SwiSpec spec{{StageMarginal{{{0.0}}, {1.0}},
                        StageMarginal{{{0.0}, {1.0}, {2.0}, {3.0}}, {0.25, 0.25, 0.25, 0.25}}}};
    const auto path = w.write("spec.json", io::swi_spec_to_json(spec));
    auto c = config("reduce", {path});
    c.targets = {1, 2};
    c.seed = 5;
    const auto out = cli::run(c);
    REQUIRE(out.exit_code == cli::kOk);
    CHECK(out.report["stage_values"][1].get<double>() == doctest::Approx(0.25));
    CHECK(io::dump(cli::run(c).report) == io::dump(out.report));

    c.targets = {1, 4};
    CHECK(cli::run(c).report["total_p"] == 0.0);
    c.targets = {1, 5};
    CHECK(cli::run(c).exit_code == cli::kValidation);
    CHECK(cli::parse_targets("1,3,3,2") == std::vector<std::size_t>{1, 3, 3, 2});
    CHECK_THROWS(cli::parse_targets("1,x"));
}

TEST_CASE("unknown command and missing files") {
    CHECK(cli::run(config("frobnicate", {})).exit_code == cli::kUsage);
    CHECK(cli::run(config("validate", {"/nonexistent.json"})).exit_code == cli::kValidation);
}
