#include "zonerl/errors.hpp"
#include "zonerl/experiment.hpp"

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

using namespace zonerl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("zonerl_test_experiment") / name;
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ExperimentConfig quick_glucose(const std::string& dir) {
    ExperimentConfig c;
    c.policy = PolicyKind::Random;
    c.days = 1;
    c.seeds = {1, 2, 3, 4, 5};
    c.training.episodes = 0;
    c.shield.horizon = 6;
    c.shield.samples = 1;
    c.output_dir = dir;
    return c;
}

} // namespace

TEST_CASE("config: unknown keys are rejected") {
    CHECK_THROWS_AS(config_from_json(json{{"sedes", {1, 2}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"shield", {{"enabled", true}, {"k", 4}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"theory", {{"schedule", {{"omegaa", 1.0}}}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"policy", "greedy"}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"days", "three"}}), ConfigError);
}

TEST_CASE("config: json round trip") {
    ExperimentConfig c;
    c.scenario = ScenarioTag::PHC;
    c.policy = PolicyKind::FixedSchedule;
    c.intervention_budget = 45;
    c.shield = {false, 12, 2};
    c.carbs_visible = false;
    c.seeds = {9, 10};
    c.theory.gamma = 0.5;
    c.agent.min_visits = 3;
    c.mdp_file = "model.json";
    const auto back = config_from_json(to_json(c));
    CHECK(back.scenario == ScenarioTag::PHC);
    CHECK(back.policy == PolicyKind::FixedSchedule);
    CHECK(back.intervention_budget == 45.0);
    CHECK_FALSE(back.shield.enabled);
    CHECK(back.shield.horizon == 12);
    CHECK_FALSE(back.carbs_visible);
    CHECK(back.seeds == std::vector<std::uint64_t>{9, 10});
    REQUIRE(back.theory.gamma.has_value());
    CHECK(*back.theory.gamma == 0.5);
    CHECK(back.agent.min_visits == 3);
    CHECK(back.mdp_file == std::optional<std::string>("model.json"));
    CHECK(to_json(back) == to_json(c));
}

TEST_CASE("config: validation") {
    ExperimentConfig c;
    CHECK_NOTHROW(c.validate());
    auto bad = c;
    bad.seeds.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.agent.step_omega = 0.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.agent.slack_edges = {10.0, 5.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.days = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.fixture = "huge";
    CHECK_THROWS(bad.validate());
    bad = c;
    bad.training.eps_start = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("parallel_for visits every index once") {
    for (int par : {1, 2, 4}) {
        std::vector<std::atomic<int>> hits(37);
        parallel_for(hits.size(), par, [&](std::size_t i) { hits[i].fetch_add(1); });
        for (const auto& h : hits) CHECK(h.load() == 1);
    }
    CHECK_THROWS_AS(parallel_for(8, 2,
                                 [](std::size_t i) {
                                     if (i == 5) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}

TEST_CASE("validate-theory on the tiny fixture") {
    ExperimentConfig c;
    c.fixture = "tiny";
    c.seeds = {1};
    c.output_dir = scratch("theory_tiny").string();
    const auto res = cmd_validate_theory(c);
    CHECK(res.exit_code == 0);
    CHECK(res.failures.empty());
    CHECK(res.report["pass"] == true);
    CHECK(res.report["states"] == 12);
    CHECK(fs::exists(fs::path(c.output_dir) / "mdp.json"));
    CHECK(fs::exists(fs::path(c.output_dir) / "qtable_seed1.csv"));
    CHECK(fs::exists(fs::path(c.output_dir) / "theory_report.json"));
}

TEST_CASE("validate-theory: a corrupted model file is refused") {
    const auto dir = scratch("theory_corrupt");
    fs::create_directories(dir);
    auto j = mdp_to_json(build_fixture_mdp(FixtureProfile::Tiny));
    j["transitions"][0]["prob"] = j["transitions"][0]["prob"].get<double>() * 0.9;
    {
        std::ofstream out(dir / "bad.json");
        out << j.dump();
    }
    ExperimentConfig c;
    c.mdp_file = (dir / "bad.json").string();
    c.output_dir = (dir / "out").string();
    const auto res = cmd_validate_theory(c);
    CHECK(res.exit_code != 0);
    REQUIRE(res.failures.size() == 1);
    CHECK(res.failures[0] == "model_construction");

    c.mdp_file = (dir / "missing.json").string();
    CHECK(cmd_validate_theory(c).exit_code != 0);
}

TEST_CASE("validate-theory: small fixture at gamma 0.99 contracts") {
    ExperimentConfig c;
    c.fixture = "small";
    c.theory.gamma = 0.99;
    c.theory.checks = {"contraction", "value_iteration"};
    c.output_dir = scratch("theory_small").string();
    const auto res = cmd_validate_theory(c);
    CHECK(res.exit_code == 0);
    const auto& chk = res.report["checks"][0];
    CHECK(chk["name"] == "contraction");
    CHECK(chk["violations"] == 0);
    CHECK(chk["max_ratio"].get<double>() <= 0.99 + 1e-12);
}

TEST_CASE("run-glucose with a random policy") {
    const auto c = quick_glucose(scratch("glucose_random").string());
    const auto res = cmd_run_glucose(c);
    CHECK(res.exit_code == 0);
    const auto& row = res.report["rows"][0];
    CHECK(row["Task"] == "AGVP");
    CHECK(row["Model"] == "random");
    CHECK(row["seeds"].size() == 5);
    CHECK(res.report["episodes"].size() == 5);
    const auto csv = slurp(fs::path(c.output_dir) / "report.csv");
    CHECK(csv.rfind("Task,Model,TIR,TAR,TBR,MeanGlucose,AIME\n", 0) == 0);
    CHECK(fs::exists(fs::path(c.output_dir) / "plot.csv"));
}

TEST_CASE("degenerate case A never activates the long intervention") {
    auto c = quick_glucose("unused");
    c.policy = PolicyKind::DegenerateCaseA;
    c.seeds = {1, 2};
    const auto run = run_glucose(c, "AGVP", "degenerate-case-a");
    REQUIRE(run.episodes.size() == 2);
    for (const auto& ep : run.episodes) CHECK(ep.long_activations == 0);
}

TEST_CASE("sweep-budget") {
    auto c = quick_glucose(scratch("sweep").string());
    c.seeds = {1, 2};
    c.sweep_budgets = {60, 40};
    CHECK_THROWS_AS(cmd_sweep_budget(c), ConfigError);
    c.sweep_budgets.clear();
    CHECK_THROWS_AS(cmd_sweep_budget(c), ConfigError);

    c.sweep_budgets = {40, 40};
    const auto res = cmd_sweep_budget(c);
    const auto& rows = res.report["rows"];
    REQUIRE(rows.size() == 2);
    CHECK(rows[0]["budget"] == 40.0);
    CHECK(rows[0]["TIR"] == rows[1]["TIR"]);
    CHECK(rows[0]["TBR"] == rows[1]["TBR"]);
    const auto csv = slurp(fs::path(c.output_dir) / "sweep.csv");
    CHECK(csv.rfind("Budget,Task,Model,", 0) == 0);
}

TEST_CASE("reruns produce byte-identical reports") {
    auto a = quick_glucose(scratch("rerun_a").string());
    a.seeds = {3, 4};
    auto b = a;
    b.output_dir = scratch("rerun_b").string();
    b.parallel = 2;
    cmd_run_glucose(a);
    cmd_run_glucose(b);
    for (const char* f : {"report.csv", "report.json", "plot.csv"})
        CHECK(slurp(fs::path(a.output_dir) / f) == slurp(fs::path(b.output_dir) / f));

    ExperimentConfig t;
    t.seeds = {1};
    t.output_dir = scratch("rerun_theory_a").string();
    cmd_validate_theory(t);
    const auto first = slurp(fs::path(t.output_dir) / "theory_report.json");
    t.output_dir = scratch("rerun_theory_b").string();
    cmd_validate_theory(t);
    CHECK(first == slurp(fs::path(t.output_dir) / "theory_report.json"));
}
