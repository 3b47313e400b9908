#pragma once

#include "zonerl/agent.hpp"
#include "zonerl/controller.hpp"
#include "zonerl/glucose_env.hpp"
#include "zonerl/metrics.hpp"
#include "zonerl/tabular.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace zonerl {

enum class PolicyKind { LearnedTabular, Random, FixedSchedule, DegenerateCaseA };

std::string to_string(PolicyKind k);
PolicyKind policy_from_string(const std::string& s);

struct TrainingConfig {
    int episodes = 1000;
    std::uint64_t seed = 2024;
    double eps_start = 0.3;
    double eps_floor = 0.02;
};

/// Learner knobs that are not implied by the rest of the experiment.
struct AgentTuning {
    std::vector<double> slack_edges{5.0, 10.0, 20.0, 35.0, 50.0};
    double reward_scale = 1.0e-3;
    double step_omega = 0.6;
    double step_floor = 0.001;
    double trend_band = 1.5;
    std::uint32_t min_visits = 5;
};

struct TheoryConfig {
    std::vector<std::string> checks{"contraction", "value_iteration", "q_learning", "policy"};
    std::optional<double> gamma;  // overrides the fixture discount
    int contraction_pairs = 100;
    double vi_tolerance = 1.0e-9;
    LearningSchedule schedule;
};

/// Single JSON document driving every CLI verb. Unknown keys are rejected.
struct ExperimentConfig {
    ScenarioTag scenario = ScenarioTag::AGVP;
    PolicyKind policy = PolicyKind::LearnedTabular;
    double intervention_budget = 60.0; // n_Z
    double violation_budget = 432.0;   // N_0
    RewardConfig reward{1.0, 0.1, 1.0e6, 0.97};
    ShieldConfig shield{true, 24, 4};
    bool carbs_visible = true;
    bool constraints = true; // budget-shaped reward, budget observation and shield
    std::vector<double> fast_set{1.0, 2.0, 4.0};
    GlucoseDynamics dynamics;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    int days = 3;
    int episodes = 1; // evaluation episodes per seed
    TrainingConfig training;
    AgentTuning agent;
    std::string output_dir = "out";
    std::vector<double> sweep_budgets{40, 50, 60, 70, 80, 90};
    std::string fixture = "tiny";
    std::optional<std::string> mdp_file;
    TheoryConfig theory;
    int parallel = 1;

    void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Environment configuration implied by an experiment configuration.
GlucoseEnvConfig make_env_config(const ExperimentConfig& cfg);

struct EpisodeResult {
    std::uint64_t seed = 0;
    int episode = 0;
    std::vector<TransitionRecord> records;
    std::vector<double> xs; // X reached at every step, before any severe-hypo reset
    GlycemicSummary summary;
    int budget_negative_steps = 0;
    int long_activations = 0;
    int fast_impulses = 0;
    int severe_events = 0;
};

struct GlucoseRun {
    ReportRow row;
    std::vector<EpisodeResult> episodes;
};

/// Trains (when the policy learns) and evaluates over every configured seed.
GlucoseRun run_glucose(const ExperimentConfig& cfg, const std::string& task, const std::string& model);

/// Trains the tabular learner under `cfg`; exposed for tests and benchmarks.
std::shared_ptr<TabularGlucoseAgent> train_agent(const ExperimentConfig& cfg);

void write_trajectory_csv(std::ostream& os, const std::vector<TransitionRecord>& records);
void write_episode_log(std::ostream& os, const EpisodeResult& ep);

struct CommandResult {
    int exit_code = 0;
    nlohmann::json report;
    std::vector<std::string> failures;
};

CommandResult cmd_validate_theory(const ExperimentConfig& cfg);
CommandResult cmd_run_glucose(const ExperimentConfig& cfg);
CommandResult cmd_sweep_budget(const ExperimentConfig& cfg);
CommandResult cmd_ablation(const ExperimentConfig& cfg);

/// Runs fn(0..n-1) on up to `parallel` threads; results are written by index so
/// the outcome does not depend on scheduling.
void parallel_for(std::size_t n, int parallel, const std::function<void(std::size_t)>& fn);

} // namespace zonerl
