#include "zonerl/experiment.hpp"

#include "zonerl/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace zonerl {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(PolicyKind k) {
    switch (k) {
    case PolicyKind::LearnedTabular: return "learned-tabular";
    case PolicyKind::Random: return "random";
    case PolicyKind::FixedSchedule: return "fixed-schedule";
    case PolicyKind::DegenerateCaseA: return "degenerate-case-a";
    }
    return "?";
}

PolicyKind policy_from_string(const std::string& s) {
    for (auto k : {PolicyKind::LearnedTabular, PolicyKind::Random, PolicyKind::FixedSchedule,
                   PolicyKind::DegenerateCaseA})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown policy kind '" + s + "'");
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigError("config: seeds must be nonempty");
    if (days < 1) throw ConfigError("config: days must be >= 1");
    if (episodes < 1) throw ConfigError("config: episodes must be >= 1");
    if (training.episodes < 0) throw ConfigError("config: training.episodes must be >= 0");
    if (parallel < 1) throw ConfigError("config: parallel must be >= 1");
    if (output_dir.empty()) throw ConfigError("config: output_dir must be set");
    if (fast_set.empty()) throw ConfigError("config: fast_set must be nonempty");
    shield.validate();
    fixture_from_string(fixture);
    theory.schedule.validate();
    if (!(theory.vi_tolerance > 0.0)) throw ConfigError("config: theory.vi_tolerance must be positive");
    if (theory.contraction_pairs < 1) throw ConfigError("config: theory.contraction_pairs must be >= 1");
    if (training.eps_start < 0.0 || training.eps_start > 1.0 || training.eps_floor < 0.0 || training.eps_floor > 1.0)
        throw ConfigError("config: training exploration rates must lie in [0,1]");
    if (!(agent.reward_scale > 0.0)) throw ConfigError("config: agent.reward_scale must be positive");
    if (agent.step_floor < 0.0 || agent.step_floor > 1.0) throw ConfigError("config: agent.step_floor outside [0,1]");
    if (!(agent.step_omega > 0.5 && agent.step_omega <= 1.0))
        throw ConfigError("config: agent.step_omega must lie in (0.5, 1]");
    if (!std::is_sorted(agent.slack_edges.begin(), agent.slack_edges.end()))
        throw ConfigError("config: agent.slack_edges must be ascending");
    make_env_config(*this).validate();
}

ExperimentConfig config_from_json(const json& j) {
    check_keys(j,
               {"scenario", "policy", "budgets", "reward", "shield", "carbs_visible", "constraints", "fast_set",
                "dynamics", "seeds", "days", "episodes", "training", "agent", "output_dir", "sweep_budgets", "fixture",
                "mdp_file", "theory", "parallel"},
               "config");
    ExperimentConfig c;
    try {
        if (j.contains("scenario")) c.scenario = scenario_from_string(j.at("scenario").get<std::string>());
        if (j.contains("policy")) c.policy = policy_from_string(j.at("policy").get<std::string>());
        if (j.contains("budgets")) {
            const auto& b = j.at("budgets");
            check_keys(b, {"n_Z", "N_0"}, "config.budgets");
            read(b, "n_Z", c.intervention_budget);
            read(b, "N_0", c.violation_budget);
        }
        if (j.contains("reward")) {
            const auto& r = j.at("reward");
            check_keys(r, {"alpha", "beta", "delta", "gamma"}, "config.reward");
            read(r, "alpha", c.reward.long_cost);
            read(r, "beta", c.reward.fast_cost);
            read(r, "delta", c.reward.penalty);
            read(r, "gamma", c.reward.gamma);
        }
        if (j.contains("shield")) {
            const auto& s = j.at("shield");
            check_keys(s, {"enabled", "K", "N"}, "config.shield");
            read(s, "enabled", c.shield.enabled);
            read(s, "K", c.shield.horizon);
            read(s, "N", c.shield.samples);
        }
        read(j, "carbs_visible", c.carbs_visible);
        read(j, "constraints", c.constraints);
        read(j, "fast_set", c.fast_set);
        if (j.contains("dynamics")) {
            const auto& d = j.at("dynamics");
            check_keys(d, {"k_abs", "k_fast", "k_fast_decay", "k_long", "k_homeo", "x_basal", "sigma_x"},
                       "config.dynamics");
            read(d, "k_abs", c.dynamics.k_abs);
            read(d, "k_fast", c.dynamics.k_fast);
            read(d, "k_fast_decay", c.dynamics.k_fast_decay);
            read(d, "k_long", c.dynamics.k_long);
            read(d, "k_homeo", c.dynamics.k_homeo);
            read(d, "x_basal", c.dynamics.x_basal);
            read(d, "sigma_x", c.dynamics.sigma_x);
        }
        read(j, "seeds", c.seeds);
        read(j, "days", c.days);
        read(j, "episodes", c.episodes);
        if (j.contains("training")) {
            const auto& t = j.at("training");
            check_keys(t, {"episodes", "seed", "eps_start", "eps_floor"}, "config.training");
            read(t, "episodes", c.training.episodes);
            read(t, "seed", c.training.seed);
            read(t, "eps_start", c.training.eps_start);
            read(t, "eps_floor", c.training.eps_floor);
        }
        if (j.contains("agent")) {
            const auto& a = j.at("agent");
            check_keys(a, {"slack_edges", "reward_scale", "step_omega", "step_floor", "trend_band", "min_visits"}, "config.agent");
            read(a, "slack_edges", c.agent.slack_edges);
            read(a, "reward_scale", c.agent.reward_scale);
            read(a, "step_omega", c.agent.step_omega);
            read(a, "step_floor", c.agent.step_floor);
            read(a, "trend_band", c.agent.trend_band);
            read(a, "min_visits", c.agent.min_visits);
        }
        read(j, "output_dir", c.output_dir);
        read(j, "sweep_budgets", c.sweep_budgets);
        read(j, "fixture", c.fixture);
        if (j.contains("mdp_file") && !j.at("mdp_file").is_null()) c.mdp_file = j.at("mdp_file").get<std::string>();
        if (j.contains("theory")) {
            const auto& t = j.at("theory");
            check_keys(t, {"checks", "gamma", "contraction_pairs", "vi_tolerance", "schedule"}, "config.theory");
            read(t, "checks", c.theory.checks);
            if (t.contains("gamma") && !t.at("gamma").is_null()) c.theory.gamma = t.at("gamma").get<double>();
            read(t, "contraction_pairs", c.theory.contraction_pairs);
            read(t, "vi_tolerance", c.theory.vi_tolerance);
            if (t.contains("schedule")) {
                const auto& s = t.at("schedule");
                check_keys(s,
                           {"c", "c0", "omega", "eps_floor", "eps_scale", "max_updates", "episode_length",
                            "tolerance"},
                           "config.theory.schedule");
                auto& sc = c.theory.schedule;
                read(s, "c", sc.c);
                read(s, "c0", sc.c0);
                read(s, "omega", sc.omega);
                read(s, "eps_floor", sc.eps_floor);
                read(s, "eps_scale", sc.eps_scale);
                read(s, "max_updates", sc.max_updates);
                read(s, "episode_length", sc.episode_length);
                read(s, "tolerance", sc.tolerance);
            }
            for (const auto& name : c.theory.checks)
                if (name != "contraction" && name != "value_iteration" && name != "q_learning" && name != "policy")
                    throw ConfigError("config.theory: unknown check '" + name + "'");
        }
        read(j, "parallel", c.parallel);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["scenario"] = to_string(c.scenario);
    j["policy"] = to_string(c.policy);
    j["budgets"] = {{"n_Z", c.intervention_budget}, {"N_0", c.violation_budget}};
    j["reward"] = {{"alpha", c.reward.long_cost},
                   {"beta", c.reward.fast_cost},
                   {"delta", c.reward.penalty},
                   {"gamma", c.reward.gamma}};
    j["shield"] = {{"enabled", c.shield.enabled}, {"K", c.shield.horizon}, {"N", c.shield.samples}};
    j["carbs_visible"] = c.carbs_visible;
    j["constraints"] = c.constraints;
    j["fast_set"] = c.fast_set;
    j["dynamics"] = {{"k_abs", c.dynamics.k_abs},           {"k_fast", c.dynamics.k_fast},
                     {"k_fast_decay", c.dynamics.k_fast_decay}, {"k_long", c.dynamics.k_long},
                     {"k_homeo", c.dynamics.k_homeo},       {"x_basal", c.dynamics.x_basal},
                     {"sigma_x", c.dynamics.sigma_x}};
    j["seeds"] = c.seeds;
    j["days"] = c.days;
    j["episodes"] = c.episodes;
    j["training"] = {{"episodes", c.training.episodes},
                     {"seed", c.training.seed},
                     {"eps_start", c.training.eps_start},
                     {"eps_floor", c.training.eps_floor}};
    j["agent"] = {{"slack_edges", c.agent.slack_edges},
                  {"reward_scale", c.agent.reward_scale},
                  {"step_omega", c.agent.step_omega},
                  {"step_floor", c.agent.step_floor},
                  {"trend_band", c.agent.trend_band},
                  {"min_visits", c.agent.min_visits}};
    j["output_dir"] = c.output_dir;
    j["sweep_budgets"] = c.sweep_budgets;
    j["fixture"] = c.fixture;
    j["mdp_file"] = c.mdp_file ? json(*c.mdp_file) : json(nullptr);
    const auto& s = c.theory.schedule;
    j["theory"] = {{"checks", c.theory.checks},
                   {"gamma", c.theory.gamma ? json(*c.theory.gamma) : json(nullptr)},
                   {"contraction_pairs", c.theory.contraction_pairs},
                   {"vi_tolerance", c.theory.vi_tolerance},
                   {"schedule",
                    {{"c", s.c},
                     {"c0", s.c0},
                     {"omega", s.omega},
                     {"eps_floor", s.eps_floor},
                     {"eps_scale", s.eps_scale},
                     {"max_updates", s.max_updates},
                     {"episode_length", s.episode_length},
                     {"tolerance", s.tolerance}}}};
    j["parallel"] = c.parallel;
    return j;
}

GlucoseEnvConfig make_env_config(const ExperimentConfig& cfg) {
    GlucoseEnvConfig e;
    e.dynamics = cfg.dynamics;
    e.constraints = ConstraintSet{125.0, 55.0, cfg.violation_budget, cfg.intervention_budget};
    e.reward = cfg.reward;
    e.fast_set = cfg.fast_set;
    e.scenario = scenario_template(cfg.scenario);
    e.carbs_visible = cfg.carbs_visible;
    e.days = cfg.days;
    if (cfg.policy == PolicyKind::DegenerateCaseA) {
        if (std::find(e.fast_set.begin(), e.fast_set.end(), 0.0) == e.fast_set.end())
            e.fast_set.insert(e.fast_set.begin(), 0.0);
        // the fast-only program carries the admissible-range and zone budgets only
        e.budget_components = {BudgetComponent::FastAdmissible, BudgetComponent::ZoneViolation};
    }
    return e;
}

void parallel_for(std::size_t n, int parallel, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, parallel)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

namespace {

ShieldConfig effective_shield(const ExperimentConfig& cfg) {
    ShieldConfig s = cfg.shield;
    if (!cfg.constraints) s.enabled = false;
    return s;
}

int slot_of(const std::vector<BudgetComponent>& comps, BudgetComponent c) {
    for (std::size_t i = 0; i < comps.size(); ++i)
        if (comps[i] == c) return static_cast<int>(i);
    return -1;
}

AgentOptions agent_options(const ExperimentConfig& cfg, const GlucoseEnvConfig& env) {
    AgentOptions o;
    o.fast_set = env.fast_set;
    o.use_carbs = cfg.carbs_visible;
    o.use_budgets = cfg.constraints;
    o.allow_long = cfg.policy != PolicyKind::DegenerateCaseA;
    o.gamma = cfg.reward.gamma;
    o.eps_start = cfg.training.eps_start;
    o.eps_floor = cfg.training.eps_floor;
    o.count_slot = slot_of(env.budget_components, BudgetComponent::InterventionCount);
    o.fast_range_slot = slot_of(env.budget_components, BudgetComponent::FastAdmissible);
    o.slack_edges = cfg.agent.slack_edges;
    o.reward_scale = cfg.agent.reward_scale;
    o.step_omega = cfg.agent.step_omega;
    o.step_floor = cfg.agent.step_floor;
    o.trend_band = cfg.agent.trend_band;
    o.min_visits = cfg.agent.min_visits;
    return o;
}

PolicyBundle make_bundle(const ExperimentConfig& cfg, const GlucoseEnvConfig& env,
                         const std::shared_ptr<TabularGlucoseAgent>& agent) {
    switch (cfg.policy) {
    case PolicyKind::LearnedTabular: return agent->bundle();
    case PolicyKind::DegenerateCaseA: return degenerate_to_case_a(agent->bundle());
    case PolicyKind::Random: {
        PolicyBundle b;
        b.fast = std::make_shared<UniformFastPolicy>(env.fast_set);
        b.long_policy = std::make_shared<ConstantLongPolicy>(1);
        b.switcher = std::make_shared<RandomSwitcher>(0.004, 0.02);
        b.fast_set = env.fast_set;
        return b;
    }
    case PolicyKind::FixedSchedule: {
        PolicyBundle b;
        b.fast = std::make_shared<ConstantFastPolicy>(*std::max_element(env.fast_set.begin(), env.fast_set.end()));
        b.long_policy = std::make_shared<ConstantLongPolicy>(1);
        // boluses at the main meal times, long activations every eight hours
        b.switcher = std::make_shared<ScheduleSwitcher>(std::vector<double>{0.0, 480.0, 960.0},
                                                        std::vector<double>{420.0, 720.0, 1080.0},
                                                        env.steps_per_day, env.minutes_per_step);
        b.fast_set = env.fast_set;
        return b;
    }
    }
    throw ConfigError("unhandled policy kind");
}

bool learns(PolicyKind k) { return k == PolicyKind::LearnedTabular || k == PolicyKind::DegenerateCaseA; }

std::uint64_t episode_seed(std::uint64_t seed, int episode) {
    return episode == 0 ? seed : RngStream::mix(seed ^ static_cast<std::uint64_t>(episode));
}

EpisodeResult evaluate_episode(GlucoseEnv& env, PolicyBundle& bundle, const ShieldConfig& shield,
                               std::uint64_t seed, int episode) {
    EpisodeResult ep;
    ep.seed = seed;
    ep.episode = episode;
    ep.records = run_episode(env, bundle, shield, env.config().horizon(), episode_seed(seed, episode));
    for (const auto& r : ep.records) {
        ep.xs.push_back(r.info.x_before_reset);
        if (std::any_of(r.next_budgets.begin(), r.next_budgets.end(), [](double b) { return b < 0.0; }))
            ++ep.budget_negative_steps;
        if (r.executed_kind == ExecutedKind::Long) ++ep.long_activations;
        if (r.executed_kind == ExecutedKind::Fast) ++ep.fast_impulses;
        if (r.info.severe_hypo) ++ep.severe_events;
    }
    ep.summary = summarise(ep.xs, env.config().steps_per_day, seed);
    return ep;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("failed writing " + path.string());
}

fs::path prepare_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p)) throw ConfigError("output directory " + dir + " is not writable");
    return p;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

} // namespace

std::shared_ptr<TabularGlucoseAgent> train_agent(const ExperimentConfig& cfg) {
    const auto env_cfg = make_env_config(cfg);
    auto agent = std::make_shared<TabularGlucoseAgent>(agent_options(cfg, env_cfg));
    GlucoseEnv env(env_cfg);
    auto bundle = make_bundle(cfg, env_cfg, agent);
    const auto shield = effective_shield(cfg);
    RngStream rng(cfg.training.seed);
    agent->set_training(true);
    const bool shaped = cfg.constraints;
    for (int e = 0; e < cfg.training.episodes; ++e) {
        agent->set_exploration(e, cfg.training.episodes);
        run_episode(env, bundle, shield, env_cfg.horizon(), rng.next_seed(),
                    [&](const TransitionRecord& rec) { agent->learn(rec, shaped); });
    }
    agent->set_training(false);
    return agent;
}

GlucoseRun run_glucose(const ExperimentConfig& cfg, const std::string& task, const std::string& model) {
    const auto env_cfg = make_env_config(cfg);
    env_cfg.validate();
    std::shared_ptr<TabularGlucoseAgent> agent;
    if (learns(cfg.policy)) agent = train_agent(cfg);
    const auto shield = effective_shield(cfg);

    const std::size_t n = cfg.seeds.size() * static_cast<std::size_t>(cfg.episodes);
    GlucoseRun run;
    run.episodes.resize(n);
    parallel_for(n, cfg.parallel, [&](std::size_t i) {
        GlucoseEnv env(env_cfg);
        auto bundle = make_bundle(cfg, env_cfg, agent);
        const auto seed = cfg.seeds[i / static_cast<std::size_t>(cfg.episodes)];
        const int episode = static_cast<int>(i % static_cast<std::size_t>(cfg.episodes));
        run.episodes[i] = evaluate_episode(env, bundle, shield, seed, episode);
    });

    std::vector<GlycemicSummary> summaries;
    int negative = 0;
    int severe = 0;
    double long_acts = 0.0;
    double fast_acts = 0.0;
    for (const auto& ep : run.episodes) {
        summaries.push_back(ep.summary);
        negative += ep.budget_negative_steps;
        severe += ep.severe_events;
        long_acts += ep.long_activations;
        fast_acts += ep.fast_impulses;
    }
    run.row = aggregate(task, model, summaries);
    const double eps = static_cast<double>(run.episodes.size());
    run.row.extra["budget_negative_steps"] = negative;
    run.row.extra["severe_events"] = severe;
    run.row.extra["long_activations_mean"] = long_acts / eps;
    run.row.extra["fast_impulses_mean"] = fast_acts / eps;
    run.row.extra["shield"] = shield.enabled;
    run.row.extra["carbs_visible"] = cfg.carbs_visible;
    run.row.extra["constraints"] = cfg.constraints;
    return run;
}

void write_trajectory_csv(std::ostream& os, const std::vector<TransitionRecord>& records) {
    const std::size_t nb = records.empty() ? 0 : records.front().budgets.size();
    os << "t,X,Z_L,Z_F,E,eta_L,eta_F,eff";
    for (std::size_t i = 0; i < nb; ++i) os << ",b" << (i + 1);
    os << ",G,A_F,meal_g,sensed,trend,carbs,executed,shield\n";
    os << std::setprecision(17);
    for (const auto& r : records) {
        const double eta_l = r.executed.kind == ActionKind::Long ? 1.0 : 0.0;
        const double eta_f = r.executed.kind == ActionKind::Fast ? r.executed.magnitude : 0.0;
        os << r.step << ',' << r.state.x << ',' << r.state.z_long << ',' << r.state.z_fast << ','
           << r.state.spectra_level << ',' << eta_l << ',' << eta_f << ',' << r.long_effect;
        for (double b : r.budgets) os << ',' << b;
        os << ',' << r.info.gut_carbs << ',' << r.info.fast_active << ',' << r.info.meal_grams << ','
           << r.observation.glucose << ',' << r.observation.trend << ',';
        if (r.observation.carbs) os << *r.observation.carbs;
        os << ',' << to_string(r.executed_kind) << ',' << to_string(r.verdict) << '\n';
    }
}

void write_episode_log(std::ostream& os, const EpisodeResult& ep) {
    for (const auto& r : ep.records) {
        auto j = to_json(r);
        j["seed"] = ep.seed;
        j["episode"] = ep.episode;
        os << j.dump() << '\n';
    }
}

namespace {

void write_run_files(const fs::path& dir, const std::string& prefix, const GlucoseRun& run, bool trajectories) {
    {
        std::ofstream log(dir / (prefix + "episodes.jsonl"), std::ios::binary);
        if (!log) throw ConfigError("cannot write episode log in " + dir.string());
        for (const auto& ep : run.episodes) write_episode_log(log, ep);
    }
    std::vector<SeedTrace> traces;
    for (const auto& ep : run.episodes) {
        if (ep.episode == 0) traces.push_back({ep.seed, ep.xs});
        if (trajectories && ep.episode == 0) {
            std::ostringstream os;
            write_trajectory_csv(os, ep.records);
            write_text(dir / (prefix + "trajectory_seed" + std::to_string(ep.seed) + ".csv"), os.str());
        }
    }
    std::ostringstream plot;
    write_plot_csv(plot, traces);
    write_text(dir / (prefix + "plot.csv"), plot.str());
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

bool wants(const TheoryConfig& t, const std::string& name) {
    return std::find(t.checks.begin(), t.checks.end(), name) != t.checks.end();
}

} // namespace

CommandResult cmd_validate_theory(const ExperimentConfig& cfg) {
    CommandResult res;
    const auto dir = prepare_dir(cfg.output_dir);
    json checks = json::array();
    auto finish = [&]() {
        res.report["checks"] = checks;
        res.report["failures"] = res.failures;
        res.report["pass"] = res.failures.empty();
        res.exit_code = res.failures.empty() ? 0 : 1;
        write_text(dir / "theory_report.json", dump(res.report));
        return res;
    };

    std::optional<DiscreteTargetMDP> mdp;
    try {
        if (cfg.mdp_file) {
            std::ifstream in(*cfg.mdp_file);
            if (!in) throw ModelError("cannot open model file " + *cfg.mdp_file);
            json j;
            try {
                in >> j;
            } catch (const json::exception& e) {
                throw ModelError(std::string("model file is not JSON: ") + e.what());
            }
            mdp.emplace(mdp_from_json(j));
            res.report["model"] = *cfg.mdp_file;
        } else {
            auto spec = fixture_spec(fixture_from_string(cfg.fixture));
            if (cfg.theory.gamma) spec.reward.gamma = *cfg.theory.gamma;
            mdp.emplace(build_fixture_mdp(spec));
            res.report["model"] = cfg.fixture;
        }
    } catch (const ModelError& e) {
        res.failures.push_back("model_construction");
        checks.push_back({{"name", "model_construction"}, {"pass", false}, {"error", e.what()}});
        return finish();
    }
    const auto& m = *mdp;
    res.report["states"] = m.num_states();
    res.report["actions"] = m.num_actions();
    res.report["gamma"] = m.gamma();
    write_text(dir / "mdp.json", dump(mdp_to_json(m)));

    const double gamma = m.gamma();
    if (wants(cfg.theory, "contraction")) {
        RngStream rng = RngStream(cfg.seeds.front()).fork("contraction");
        const double scale = m.penalty() / (1.0 - gamma);
        int violations = 0;
        double worst_ratio = 0.0;
        std::vector<double> v(m.num_states());
        std::vector<double> w(m.num_states());
        for (int p = 0; p < cfg.theory.contraction_pairs; ++p) {
            for (std::size_t y = 0; y < v.size(); ++y) {
                v[y] = rng.uniform(-scale, scale);
                w[y] = rng.uniform(-scale, scale);
            }
            const double lhs = sup_diff(bellman_backup(m, v), bellman_backup(m, w));
            const double rhs = sup_diff(v, w);
            if (rhs > 0.0) worst_ratio = std::max(worst_ratio, lhs / rhs);
            // relative slack for the rounding of the backups themselves
            if (lhs > gamma * rhs + 1e-12 * scale) ++violations;
        }
        const bool pass = violations == 0;
        if (!pass) res.failures.push_back("contraction");
        checks.push_back({{"name", "contraction"},
                          {"pass", pass},
                          {"pairs", cfg.theory.contraction_pairs},
                          {"violations", violations},
                          {"max_ratio", worst_ratio},
                          {"gamma", gamma}});
    }

    std::optional<ValueIterationResult> vi;
    const bool need_vi =
        wants(cfg.theory, "value_iteration") || wants(cfg.theory, "q_learning") || wants(cfg.theory, "policy");
    if (need_vi) {
        try {
            vi = value_iteration(m, cfg.theory.vi_tolerance);
        } catch (const ConvergenceError& e) {
            res.failures.push_back("value_iteration");
            checks.push_back({{"name", "value_iteration"}, {"pass", false}, {"error", e.what()}, {"residual", e.residual()}});
            return finish();
        }
    }
    if (wants(cfg.theory, "value_iteration")) {
        const double last = vi->residuals.back();
        const double bellman = sup_diff(bellman_backup(m, vi->v), vi->v);
        // residuals near the tolerance sit at the rounding floor of |v|
        double vmax = 0.0;
        for (double x : vi->v) vmax = std::max(vmax, std::abs(x));
        const double slack = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + vmax);
        bool monotone = true;
        for (std::size_t k = 1; k < vi->residuals.size(); ++k)
            if (vi->residuals[k] > gamma * vi->residuals[k - 1] + slack)
                monotone = false;
        const bool pass = last < cfg.theory.vi_tolerance && bellman < cfg.theory.vi_tolerance && monotone;
        if (!pass) res.failures.push_back("value_iteration");
        checks.push_back({{"name", "value_iteration"},
                          {"pass", pass},
                          {"iterations", vi->iterations},
                          {"final_residual", last},
                          {"bellman_residual", bellman},
                          {"contracting_residuals", monotone},
                          {"residuals", vi->residuals}});
    }
    if (wants(cfg.theory, "q_learning")) {
        std::vector<double> errors(cfg.seeds.size());
        std::vector<QLearningResult> runs(cfg.seeds.size());
        parallel_for(cfg.seeds.size(), cfg.parallel,
                     [&](std::size_t i) { runs[i] = q_learning(m, cfg.theory.schedule, cfg.seeds[i], &vi->q); });
        bool pass = true;
        json per_seed = json::array();
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const bool ok = runs[i].final_error < cfg.theory.schedule.tolerance;
            pass = pass && ok;
            per_seed.push_back({{"seed", cfg.seeds[i]},
                                {"updates", runs[i].updates},
                                {"sup_error", runs[i].final_error},
                                {"pass", ok}});
            std::ostringstream os;
            runs[i].q.write_csv(os);
            write_text(dir / ("qtable_seed" + std::to_string(cfg.seeds[i]) + ".csv"), os.str());
        }
        if (!pass) res.failures.push_back("q_learning");
        checks.push_back({{"name", "q_learning"},
                          {"pass", pass},
                          {"tolerance", cfg.theory.schedule.tolerance},
                          {"seeds", per_seed}});
    }
    if (wants(cfg.theory, "policy")) {
        const auto pol = extract_switching_policy(m, *vi);
        QTable qstar(m.num_states(), m.num_actions());
        for (std::size_t y = 0; y < m.num_states(); ++y)
            for (std::size_t a = 0; a < m.num_actions(); ++a) qstar.at(y, a) = vi->q[y][a];
        int mismatches = 0;
        json regions = {{"noop", 0}, {"long", 0}, {"fast", 0}};
        for (std::size_t y = 0; y < m.num_states(); ++y) {
            if (greedy_switch(qstar, m, y) != pol.decision[y]) ++mismatches;
            regions[to_string(pol.decision[y])] = regions[to_string(pol.decision[y])].get<int>() + 1;
        }
        const bool pass = mismatches == 0;
        if (!pass) res.failures.push_back("policy");
        checks.push_back({{"name", "policy"}, {"pass", pass}, {"mismatches", mismatches}, {"regions", regions}});
    }
    return finish();
}

CommandResult cmd_run_glucose(const ExperimentConfig& cfg) {
    CommandResult res;
    const auto dir = prepare_dir(cfg.output_dir);
    const auto run = run_glucose(cfg, to_string(cfg.scenario), to_string(cfg.policy));
    std::vector<ReportRow> rows{run.row};
    std::ostringstream csv;
    write_report_csv(csv, rows);
    write_text(dir / "report.csv", csv.str());
    res.report["rows"] = report_json(rows);
    json per_seed = json::array();
    for (const auto& ep : run.episodes)
        per_seed.push_back({{"seed", ep.seed},
                            {"episode", ep.episode},
                            {"TIR", ep.summary.tir},
                            {"TAR", ep.summary.tar},
                            {"TBR", ep.summary.tbr},
                            {"MeanGlucose", ep.summary.mean_glucose},
                            {"AIME", ep.summary.aime},
                            {"budget_negative_steps", ep.budget_negative_steps},
                            {"long_activations", ep.long_activations},
                            {"fast_impulses", ep.fast_impulses}});
    res.report["episodes"] = per_seed;
    write_text(dir / "report.json", dump(res.report));
    write_run_files(dir, "", run, true);
    return res;
}

CommandResult cmd_sweep_budget(const ExperimentConfig& cfg) {
    if (cfg.sweep_budgets.empty()) throw ConfigError("sweep: no budgets configured");
    if (!std::is_sorted(cfg.sweep_budgets.begin(), cfg.sweep_budgets.end()))
        throw ConfigError("sweep: budgets must be sorted ascending");
    CommandResult res;
    const auto dir = prepare_dir(cfg.output_dir);
    std::vector<ReportRow> rows(cfg.sweep_budgets.size());
    parallel_for(rows.size(), cfg.parallel, [&](std::size_t i) {
        ExperimentConfig c = cfg;
        c.intervention_budget = cfg.sweep_budgets[i];
        c.parallel = 1;
        rows[i] = run_glucose(c, to_string(cfg.scenario), to_string(cfg.policy)).row;
        rows[i].extra["budget"] = cfg.sweep_budgets[i];
    });
    std::ostringstream csv;
    csv << "Budget,Task,Model,TIR,TAR,TBR,MeanGlucose,AIME\n";
    for (const auto& r : rows) {
        std::ostringstream one;
        write_report_csv(one, std::span<const ReportRow>(&r, 1));
        std::string line = one.str();
        line = line.substr(line.find('\n') + 1);
        csv << r.extra["budget"].get<double>() << ',' << line;
    }
    write_text(dir / "sweep.csv", csv.str());
    res.report["rows"] = report_json(rows);
    write_text(dir / "sweep.json", dump(res.report));
    return res;
}

CommandResult cmd_ablation(const ExperimentConfig& cfg) {
    struct Setting {
        const char* name;
        bool carbs;
        bool constraints;
    };
    const std::vector<Setting> settings{
        {"neither", false, false}, {"constraints-only", false, true}, {"carbs+constraints", true, true}};
    CommandResult res;
    const auto dir = prepare_dir(cfg.output_dir);
    std::vector<GlucoseRun> runs(settings.size());
    parallel_for(settings.size(), cfg.parallel, [&](std::size_t i) {
        ExperimentConfig c = cfg;
        c.carbs_visible = settings[i].carbs;
        c.constraints = settings[i].constraints;
        c.parallel = 1;
        runs[i] = run_glucose(c, to_string(cfg.scenario), settings[i].name);
        runs[i].row.extra["setting"] = settings[i].name;
    });
    std::vector<ReportRow> rows;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        rows.push_back(runs[i].row);
        write_run_files(dir, std::string(settings[i].name) + "_", runs[i], false);
    }
    std::ostringstream csv;
    write_report_csv(csv, rows);
    write_text(dir / "ablation.csv", csv.str());
    res.report["rows"] = report_json(rows);
    write_text(dir / "ablation.json", dump(res.report));
    return res;
}

} // namespace zonerl
