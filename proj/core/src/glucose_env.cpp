#include "zonerl/glucose_env.hpp"

#include "zonerl/errors.hpp"

#include <algorithm>
#include <cmath>

namespace zonerl {

std::string to_string(ScenarioTag tag) {
    switch (tag) {
    case ScenarioTag::CMP: return "CMP";
    case ScenarioTag::AGVP: return "AGVP";
    case ScenarioTag::PHC: return "PHC";
    }
    return "?";
}

ScenarioTag scenario_from_string(const std::string& s) {
    if (s == "CMP") return ScenarioTag::CMP;
    if (s == "AGVP") return ScenarioTag::AGVP;
    if (s == "PHC") return ScenarioTag::PHC;
    throw ConfigError("unknown scenario tag '" + s + "'");
}

MealScenario scenario_template(ScenarioTag tag) {
    MealScenario s;
    s.tag = tag;
    switch (tag) {
    case ScenarioTag::CMP:
        s.events = {
            {12 * 60.0, 60.0, 50.0, 10.0, 1.0},
            {18 * 60.0, 60.0, 70.0, 10.0, 1.0},
        };
        break;
    case ScenarioTag::AGVP:
        s.events = {
            {7 * 60.0, 0.0, 25.0, 10.0, 0.95},
            {12 * 60.0, 0.0, 40.0, 10.0, 0.95},
            {18 * 60.0, 0.0, 40.0, 10.0, 0.95},
            {9.5 * 60.0, 0.0, 0.0, 0.0, 0.30, 10.0, 30.0},
            {15 * 60.0, 0.0, 0.0, 0.0, 0.30, 10.0, 30.0},
            {21.5 * 60.0, 0.0, 0.0, 0.0, 0.30, 10.0, 30.0},
        };
        break;
    case ScenarioTag::PHC:
        s.events = {
            {7 * 60.0, 0.0, 60.0, 10.0, 0.95},
            {12 * 60.0, 0.0, 80.0, 10.0, 0.95},
            {18 * 60.0, 0.0, 100.0, 10.0, 0.95},
            {9.5 * 60.0, 0.0, 30.0, 5.0, 0.30},
            {15 * 60.0, 0.0, 30.0, 5.0, 0.30},
            {21.5 * 60.0, 0.0, 30.0, 5.0, 0.30},
        };
        break;
    }
    return s;
}

std::vector<RealisedMeal> build_scenario(const MealScenario& scenario, RngStream& rng, int steps_per_day,
                                         double minutes_per_step) {
    std::vector<RealisedMeal> out;
    for (const auto& ev : scenario.events) {
        if (ev.probability < 0.0 || ev.probability > 1.0) throw DomainError("meal probability outside [0,1]");
        // every event consumes the same number of draws so schedules stay aligned across scenarios
        const bool occurs = rng.uniform() < ev.probability;
        const double shift = rng.uniform(-1.0, 1.0) * ev.jitter;
        double grams = ev.carbs_hi > ev.carbs_lo ? rng.uniform(ev.carbs_lo, ev.carbs_hi)
                                                 : ev.carbs_mean + ev.carbs_sd * rng.normal();
        grams = std::max(0.0, grams);
        if (!occurs) continue;
        double minute = std::clamp(ev.minute + shift, 0.0, steps_per_day * minutes_per_step - 1e-9);
        auto step = static_cast<std::int64_t>(std::floor(minute / minutes_per_step));
        out.push_back({step, grams});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
    return out;
}

nlohmann::json to_json(const MealScenario& scenario) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : scenario.events) {
        events.push_back({{"minute", e.minute},
                          {"jitter", e.jitter},
                          {"carbs_mean", e.carbs_mean},
                          {"carbs_sd", e.carbs_sd},
                          {"probability", e.probability},
                          {"carbs_lo", e.carbs_lo},
                          {"carbs_hi", e.carbs_hi}});
    }
    return {{"tag", to_string(scenario.tag)}, {"events", events}};
}

MealScenario meal_scenario_from_json(const nlohmann::json& j) {
    MealScenario s;
    s.tag = scenario_from_string(j.at("tag").get<std::string>());
    for (const auto& e : j.at("events")) {
        MealEvent ev;
        ev.minute = e.at("minute").get<double>();
        ev.jitter = e.value("jitter", 0.0);
        ev.carbs_mean = e.value("carbs_mean", 0.0);
        ev.carbs_sd = e.value("carbs_sd", 0.0);
        ev.probability = e.value("probability", 1.0);
        ev.carbs_lo = e.value("carbs_lo", 0.0);
        ev.carbs_hi = e.value("carbs_hi", 0.0);
        if (ev.probability < 0.0 || ev.probability > 1.0) throw ConfigError("meal probability outside [0,1]");
        s.events.push_back(ev);
    }
    return s;
}

double glucose_drift(const GlucoseDynamics& dyn, double gut_carbs, double fast_active, double long_effect, double x) {
    return dyn.k_abs * gut_carbs - dyn.k_fast * fast_active - dyn.k_long * long_effect -
           dyn.k_homeo * (x - dyn.x_basal);
}

void GlucoseEnvConfig::validate() const {
    constraints.validate();
    if (fast_set.empty()) throw ConfigError("glucose env: fast intervention set is empty");
    if (std::any_of(fast_set.begin(), fast_set.end(), [](double h) { return h < 0.0; }))
        throw ConfigError("glucose env: fast magnitudes must be nonnegative");
    if (steps_per_day < 1 || days < 1) throw ConfigError("glucose env: horizon must be positive");
    if (!(x_min < severe_hypo && severe_hypo < x_max)) throw ConfigError("glucose env: inconsistent glucose bounds");
    const double max_fast = *std::max_element(fast_set.begin(), fast_set.end());
    reward.validate(max_abs_base_reward(x_min, x_max, constraints.target, max_fast, reward));
}

GlucoseEnv::GlucoseEnv(GlucoseEnvConfig cfg)
    : cfg_(std::move(cfg)),
      spectra_(cfg_.spectra_levels, cfg_.spectra_stay, cfg_.spectra_ratio),
      budgets_(cfg_.constraints, cfg_.budget_components) {
    cfg_.validate();
    underlying_.sigma = cfg_.dynamics.sigma_x;
    underlying_.dt = 1.0;
    interventions_.sigma_fast = cfg_.sigma_z_fast;
    interventions_.sigma_long = cfg_.sigma_z_long;
    reset(0);
}

std::unique_ptr<Environment> GlucoseEnv::clone() const {
    return std::make_unique<GlucoseEnv>(*this);
}

void GlucoseEnv::prepare_lookahead_model(Environment& sim) const {
    if (cfg_.shield_sees_meals) return;
    // the model only knows carbohydrates already on board
    auto& g = static_cast<GlucoseEnv&>(sim);
    for (auto& day : g.meals_) day.clear();
}

void GlucoseEnv::reseed(std::uint64_t seed) {
    RngStream root(seed);
    dynamics_rng_ = root.fork("dynamics");
    sensor_rng_ = root.fork("sensor");
}

void GlucoseEnv::clear_physiology() {
    gut_ = 0.0;
    fast_active_ = 0.0;
    long_effect_ = 0.0;
    spectra_.set_level_index(0);
    state_.spectra_level = 0.0;
    state_.long_pulse = 0.0;
    state_.fast_impulse = 0.0;
}

Observation GlucoseEnv::reset(std::uint64_t seed) { return reset(seed, RngStream(seed).fork("meals").next_seed()); }

Observation GlucoseEnv::reset(std::uint64_t seed, std::uint64_t meal_seed) {
    reseed(seed);
    RngStream meal_rng(meal_seed);
    meals_.clear();
    for (int d = 0; d < cfg_.days; ++d)
        meals_.push_back(build_scenario(cfg_.scenario, meal_rng, cfg_.steps_per_day, cfg_.minutes_per_step));

    state_ = SystemState{};
    state_.x = cfg_.initial_glucose;
    clear_physiology();
    interventions_.z_fast = 0.0;
    interventions_.z_long = 0.0;
    interventions_.fast_history.clear();
    interventions_.long_history.clear();
    budgets_ = BudgetTracker(cfg_.constraints, cfg_.budget_components);
    severe_events_ = 0;
    obs_ = Observation{};
    obs_ = make_observation(std::nan(""));
    return obs_;
}

void GlucoseEnv::set_glucose(double x) {
    state_.x = x;
    obs_.glucose = x;
}

void GlucoseEnv::set_pools(double gut, double fast_active) {
    if (gut < 0.0 || fast_active < 0.0) throw DomainError("pools must be nonnegative");
    gut_ = gut;
    fast_active_ = fast_active;
}

Observation GlucoseEnv::make_observation(double previous_sensed) {
    Observation o;
    o.step = state_.t;
    o.glucose = state_.x + (cfg_.sensor_sigma > 0.0 ? cfg_.sensor_sigma * sensor_rng_.normal() : 0.0);
    o.trend = std::isnan(previous_sensed) ? 0.0 : o.glucose - previous_sensed;
    o.spectra_level = spectra_.level();
    o.long_active = spectra_.active();
    o.budgets = budgets_.evaluate(state_.x).values;
    if (cfg_.carbs_visible) o.carbs = gut_;
    if (!interventions_.fast_history.empty()) o.steps_since_fast = state_.t - interventions_.fast_history.back().t;
    return o;
}

StepResult GlucoseEnv::step(const InterventionAction& action) {
    if (action.kind == ActionKind::Fast &&
        std::find(cfg_.fast_set.begin(), cfg_.fast_set.end(), action.magnitude) == cfg_.fast_set.end())
        throw DomainError("glucose env: fast magnitude " + std::to_string(action.magnitude) + " not in H^F");
    if (action.kind == ActionKind::Long && spectra_.active())
        throw DomainError("glucose env: long activation refused while a long effect is active");

    const std::int64_t t = state_.t;
    const auto day = static_cast<std::size_t>(t / cfg_.steps_per_day);
    const std::int64_t tod = t % cfg_.steps_per_day;

    StepResult res;
    if (day < meals_.size()) {
        for (const auto& m : meals_[day])
            if (m.step == tod) res.info.meal_grams += m.grams;
    }
    gut_ += res.info.meal_grams;

    const bool fast = action.kind == ActionKind::Fast;
    const bool activate = action.kind == ActionKind::Long;
    if (fast) fast_active_ += action.magnitude;
    res.info.gut_carbs = gut_;
    res.info.fast_active = fast_active_;
    step_fast_process(interventions_, fast ? std::optional<double>(action.magnitude) : std::nullopt, t,
                      dynamics_rng_);
    step_long_process(interventions_, activate, t, dynamics_rng_);
    if (activate) spectra_.step(true, dynamics_rng_);

    state_.long_pulse = activate ? 1.0 : 0.0;
    state_.fast_impulse = fast ? action.magnitude : 0.0;
    state_.spectra_level = spectra_.level();
    state_.z_fast = interventions_.z_fast;
    state_.z_long = interventions_.z_long;
    long_effect_ = effective_long_magnitude(state_);

    const SystemState before = state_;
    res.base_reward = base_reward(before.x, action, cfg_.constraints.target, cfg_.reward);
    res.reshaped_reward =
        reshape_reward(res.base_reward, budgets_.evaluate(before.x).values, cfg_.reward.penalty);
    budgets_.record(before, action);

    underlying_.x = before.x;
    underlying_.drift = [this](const SystemState& s) {
        return glucose_drift(cfg_.dynamics, gut_, fast_active_, long_effect_, s.x);
    };
    double next = step_underlying(underlying_, before, dynamics_rng_);
    next = std::clamp(next, cfg_.x_min, cfg_.x_max);

    gut_ *= 1.0 - cfg_.dynamics.k_abs;
    fast_active_ *= 1.0 - cfg_.dynamics.k_fast_decay;
    spectra_.step(false, dynamics_rng_);

    state_.t = t + 1;
    state_.x = next;
    state_.long_pulse = 0.0;
    state_.fast_impulse = 0.0;
    state_.spectra_level = spectra_.level();
    res.info.x_before_reset = next;

    if (next < cfg_.severe_hypo) {
        res.info.severe_hypo = true;
        ++severe_events_;
        budgets_.add_violation();
        res.budgets = budgets_.evaluate(next);
        clear_physiology();
        state_.x = cfg_.initial_glucose;
    } else {
        res.budgets = budgets_.evaluate(next);
    }

    const double previous = obs_.glucose;
    obs_ = make_observation(previous);
    res.observation = obs_;
    res.done = state_.t >= cfg_.horizon();
    return res;
}

} // namespace zonerl
