#pragma once

#include "zonerl/constraints.hpp"
#include "zonerl/environment.hpp"
#include "zonerl/process.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace zonerl {

enum class ScenarioTag { CMP, AGVP, PHC };

std::string to_string(ScenarioTag tag);
ScenarioTag scenario_from_string(const std::string& s);

/// One possible meal. Carbohydrates are normal(mean, sd) truncated at 0, or
/// uniform on [carbs_lo, carbs_hi] when that range is non-empty.
struct MealEvent {
    double minute = 0.0;        // clock time of day, minutes after midnight
    double jitter = 0.0;        // uniform +/- jitter minutes
    double carbs_mean = 0.0;
    double carbs_sd = 0.0;
    double probability = 1.0;
    double carbs_lo = 0.0;
    double carbs_hi = 0.0;
};

struct MealScenario {
    ScenarioTag tag = ScenarioTag::AGVP;
    std::vector<MealEvent> events;
};

struct RealisedMeal {
    std::int64_t step = 0; // step within the day
    double grams = 0.0;
};

/// The three evaluation protocols: controlled lunch/dinner, ambulatory
/// three-meal-plus-snacks, and the high-carbohydrate challenge.
MealScenario scenario_template(ScenarioTag tag);

/// Draws one day's meals. Events are returned in time order.
std::vector<RealisedMeal> build_scenario(const MealScenario& scenario, RngStream& rng, int steps_per_day = 288,
                                         double minutes_per_step = 5.0);

nlohmann::json to_json(const MealScenario& scenario);
MealScenario meal_scenario_from_json(const nlohmann::json& j);

/// Stylised glucose-insulin coefficients, all per 5-minute step.
struct GlucoseDynamics {
    double k_abs = 0.03;      // gut absorption, 1/step
    double k_fast = 1.2;      // mg/dL per unit of active fast insulin per step
    double k_fast_decay = 0.15;
    double k_long = 0.8;      // mg/dL per step at spectra level 1
    double k_homeo = 0.008;   // pull toward basal, 1/step
    double x_basal = 140.0;
    double sigma_x = 1.0;
};

/// U = k_abs G - k_F A^F - k_L (long effect) - k_h (X - X_b).
double glucose_drift(const GlucoseDynamics& dyn, double gut_carbs, double fast_active, double long_effect, double x);

struct GlucoseEnvConfig {
    GlucoseDynamics dynamics;
    double initial_glucose = 140.0;
    double severe_hypo = 40.0;
    double x_min = 10.0;
    double x_max = 600.0;
    double sensor_sigma = 1.0;
    double sigma_z_fast = 0.0;
    double sigma_z_long = 0.0;

    std::vector<double> spectra_levels{0.2, 0.4, 0.6, 0.8};
    double spectra_stay = 0.9;
    double spectra_ratio = 0.5;

    ConstraintSet constraints{125.0, 55.0, 432.0, 60.0};
    std::vector<BudgetComponent> budget_components = all_budget_components();
    RewardConfig reward{1.0, 0.1, 1.0e6, 0.97};

    std::vector<double> fast_set{1.0, 2.0, 4.0};
    MealScenario scenario = scenario_template(ScenarioTag::AGVP);
    bool carbs_visible = true;
    /// Whether the shield's look-ahead model knows the future meal schedule.
    bool shield_sees_meals = false;
    int steps_per_day = 288;
    int days = 3;
    double minutes_per_step = 5.0;

    void validate() const;
    std::int64_t horizon() const { return static_cast<std::int64_t>(steps_per_day) * days; }
};

/// Type-1 diabetes caricature driven by the dual-intervention processes: fast
/// insulin enters an activity pool, long insulin acts through the spectra level,
/// meals enter a gut pool. X below the severe-hypo threshold triggers a
/// mid-episode simulator reset that is counted as an emergency event.
class GlucoseEnv final : public Environment {
public:
    explicit GlucoseEnv(GlucoseEnvConfig cfg);

    std::unique_ptr<Environment> clone() const override;
    Observation reset(std::uint64_t seed) override;
    /// Separate seeds for the meal schedule and for everything else.
    Observation reset(std::uint64_t seed, std::uint64_t meal_seed);
    Observation observe() const override { return obs_; }
    StepResult step(const InterventionAction& action) override;
    const SystemState& state() const override { return state_; }
    BudgetVector budgets() const override { return budgets_.evaluate(state_.x); }
    const RewardConfig& reward_config() const override { return cfg_.reward; }
    double target() const override { return cfg_.constraints.target; }
    void reseed(std::uint64_t seed) override;

    const GlucoseEnvConfig& config() const { return cfg_; }
    double gut_carbs() const { return gut_; }
    double fast_active() const { return fast_active_; }
    int severe_events() const { return severe_events_; }
    const std::vector<std::vector<RealisedMeal>>& meals() const { return meals_; }
    const InterventionProcess& interventions() const { return interventions_; }
    const BudgetTracker& budget_tracker() const { return budgets_; }

    /// Overrides X (used by tests to force excursions).
    void set_glucose(double x);
    void set_pools(double gut, double fast_active);

protected:
    void prepare_lookahead_model(Environment& sim) const override;

private:
    Observation make_observation(double previous_sensed);
    void clear_physiology();

    GlucoseEnvConfig cfg_;
    SystemState state_;
    SpectraProcess spectra_;
    InterventionProcess interventions_;
    UnderlyingProcess underlying_;
    BudgetTracker budgets_;
    double gut_ = 0.0;
    double fast_active_ = 0.0;
    double long_effect_ = 0.0;
    int severe_events_ = 0;
    std::vector<std::vector<RealisedMeal>> meals_;
    RngStream dynamics_rng_;
    RngStream sensor_rng_;
    Observation obs_;
};

} // namespace zonerl
