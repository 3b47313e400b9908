#pragma once

#include "zonerl/constraints.hpp"
#include "zonerl/process.hpp"
#include "zonerl/rng.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace zonerl {

/// What a policy gets to see at step t.
struct Observation {
    std::int64_t step = 0;
    double glucose = 0.0;          // sensed X
    double trend = 0.0;            // sensed change since the previous step
    double spectra_level = 0.0;
    bool long_active = false;
    std::vector<double> budgets;
    std::optional<double> carbs;   // carbohydrates on board, only when visible
    std::int64_t steps_since_fast = -1; // steps since the last fast impulse, -1 if none yet
    std::optional<std::size_t> state_index; // discrete environments only
};

struct StepInfo {
    bool severe_hypo = false;
    double meal_grams = 0.0;
    double x_before_reset = 0.0; // X reached by the dynamics, before any reset
    double gut_carbs = 0.0;      // G driving this step (after the meal was added)
    double fast_active = 0.0;    // A^F driving this step (after the impulse was added)
};

struct StepResult {
    Observation observation;
    double base_reward = 0.0;
    double reshaped_reward = 0.0;
    BudgetVector budgets; // b_{t+1}, evaluated at the X reached by the dynamics
    bool done = false;
    StepInfo info;
};

/// One point of a shield look-ahead: Monte-Carlo mean X and budgets at t+k.
struct LookaheadPoint {
    double x = 0.0;
    BudgetVector budgets;
    double reshaped_reward = 0.0;
};

/// A controllable system that the switching controller can drive and the shield
/// can simulate. Implementations own their random stream.
class Environment {
public:
    virtual ~Environment() = default;

    virtual std::unique_ptr<Environment> clone() const = 0;
    virtual Observation reset(std::uint64_t seed) = 0;
    virtual Observation observe() const = 0;
    virtual StepResult step(const InterventionAction& action) = 0;
    virtual const SystemState& state() const = 0;
    virtual BudgetVector budgets() const = 0;
    virtual const RewardConfig& reward_config() const = 0;
    virtual double target() const = 0;

    /// Replaces the environment's random stream; used on clones.
    virtual void reseed(std::uint64_t seed) = 0;

    /// Long activation is refused while a long effect is still active.
    virtual bool action_allowed(const InterventionAction& action) const;

    /// K-step look-ahead with `first` then no-ops, averaging `samples` sampled
    /// trajectories at every step. Deterministic given `rng`.
    virtual std::vector<LookaheadPoint> lookahead(const InterventionAction& first, int horizon, int samples,
                                                  RngStream& rng) const;

protected:
    /// Adjusts a freshly cloned look-ahead model before it is rolled forward.
    virtual void prepare_lookahead_model(Environment&) const {}
};

} // namespace zonerl
