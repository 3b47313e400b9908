#pragma once

// Deterministic scalar environment for controller tests: X moves by a constant
// drift, falls by `long_drop` per step while a long effect is on and by
// `fast_drop` per unit of impulse. A long effect lasts `long_steps` steps at a
// fixed level.
#include "zonerl/constraints.hpp"
#include "zonerl/environment.hpp"

#include <memory>

namespace zonerl::testing {

class ToyEnv final : public Environment {
public:
    struct Params {
        double x0 = 125.0;
        double drift = 0.0;
        double long_drop = 10.0;
        double fast_drop = 1.0;
        int long_steps = 3;
        double long_level = 1.0;
        ConstraintSet constraints{125.0, 55.0, 1000.0, 10.0};
        std::vector<BudgetComponent> components = all_budget_components();
        RewardConfig reward{1.0, 0.1, 1.0e6, 0.97};
        std::int64_t horizon = 1000;
    };

    explicit ToyEnv(Params p) : p_(std::move(p)), tracker_(p_.constraints, p_.components) { reset(0); }

    std::unique_ptr<Environment> clone() const override { return std::make_unique<ToyEnv>(*this); }

    Observation reset(std::uint64_t) override {
        state_ = SystemState{};
        state_.x = p_.x0;
        remaining_ = 0;
        tracker_.reset();
        return observe();
    }

    Observation observe() const override {
        Observation o;
        o.step = state_.t;
        o.glucose = state_.x;
        o.spectra_level = state_.spectra_level;
        o.long_active = state_.spectra_level > 0.0;
        o.budgets = budgets().values;
        return o;
    }

    StepResult step(const InterventionAction& a) override {
        StepResult r;
        const SystemState before = state_;
        r.base_reward = base_reward(before.x, a, p_.constraints.target, p_.reward);
        r.reshaped_reward = reshape_reward(r.base_reward, tracker_.evaluate(before.x).values, p_.reward.penalty);
        tracker_.record(before, a);
        if (a.kind == ActionKind::Long) remaining_ = p_.long_steps;
        double x = before.x + p_.drift;
        if (remaining_ > 0) {
            x -= p_.long_drop;
            --remaining_;
        }
        if (a.kind == ActionKind::Fast) x -= p_.fast_drop * a.magnitude;
        state_.x = x;
        state_.t += 1;
        state_.spectra_level = remaining_ > 0 ? p_.long_level : 0.0;
        r.info.x_before_reset = x;
        r.budgets = tracker_.evaluate(x);
        r.observation = observe();
        r.done = state_.t >= p_.horizon;
        return r;
    }

    const SystemState& state() const override { return state_; }
    BudgetVector budgets() const override { return tracker_.evaluate(state_.x); }
    const RewardConfig& reward_config() const override { return p_.reward; }
    double target() const override { return p_.constraints.target; }
    void reseed(std::uint64_t) override {}

    /// Puts the environment mid long effect at the given level.
    void start_long_effect(double level, int steps) {
        p_.long_level = level;
        remaining_ = steps;
        state_.spectra_level = level;
    }

private:
    Params p_;
    SystemState state_;
    BudgetTracker tracker_;
    int remaining_ = 0;
};

} // namespace zonerl::testing
