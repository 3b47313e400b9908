#pragma once

#include "zonerl/controller.hpp"
#include "zonerl/environment.hpp"
#include "zonerl/rng.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace zonerl {

/// Options for the tabular glucose learner. Observations are coarsened to
/// 10 mg/dL glucose bins, a three-level trend, long-effect activity, time since
/// the last impulse, and optionally carbohydrate and budget buckets.
struct AgentOptions {
    std::vector<double> fast_set{1.0, 2.0, 4.0};
    bool use_carbs = true;
    bool use_budgets = true;
    bool allow_long = true;
    double gamma = 0.97;
    double reward_scale = 1.0e-3;  // rewards are multiplied by this before learning
    double step_omega = 0.6;       // alpha = max(step_floor, 1 / (1 + visits)^omega)
    double step_floor = 0.001;
    double eps_start = 0.3;
    double eps_floor = 0.02;
    double trend_band = 1.5;       // mg/dL per step
    int count_slot = 0;            // position of the count budget in Observation::budgets, -1 if absent
    int fast_range_slot = 2;       // position of the fast admissible-range budget, -1 if absent
    std::vector<double> slack_edges{5.0, 10.0, 20.0, 35.0, 50.0}; // admissible-range slack bucket edges, ascending
    std::uint32_t min_visits = 5;  // updates before an intervention column can be chosen greedily
};

/// Shared Q table over {NoOp, Long, Fast h}. The fast policy proposes the best
/// magnitude, the long policy proposes an activation whenever none is active,
/// and the switcher picks the best of the three branches. All three explore
/// epsilon-greedily while training.
class TabularGlucoseAgent : public std::enable_shared_from_this<TabularGlucoseAgent> {
public:
    explicit TabularGlucoseAgent(AgentOptions opts);

    std::size_t num_states() const;
    std::size_t num_actions() const { return 2 + opts_.fast_set.size(); }
    std::size_t encode(const Observation& obs) const;

    /// Executed action -> column index.
    std::size_t action_column(const InterventionAction& a) const;

    /// Bundle whose three components read this agent's table.
    PolicyBundle bundle();

    void set_training(bool training) { training_ = training; }
    bool training() const { return training_; }
    /// Exploration rate decays linearly from eps_start to eps_floor over `episodes`.
    void set_exploration(int episode, int episodes);
    double epsilon() const { return training_ ? epsilon_ : 0.0; }

    /// Q-learning update from one executed transition.
    void learn(const TransitionRecord& rec, bool use_shaped_reward);

    double q(std::size_t s, std::size_t a) const { return q_[s * num_actions() + a]; }
    const AgentOptions& options() const { return opts_; }

    /// Q value, or -inf for a column updated fewer than min_visits times.
    double score(std::size_t s, std::size_t a) const;
    /// Best fast column at s among updated ones (lowest index on ties).
    std::size_t best_fast(std::size_t s) const;
    /// Greedy switch over [NoOp, Long, Fast] with ties toward NoOp; untried branches never win.
    SwitchDecision best_switch(std::size_t s, bool long_available) const;

private:
    double value(std::size_t s, bool long_active) const;

    AgentOptions opts_;
    std::vector<double> q_;
    std::vector<std::uint32_t> visits_;
    bool training_ = true;
    double epsilon_ = 0.0;
};

} // namespace zonerl
