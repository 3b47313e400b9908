#pragma once

#include "zonerl/constraints.hpp"
#include "zonerl/controller.hpp"
#include "zonerl/environment.hpp"
#include "zonerl/rng.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace zonerl {

inline constexpr std::size_t kMaxDiscreteStates = 100000;

struct DiscreteState {
    double x = 0.0;               // X level (level units for the fixtures)
    std::size_t spectra_index = 0;
    double spectra_level = 0.0;
    std::vector<double> budgets;  // remaining budget per tracked component
};

struct Transition {
    std::size_t to = 0;
    double prob = 0.0;
};

/// Finite augmented MDP. Action 0 is always NoOp. `reward` holds the reshaped
/// reward (costs included, -Delta on budget-violating states); `base` the
/// unshaped one. `available` masks actions that may not be taken in a state
/// (a long activation while the long effect is active); masked entries keep a
/// well-defined row so the tables stay finite.
class DiscreteTargetMDP {
public:
    DiscreteTargetMDP(std::vector<DiscreteState> states, std::vector<InterventionAction> actions,
                      std::vector<std::vector<std::vector<Transition>>> transitions,
                      std::vector<std::vector<double>> reward, std::vector<std::vector<double>> base,
                      std::vector<std::vector<char>> available, RewardConfig reward_cfg, double target,
                      std::vector<BudgetComponent> budget_components = {BudgetComponent::InterventionCount});

    std::size_t num_states() const { return states_.size(); }
    std::size_t num_actions() const { return actions_.size(); }
    double gamma() const { return cfg_.gamma; }
    double penalty() const { return cfg_.penalty; }
    double target() const { return target_; }
    const RewardConfig& reward_config() const { return cfg_; }

    const DiscreteState& state(std::size_t y) const { return states_[y]; }
    const InterventionAction& action(std::size_t a) const { return actions_[a]; }
    const std::vector<InterventionAction>& actions() const { return actions_; }
    const std::vector<Transition>& row(std::size_t y, std::size_t a) const { return transitions_[y][a]; }
    double reward(std::size_t y, std::size_t a) const { return reward_[y][a]; }
    double base(std::size_t y, std::size_t a) const { return base_[y][a]; }
    bool available(std::size_t y, std::size_t a) const { return available_[y][a] != 0; }
    const std::vector<BudgetComponent>& budget_components() const { return components_; }

    /// Index of `action` in the action list, or nullopt.
    std::optional<std::size_t> action_index(const InterventionAction& action) const;

    /// r(y,a) + gamma * sum_y' P(y'|y,a) v(y').
    double branch_value(std::size_t y, std::size_t a, std::span<const double> v) const;

    /// Throws ModelError on any broken invariant (row sums, sizes, state bound).
    void validate() const;

private:
    std::vector<DiscreteState> states_;
    std::vector<InterventionAction> actions_;
    std::vector<std::vector<std::vector<Transition>>> transitions_;
    std::vector<std::vector<double>> reward_;
    std::vector<std::vector<double>> base_;
    std::vector<std::vector<char>> available_;
    RewardConfig cfg_;
    double target_;
    std::vector<BudgetComponent> components_;
};

enum class FixtureProfile { Tiny, Small };

FixtureProfile fixture_from_string(const std::string& s);

/// Parameters of a fixture built by discretising the process dynamics on an
/// integer X grid. Mean next level is x + drift - k_long * eff - k_fast * h;
/// noise is spread over the neighbouring levels.
struct FixtureSpec {
    int x_levels = 2;
    double target = 0.0;      // M in level units
    double drift = 1.0;
    double k_long = 2.0;
    double k_fast = 2.0;
    double sigma = 0.0;       // in level units
    std::vector<double> spectra_interior;
    double spectra_stay = 0.6;
    double spectra_ratio = 0.5;
    int intervention_budget = 1; // n_Z; budget slots run from -1 (violated, absorbing) to n_Z
    std::vector<double> fast_set{1.0};
    RewardConfig reward{1.0, 1.0, 10.0, 0.5};
};

FixtureSpec fixture_spec(FixtureProfile profile);
DiscreteTargetMDP build_fixture_mdp(const FixtureSpec& spec);
DiscreteTargetMDP build_fixture_mdp(FixtureProfile profile);

/// Probability mass on integer offsets around `mean` with the given variance.
/// Uses a mean- and variance-preserving three-point stencil when it is valid,
/// otherwise linear interpolation between the two bracketing levels.
std::vector<Transition> quantise_gaussian(double mean, double sigma, int levels);

enum class OperatorMode { Greedy, FixedPolicy };

/// M_long v (y): best (or policy-averaged) long branch value. -inf when no
/// long action is available at y. `policy` weights the long actions in
/// action-list order in fixed-policy mode.
double intervention_operator_long(const DiscreteTargetMDP& mdp, std::span<const double> v, std::size_t y,
                                  OperatorMode mode = OperatorMode::Greedy, std::span<const double> policy = {});

/// M_fast v (y), over the fast actions.
double intervention_operator_fast(const DiscreteTargetMDP& mdp, std::span<const double> v, std::size_t y,
                                  OperatorMode mode = OperatorMode::Greedy, std::span<const double> policy = {});

/// (Tv)(y) = max( max{M_long v, r(y,0) + gamma P_0 v}, M_fast v ).
std::vector<double> bellman_backup(const DiscreteTargetMDP& mdp, std::span<const double> v);

struct ValueIterationResult {
    std::vector<double> v;
    std::vector<std::vector<double>> q; // Q*(y,a) = r(y,a) + gamma P_a v*
    int iterations = 0;
    std::vector<double> residuals;
};

/// Iterates T from v = 0 until the sup-norm change is below tol (1-gamma)/gamma.
ValueIterationResult value_iteration(const DiscreteTargetMDP& mdp, double tol, int max_iterations = 100000);

class QTable {
public:
    QTable() = default;
    QTable(std::size_t states, std::size_t actions, double init = 0.0);

    std::size_t num_states() const { return states_; }
    std::size_t num_actions() const { return actions_; }
    double& at(std::size_t y, std::size_t a) { return values_[y * actions_ + a]; }
    double at(std::size_t y, std::size_t a) const { return values_[y * actions_ + a]; }
    std::uint64_t visits(std::size_t y, std::size_t a) const { return visits_[y * actions_ + a]; }
    void visit(std::size_t y, std::size_t a) { ++visits_[y * actions_ + a]; }

    /// Q_1(y) = Q(y, Long), Q_2(y, h) = Q(y, Fast h).
    double long_branch(const DiscreteTargetMDP& mdp, std::size_t y) const;
    double fast_branch(const DiscreteTargetMDP& mdp, std::size_t y) const;
    /// Switching max over the available actions.
    double value(const DiscreteTargetMDP& mdp, std::size_t y) const;

    /// Sup-norm distance to `other` over the available pairs.
    double max_abs_diff(const DiscreteTargetMDP& mdp, const std::vector<std::vector<double>>& other) const;

    void write_csv(std::ostream& os) const;

private:
    std::size_t states_ = 0;
    std::size_t actions_ = 0;
    std::vector<double> values_;
    std::vector<std::uint64_t> visits_;
};

/// alpha_t = c / (visits + c0)^omega, eps_t = max(eps_floor, 1 / (1 + t / eps_scale)).
struct LearningSchedule {
    double c = 2.0;
    double c0 = 2.0;
    double omega = 1.0;
    double eps_floor = 0.05;
    double eps_scale = 1.0e4;
    std::uint64_t max_updates = 1000000;
    int episode_length = 1; // restart from a uniform state after this many steps
    double tolerance = 1.0e-2;

    double step_size(std::uint64_t visits) const;
    double epsilon(std::uint64_t t) const;
    void validate() const;
};

struct SampledTransition {
    std::size_t y = 0;
    std::size_t a = 0;
    double reward = 0.0;
    std::size_t next = 0;
};

/// Q(y,a) += step * [ r + gamma * V(y') - Q(y,a) ] where V is the switching max
/// over the actions available at y'.
void q_update(QTable& q, const SampledTransition& tr, const DiscreteTargetMDP& mdp, double step);

/// Samples y' ~ P(.|y,a).
std::size_t sample_next(const DiscreteTargetMDP& mdp, std::size_t y, std::size_t a, RngStream& rng);

/// Greedy switch decision from a Q table: L when the long branch attains the
/// switching max, else F when the fast branch does, else NoOp. Ties within
/// `tie_tol` resolve toward the intervention, matching the optimality regions.
SwitchDecision greedy_switch(const QTable& q, const DiscreteTargetMDP& mdp, std::size_t y, double tie_tol = 1e-9);

/// Action index of the greedy decision (lowest index among tied magnitudes).
std::size_t greedy_action(const QTable& q, const DiscreteTargetMDP& mdp, std::size_t y, double tie_tol = 1e-9);

struct QLearningResult {
    QTable q;
    std::uint64_t updates = 0;
    double final_error = 0.0;             // sup-norm error against the oracle, when given
    std::vector<double> error_trace;      // every 10^4 updates
};

/// Epsilon-greedy tabular Q-learning with restarts from uniformly drawn states.
QLearningResult q_learning(const DiscreteTargetMDP& mdp, const LearningSchedule& schedule, std::uint64_t seed,
                           const std::vector<std::vector<double>>* oracle = nullptr);

struct SwitchingPolicy {
    std::vector<SwitchDecision> decision;
    std::vector<double> m_long;
    std::vector<double> m_fast;
    std::vector<std::size_t> action; // greedy action index per state
};

/// Optimal intervention regions: L where M_long v* >= v*, F where
/// M_fast v* >= v* and M_long v* < v*, NoOp elsewhere.
SwitchingPolicy extract_switching_policy(const DiscreteTargetMDP& mdp, const ValueIterationResult& vi,
                                         double tie_tol = 1e-9);

struct HittingTimes {
    std::optional<std::int64_t> long_time; // first step the policy activates long
    std::optional<std::int64_t> fast_time; // first step the policy applies an impulse
};

HittingTimes first_hitting_times(const DiscreteTargetMDP& mdp, const SwitchingPolicy& policy, std::size_t start,
                                 std::int64_t horizon, RngStream& rng);

nlohmann::json mdp_to_json(const DiscreteTargetMDP& mdp);
/// Throws ModelError on tables that break the construction invariants.
DiscreteTargetMDP mdp_from_json(const nlohmann::json& j);

/// Discrete MDP driven as an environment. The look-ahead propagates the exact
/// state distribution instead of sampling.
class DiscreteMDPEnv final : public Environment {
public:
    DiscreteMDPEnv(std::shared_ptr<const DiscreteTargetMDP> mdp, std::size_t start_state, std::int64_t horizon);

    std::unique_ptr<Environment> clone() const override;
    Observation reset(std::uint64_t seed) override;
    Observation observe() const override;
    StepResult step(const InterventionAction& action) override;
    const SystemState& state() const override { return sys_; }
    BudgetVector budgets() const override;
    const RewardConfig& reward_config() const override { return mdp_->reward_config(); }
    double target() const override { return mdp_->target(); }
    void reseed(std::uint64_t seed) override { rng_ = RngStream(seed); }
    bool action_allowed(const InterventionAction& action) const override;
    std::vector<LookaheadPoint> lookahead(const InterventionAction& first, int horizon, int samples,
                                          RngStream& rng) const override;

    std::size_t state_index() const { return y_; }
    void set_state_index(std::size_t y);
    const DiscreteTargetMDP& mdp() const { return *mdp_; }

private:
    void sync();
    BudgetVector budgets_of(std::size_t y) const;

    std::shared_ptr<const DiscreteTargetMDP> mdp_;
    std::size_t start_;
    std::size_t y_ = 0;
    std::int64_t horizon_;
    std::int64_t t_ = 0;
    SystemState sys_;
    RngStream rng_;
};

} // namespace zonerl
