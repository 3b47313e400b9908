#pragma once

#include "zonerl/constraints.hpp"
#include "zonerl/environment.hpp"
#include "zonerl/rng.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace zonerl {

/// Switcher output. Action set order is [NoOp, Long, Fast].
enum class SwitchDecision { NoOp = 0, ActivateLong = 1, ActivateFast = 2 };

std::string to_string(SwitchDecision d);

/// Proposals drawn from the intervention policies before the switch decides.
struct Proposal {
    double fast = 0.0; // proposed eta^F
    int long_flag = 0; // proposed eta^L in {0, 1}
};

class FastPolicy {
public:
    virtual ~FastPolicy() = default;
    virtual double propose(const Observation& obs, RngStream& rng) = 0;
};

class LongPolicy {
public:
    virtual ~LongPolicy() = default;
    virtual int propose(const Observation& obs, RngStream& rng) = 0;
};

class Switcher {
public:
    virtual ~Switcher() = default;
    virtual SwitchDecision decide(const Observation& obs, const Proposal& proposal, RngStream& rng) = 0;
};

class ConstantFastPolicy final : public FastPolicy {
public:
    explicit ConstantFastPolicy(double magnitude) : magnitude_(magnitude) {}
    double propose(const Observation&, RngStream&) override { return magnitude_; }

private:
    double magnitude_;
};

class UniformFastPolicy final : public FastPolicy {
public:
    explicit UniformFastPolicy(std::vector<double> support);
    double propose(const Observation&, RngStream& rng) override;

private:
    std::vector<double> support_;
};

class ConstantLongPolicy final : public LongPolicy {
public:
    explicit ConstantLongPolicy(int flag) : flag_(flag) {}
    int propose(const Observation&, RngStream&) override { return flag_; }

private:
    int flag_;
};

class BernoulliLongPolicy final : public LongPolicy {
public:
    explicit BernoulliLongPolicy(double p) : p_(p) {}
    int propose(const Observation&, RngStream& rng) override { return rng.bernoulli(p_) ? 1 : 0; }

private:
    double p_;
};

class ConstantSwitcher final : public Switcher {
public:
    explicit ConstantSwitcher(SwitchDecision d) : d_(d) {}
    SwitchDecision decide(const Observation&, const Proposal&, RngStream&) override { return d_; }

private:
    SwitchDecision d_;
};

/// Intervenes with probability p_long + p_fast per step.
class RandomSwitcher final : public Switcher {
public:
    RandomSwitcher(double p_long, double p_fast) : p_long_(p_long), p_fast_(p_fast) {}
    SwitchDecision decide(const Observation&, const Proposal&, RngStream& rng) override;

private:
    double p_long_;
    double p_fast_;
};

/// Fixed clock schedule: long activation at `long_minutes`, fast impulse at `fast_minutes`.
class ScheduleSwitcher final : public Switcher {
public:
    ScheduleSwitcher(std::vector<double> long_minutes, std::vector<double> fast_minutes, int steps_per_day = 288,
                     double minutes_per_step = 5.0);
    SwitchDecision decide(const Observation& obs, const Proposal&, RngStream&) override;

private:
    std::vector<std::int64_t> long_steps_;
    std::vector<std::int64_t> fast_steps_;
    int steps_per_day_;
};

struct PolicyBundle {
    std::shared_ptr<FastPolicy> fast;
    std::shared_ptr<LongPolicy> long_policy;
    std::shared_ptr<Switcher> switcher;
    std::vector<double> fast_set; // H^F
};

/// Independent draws from pi^F then pi^L.
Proposal propose(PolicyBundle& bundle, const Observation& obs, RngStream& rng);

/// Fixes the switcher to Fast, pi^L to 0 and adds 0 to H^F: the fast-only
/// program as a configuration of the dual one.
PolicyBundle degenerate_to_case_a(const PolicyBundle& bundle);

struct ShieldConfig {
    bool enabled = true;
    int horizon = 3;  // K
    int samples = 1;  // N
    void validate() const;
};

enum class ShieldVerdict { Accept, Reject, Skipped };

std::string to_string(ShieldVerdict v);

/// Model-predictive shield: rolls the model K steps forward from the current
/// state with `action` then no-ops, and rejects if any predicted reshaped reward
/// is the violation penalty.
ShieldVerdict shield(const ShieldConfig& cfg, const Environment& env, const InterventionAction& action,
                     RngStream& rng);

enum class ExecutedKind { NoOp, ContinueLong, Fast, Long };

std::string to_string(ExecutedKind k);

struct TransitionRecord {
    std::int64_t step = 0;
    Observation observation;
    SystemState state;
    std::vector<double> budgets;
    Proposal proposal;
    SwitchDecision decision = SwitchDecision::NoOp;
    ShieldVerdict verdict = ShieldVerdict::Skipped;
    InterventionAction executed;
    ExecutedKind executed_kind = ExecutedKind::NoOp;
    double long_effect = 0.0; // effective long magnitude applied at this step
    double base_reward = 0.0;
    double reshaped_reward = 0.0;
    double switcher_reward = 0.0;
    Observation next_observation;
    SystemState next_state;
    std::vector<double> next_budgets;
    StepInfo info;
    bool done = false;
};

inline constexpr int kTransitionLogVersion = 1;

nlohmann::json to_json(const TransitionRecord& r);

/// Separate streams so policy sampling and shield rollouts never interfere.
struct ControlRng {
    RngStream policy;
    RngStream shield;
    static ControlRng from_seed(std::uint64_t seed);
};

/// One step of the switching loop:
///  1. a long effect is active and the shield accepts continuing it -> continue;
///  2. the switch picks Long, a long activation is proposed and accepted -> activate;
///  3. the switch picks Fast and the impulse is accepted -> impulse;
///  4. otherwise no-op.
TransitionRecord control_step(Environment& env, PolicyBundle& bundle, const ShieldConfig& shield_cfg,
                              ControlRng& rng);

using RecordObserver = std::function<void(const TransitionRecord&)>;

/// Resets the environment (and its budgets) with `episode_seed` and runs up to T steps.
std::vector<TransitionRecord> run_episode(Environment& env, PolicyBundle& bundle, const ShieldConfig& shield_cfg,
                                          std::int64_t horizon, std::uint64_t episode_seed,
                                          const RecordObserver& observer = {});

/// Fast-only loop: every step proposes an impulse from pi^F and applies it when shielded-safe.
std::vector<TransitionRecord> run_episode_case_a(Environment& env, FastPolicy& fast, const ShieldConfig& shield_cfg,
                                                 std::int64_t horizon, std::uint64_t episode_seed);

} // namespace zonerl
