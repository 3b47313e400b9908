#pragma once

#include "zonerl/process.hpp"

#include <span>
#include <string>
#include <vector>

namespace zonerl {

enum class ActionKind { NoOp, Fast, Long };

/// One executed (or proposed) intervention: nothing, a fast impulse of some
/// magnitude, or a long-acting activation.
struct InterventionAction {
    ActionKind kind = ActionKind::NoOp;
    double magnitude = 0.0;

    static InterventionAction noop() { return {}; }
    static InterventionAction fast(double m) { return {ActionKind::Fast, m}; }
    static InterventionAction long_activation() { return {ActionKind::Long, 1.0}; }

    bool is_noop() const { return kind == ActionKind::NoOp; }
    bool operator==(const InterventionAction&) const = default;
};

std::string to_string(const InterventionAction& a);

/// Zone geometry and budgets. The glucose instantiation uses M = 125, l = 55,
/// i.e. the zone [70, 180].
struct ConstraintSet {
    double target = 125.0;            // M
    double tolerance = 55.0;          // l
    double violation_budget = 0.0;    // N_0
    double intervention_budget = 1.0; // n_Z

    double half_target() const { return 0.5 * target; }
    void validate() const;
};

struct RewardConfig {
    double long_cost = 1.0;   // alpha
    double fast_cost = 0.1;   // beta
    double penalty = 1.0e4;   // Delta
    double gamma = 0.99;

    /// Delta must strictly exceed the largest attainable per-step |R|.
    void validate(double max_abs_base_reward) const;
};

/// 1 for any fast impulse or long activation, 0 for no-op.
int constraint_count(const InterventionAction& action);

/// X - M/2 - cumulative; nonnegative means admissible.
double constraint_admissible_range(double x, double target, double cumulative);

/// Heaviside(|X - M| - l) with H(0) = 0, so the zone boundary is inside.
int constraint_zone_violation(double x, double target, double tolerance);

/// -(X - M)^2 - alpha 1{long} - beta (eta^F)^2 1{fast}.
double base_reward(double x, const InterventionAction& action, double target, const RewardConfig& cfg);

/// base when every budget component is >= 0, otherwise -Delta.
double reshape_reward(double base, std::span<const double> budgets, double penalty);

/// Largest |base_reward| for X in [x_lo, x_hi] and fast magnitudes up to max_fast.
double max_abs_base_reward(double x_lo, double x_hi, double target, double max_fast, const RewardConfig& cfg);

enum class BudgetComponent {
    InterventionCount, // b1 = n_Z - #interventions
    LongAdmissible,    // b2 = X - M/2 - sum of long activation pulses
    FastAdmissible,    // b3 = X - M/2 - sum of fast impulses
    ZoneViolation,     // b4 = N_0 - #zone violations
};

std::string to_string(BudgetComponent c);

struct BudgetVector {
    std::vector<BudgetComponent> components;
    std::vector<double> values;

    bool satisfied() const;
    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    /// Value of a component, or +inf when the component is not tracked.
    double get(BudgetComponent c) const;
};

/// The four components of the injection-budget construction, in order.
std::vector<BudgetComponent> all_budget_components();

/// Remaining-budget augmentation. Holds the telescoping sums of each constraint
/// function L^i; the budget vector is evaluated against the current X because
/// the admissible-range components are defined relative to it.
class BudgetTracker {
public:
    BudgetTracker() = default;
    BudgetTracker(ConstraintSet constraints, std::vector<BudgetComponent> components);

    void reset();

    /// Adds L^i(y_t, eta_t) for every tracked component.
    void record(const SystemState& state, const InterventionAction& action);

    /// Pure variant of `record`.
    BudgetTracker updated(const SystemState& state, const InterventionAction& action) const;

    BudgetVector evaluate(double x) const;

    const ConstraintSet& constraints() const { return constraints_; }
    const std::vector<BudgetComponent>& components() const { return components_; }

    double interventions_used() const { return interventions_; }
    double long_pulses() const { return long_pulses_; }
    double fast_total() const { return fast_total_; }
    double violations() const { return violations_; }

    /// Counts a zone excursion that happened outside the regular step (severe-hypo reset).
    void add_violation() { violations_ += 1.0; }

private:
    ConstraintSet constraints_;
    std::vector<BudgetComponent> components_;
    double interventions_ = 0.0;
    double long_pulses_ = 0.0;
    double fast_total_ = 0.0;
    double violations_ = 0.0;
};

} // namespace zonerl
