#include "zonerl/constraints.hpp"

#include "zonerl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace zonerl {

std::string to_string(const InterventionAction& a) {
    switch (a.kind) {
    case ActionKind::NoOp: return "noop";
    case ActionKind::Long: return "long";
    case ActionKind::Fast: {
        std::ostringstream os;
        os << "fast(" << a.magnitude << ")";
        return os.str();
    }
    }
    return "?";
}

std::string to_string(BudgetComponent c) {
    switch (c) {
    case BudgetComponent::InterventionCount: return "count";
    case BudgetComponent::LongAdmissible: return "long_range";
    case BudgetComponent::FastAdmissible: return "fast_range";
    case BudgetComponent::ZoneViolation: return "zone";
    }
    return "?";
}

void ConstraintSet::validate() const {
    if (!(target > 0.0)) throw ConfigError("constraints: target M must be positive");
    if (!(tolerance > 0.0)) throw ConfigError("constraints: tolerance must be positive");
    if (!(target - tolerance > 0.0)) throw ConfigError("constraints: M - l must be positive");
    if (violation_budget < 0.0) throw ConfigError("constraints: N_0 must be nonnegative");
    if (intervention_budget < 1.0) throw ConfigError("constraints: n_Z must be at least 1");
}

void RewardConfig::validate(double max_abs_base) const {
    if (long_cost < 0.0 || fast_cost < 0.0) throw ConfigError("reward: intervention costs must be nonnegative");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("reward: gamma must lie in [0,1)");
    if (!(penalty > max_abs_base)) {
        std::ostringstream os;
        os << "reward: penalty " << penalty << " must exceed the largest per-step |R| = " << max_abs_base;
        throw ConfigError(os.str());
    }
}

int constraint_count(const InterventionAction& action) { return action.is_noop() ? 0 : 1; }

double constraint_admissible_range(double x, double target, double cumulative) {
    return x - 0.5 * target - cumulative;
}

int constraint_zone_violation(double x, double target, double tolerance) {
    return std::abs(x - target) - tolerance > 0.0 ? 1 : 0;
}

double base_reward(double x, const InterventionAction& action, double target, const RewardConfig& cfg) {
    const double d = x - target;
    double r = -d * d;
    if (action.kind == ActionKind::Long) r -= cfg.long_cost;
    if (action.kind == ActionKind::Fast) r -= cfg.fast_cost * action.magnitude * action.magnitude;
    return r;
}

double reshape_reward(double base, std::span<const double> budgets, double penalty) {
    for (double b : budgets)
        if (b < 0.0) return -penalty;
    return base;
}

double max_abs_base_reward(double x_lo, double x_hi, double target, double max_fast, const RewardConfig& cfg) {
    const double d = std::max(std::abs(x_lo - target), std::abs(x_hi - target));
    return d * d + std::max(cfg.long_cost, cfg.fast_cost * max_fast * max_fast);
}

bool BudgetVector::satisfied() const {
    return std::all_of(values.begin(), values.end(), [](double b) { return b >= 0.0; });
}

double BudgetVector::get(BudgetComponent c) const {
    for (std::size_t i = 0; i < components.size(); ++i)
        if (components[i] == c) return values[i];
    return std::numeric_limits<double>::infinity();
}

std::vector<BudgetComponent> all_budget_components() {
    return {BudgetComponent::InterventionCount, BudgetComponent::LongAdmissible,
            BudgetComponent::FastAdmissible, BudgetComponent::ZoneViolation};
}

BudgetTracker::BudgetTracker(ConstraintSet constraints, std::vector<BudgetComponent> components)
    : constraints_(constraints), components_(std::move(components)) {}

void BudgetTracker::reset() {
    interventions_ = 0.0;
    long_pulses_ = 0.0;
    fast_total_ = 0.0;
    violations_ = 0.0;
}

void BudgetTracker::record(const SystemState& state, const InterventionAction& action) {
    interventions_ += constraint_count(action);
    if (action.kind == ActionKind::Long) long_pulses_ += 1.0;
    if (action.kind == ActionKind::Fast) fast_total_ += action.magnitude;
    violations_ += constraint_zone_violation(state.x, constraints_.target, constraints_.tolerance);
}

BudgetTracker BudgetTracker::updated(const SystemState& state, const InterventionAction& action) const {
    BudgetTracker next = *this;
    next.record(state, action);
    return next;
}

BudgetVector BudgetTracker::evaluate(double x) const {
    BudgetVector b;
    b.components = components_;
    b.values.reserve(components_.size());
    for (auto c : components_) {
        switch (c) {
        case BudgetComponent::InterventionCount:
            b.values.push_back(constraints_.intervention_budget - interventions_);
            break;
        case BudgetComponent::LongAdmissible:
            b.values.push_back(constraint_admissible_range(x, constraints_.target, long_pulses_));
            break;
        case BudgetComponent::FastAdmissible:
            b.values.push_back(constraint_admissible_range(x, constraints_.target, fast_total_));
            break;
        case BudgetComponent::ZoneViolation:
            b.values.push_back(constraints_.violation_budget - violations_);
            break;
        }
    }
    return b;
}

} // namespace zonerl
