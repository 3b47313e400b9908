#include "zonerl/agent.hpp"

#include "zonerl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace zonerl {

namespace {

constexpr std::size_t kGlucoseBins = 28; // <40, 26 bins of 10 mg/dL, >=300
constexpr std::size_t kTrendBins = 3;
constexpr std::size_t kLongBins = 2;
constexpr std::size_t kSinceFastBins = 3;
constexpr std::size_t kCarbBins = 4;

class AgentFastPolicy final : public FastPolicy {
public:
    explicit AgentFastPolicy(std::shared_ptr<TabularGlucoseAgent> agent) : agent_(std::move(agent)) {}
    double propose(const Observation& obs, RngStream& rng) override {
        const auto& hs = agent_->options().fast_set;
        if (agent_->training() && rng.uniform() < agent_->epsilon()) return hs[rng.index(hs.size())];
        return hs[agent_->best_fast(agent_->encode(obs)) - 2];
    }

private:
    std::shared_ptr<TabularGlucoseAgent> agent_;
};

class AgentLongPolicy final : public LongPolicy {
public:
    explicit AgentLongPolicy(std::shared_ptr<TabularGlucoseAgent> agent) : agent_(std::move(agent)) {}
    int propose(const Observation& obs, RngStream&) override {
        return agent_->options().allow_long && !obs.long_active ? 1 : 0;
    }

private:
    std::shared_ptr<TabularGlucoseAgent> agent_;
};

class AgentSwitcher final : public Switcher {
public:
    explicit AgentSwitcher(std::shared_ptr<TabularGlucoseAgent> agent) : agent_(std::move(agent)) {}
    SwitchDecision decide(const Observation& obs, const Proposal& proposal, RngStream& rng) override {
        const bool long_ok = proposal.long_flag == 1 && !obs.long_active;
        if (agent_->training() && rng.uniform() < agent_->epsilon()) {
            const std::size_t k = rng.index(long_ok ? 3 : 2);
            if (k == 0) return SwitchDecision::NoOp;
            if (k == 1 && long_ok) return SwitchDecision::ActivateLong;
            return SwitchDecision::ActivateFast;
        }
        return agent_->best_switch(agent_->encode(obs), long_ok);
    }

private:
    std::shared_ptr<TabularGlucoseAgent> agent_;
};

} // namespace

TabularGlucoseAgent::TabularGlucoseAgent(AgentOptions opts) : opts_(std::move(opts)) {
    if (opts_.fast_set.empty()) throw ConfigError("agent: empty fast set");
    if (!std::is_sorted(opts_.slack_edges.begin(), opts_.slack_edges.end()))
        throw ConfigError("agent: slack_edges must be ascending");
    q_.assign(num_states() * num_actions(), 0.0);
    visits_.assign(q_.size(), 0);
    epsilon_ = opts_.eps_start;
}

std::size_t TabularGlucoseAgent::num_states() const {
    return kGlucoseBins * kTrendBins * kLongBins * kSinceFastBins * (opts_.use_carbs ? kCarbBins : 1) *
           (opts_.use_budgets ? opts_.slack_edges.size() + 2 : 1);
}

std::size_t TabularGlucoseAgent::encode(const Observation& obs) const {
    const double g = obs.glucose;
    std::size_t gb = 0;
    if (g >= 300.0) {
        gb = kGlucoseBins - 1;
    } else if (g >= 40.0) {
        gb = 1 + static_cast<std::size_t>((g - 40.0) / 10.0);
    }
    std::size_t tr = 1;
    if (obs.trend < -opts_.trend_band) tr = 0;
    if (obs.trend > opts_.trend_band) tr = 2;
    const std::size_t la = obs.long_active ? 1 : 0;
    std::size_t sf = 2;
    if (obs.steps_since_fast >= 0 && obs.steps_since_fast <= 6) sf = 0;
    else if (obs.steps_since_fast > 6 && obs.steps_since_fast <= 24) sf = 1;

    std::size_t s = ((gb * kTrendBins + tr) * kLongBins + la) * kSinceFastBins + sf;
    if (opts_.use_carbs) {
        const double c = obs.carbs.value_or(0.0);
        std::size_t cb = 3;
        if (c < 5.0) cb = 0;
        else if (c < 20.0) cb = 1;
        else if (c < 40.0) cb = 2;
        s = s * kCarbBins + cb;
    }
    if (opts_.use_budgets) {
        // bucket 0: count exhausted; then one bucket per slack edge, plus the open top bucket
        auto slot = [&](int i) { return i >= 0 && static_cast<std::size_t>(i) < obs.budgets.size(); };
        const double slack = slot(opts_.fast_range_slot) ? obs.budgets[opts_.fast_range_slot] : 1e9;
        std::size_t bb = 1;
        if (slot(opts_.count_slot) && obs.budgets[opts_.count_slot] <= 0.0) {
            bb = 0;
        } else {
            while (bb - 1 < opts_.slack_edges.size() && slack >= opts_.slack_edges[bb - 1]) ++bb;
        }
        s = s * (opts_.slack_edges.size() + 2) + bb;
    }
    return s;
}

std::size_t TabularGlucoseAgent::action_column(const InterventionAction& a) const {
    if (a.kind == ActionKind::NoOp) return 0;
    if (a.kind == ActionKind::Long) return 1;
    for (std::size_t i = 0; i < opts_.fast_set.size(); ++i)
        if (opts_.fast_set[i] == a.magnitude) return 2 + i;
    throw DomainError("agent: fast magnitude outside the agent's set");
}

PolicyBundle TabularGlucoseAgent::bundle() {
    auto self = shared_from_this();
    PolicyBundle b;
    b.fast = std::make_shared<AgentFastPolicy>(self);
    b.long_policy = std::make_shared<AgentLongPolicy>(self);
    b.switcher = std::make_shared<AgentSwitcher>(self);
    b.fast_set = opts_.fast_set;
    return b;
}

void TabularGlucoseAgent::set_exploration(int episode, int episodes) {
    const double frac = episodes > 1 ? static_cast<double>(episode) / (episodes - 1) : 1.0;
    epsilon_ = opts_.eps_start + (opts_.eps_floor - opts_.eps_start) * std::clamp(frac, 0.0, 1.0);
}

double TabularGlucoseAgent::score(std::size_t s, std::size_t a) const {
    // all rewards are negative, so a rarely tried column near its initial 0 would win every comparison
    return visits_[s * num_actions() + a] >= opts_.min_visits ? q(s, a) : -std::numeric_limits<double>::infinity();
}

std::size_t TabularGlucoseAgent::best_fast(std::size_t s) const {
    std::size_t best = 2;
    for (std::size_t a = 3; a < num_actions(); ++a)
        if (score(s, a) > score(s, best)) best = a;
    return best;
}

SwitchDecision TabularGlucoseAgent::best_switch(std::size_t s, bool long_available) const {
    SwitchDecision d = SwitchDecision::NoOp;
    double best = q(s, 0);
    if (long_available && opts_.allow_long && score(s, 1) > best) {
        d = SwitchDecision::ActivateLong;
        best = score(s, 1);
    }
    if (score(s, best_fast(s)) > best) d = SwitchDecision::ActivateFast;
    return d;
}

double TabularGlucoseAgent::value(std::size_t s, bool long_active) const {
    // while a long effect runs the loop can only continue it
    if (long_active) return q(s, 0);
    double v = std::max(q(s, 0), score(s, best_fast(s)));
    if (opts_.allow_long) v = std::max(v, score(s, 1));
    return v;
}

void TabularGlucoseAgent::learn(const TransitionRecord& rec, bool use_shaped_reward) {
    const std::size_t s = encode(rec.observation);
    const std::size_t a = action_column(rec.executed);
    const std::size_t next = encode(rec.next_observation);
    const double r = (use_shaped_reward ? rec.reshaped_reward : rec.base_reward) * opts_.reward_scale;
    const double target = r + opts_.gamma * value(next, rec.next_observation.long_active);
    const std::size_t k = s * num_actions() + a;
    const double step = std::max(opts_.step_floor, 1.0 / std::pow(1.0 + visits_[k], opts_.step_omega));
    ++visits_[k];
    q_[k] += step * (target - q_[k]);
}

} // namespace zonerl
