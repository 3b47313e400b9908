#include "zonerl/controller.hpp"

#include "zonerl/errors.hpp"

#include <algorithm>
#include <cmath>

namespace zonerl {

std::string to_string(SwitchDecision d) {
    switch (d) {
    case SwitchDecision::NoOp: return "noop";
    case SwitchDecision::ActivateLong: return "long";
    case SwitchDecision::ActivateFast: return "fast";
    }
    return "?";
}

std::string to_string(ShieldVerdict v) {
    switch (v) {
    case ShieldVerdict::Accept: return "accept";
    case ShieldVerdict::Reject: return "reject";
    case ShieldVerdict::Skipped: return "skipped";
    }
    return "?";
}

std::string to_string(ExecutedKind k) {
    switch (k) {
    case ExecutedKind::NoOp: return "noop";
    case ExecutedKind::ContinueLong: return "continue_long";
    case ExecutedKind::Fast: return "fast";
    case ExecutedKind::Long: return "long";
    }
    return "?";
}

UniformFastPolicy::UniformFastPolicy(std::vector<double> support) : support_(std::move(support)) {
    if (support_.empty()) throw DomainError("uniform fast policy: empty support");
}

double UniformFastPolicy::propose(const Observation&, RngStream& rng) { return support_[rng.index(support_.size())]; }

SwitchDecision RandomSwitcher::decide(const Observation&, const Proposal&, RngStream& rng) {
    const double u = rng.uniform();
    if (u < p_long_) return SwitchDecision::ActivateLong;
    if (u < p_long_ + p_fast_) return SwitchDecision::ActivateFast;
    return SwitchDecision::NoOp;
}

ScheduleSwitcher::ScheduleSwitcher(std::vector<double> long_minutes, std::vector<double> fast_minutes,
                                   int steps_per_day, double minutes_per_step)
    : steps_per_day_(steps_per_day) {
    for (double m : long_minutes) long_steps_.push_back(static_cast<std::int64_t>(m / minutes_per_step));
    for (double m : fast_minutes) fast_steps_.push_back(static_cast<std::int64_t>(m / minutes_per_step));
}

SwitchDecision ScheduleSwitcher::decide(const Observation& obs, const Proposal&, RngStream&) {
    const std::int64_t tod = obs.step % steps_per_day_;
    if (std::find(long_steps_.begin(), long_steps_.end(), tod) != long_steps_.end())
        return SwitchDecision::ActivateLong;
    if (std::find(fast_steps_.begin(), fast_steps_.end(), tod) != fast_steps_.end())
        return SwitchDecision::ActivateFast;
    return SwitchDecision::NoOp;
}

Proposal propose(PolicyBundle& bundle, const Observation& obs, RngStream& rng) {
    Proposal p;
    p.fast = bundle.fast ? bundle.fast->propose(obs, rng) : 0.0;
    p.long_flag = bundle.long_policy ? bundle.long_policy->propose(obs, rng) : 0;
    return p;
}

PolicyBundle degenerate_to_case_a(const PolicyBundle& bundle) {
    PolicyBundle out;
    out.fast = bundle.fast;
    out.long_policy = std::make_shared<ConstantLongPolicy>(0);
    out.switcher = std::make_shared<ConstantSwitcher>(SwitchDecision::ActivateFast);
    out.fast_set = bundle.fast_set;
    if (std::find(out.fast_set.begin(), out.fast_set.end(), 0.0) == out.fast_set.end())
        out.fast_set.insert(out.fast_set.begin(), 0.0);
    return out;
}

void ShieldConfig::validate() const {
    if (horizon < 1) throw ConfigError("shield: horizon K must be >= 1");
    if (samples < 1) throw ConfigError("shield: rollout count N must be >= 1");
}

ShieldVerdict shield(const ShieldConfig& cfg, const Environment& env, const InterventionAction& action,
                     RngStream& rng) {
    if (!cfg.enabled) return ShieldVerdict::Skipped;
    cfg.validate();
    const auto points = env.lookahead(action, cfg.horizon, cfg.samples, rng);
    if (points.size() != static_cast<std::size_t>(cfg.horizon)) throw ShieldError("shield: short look-ahead");
    const double penalty = env.reward_config().penalty;
    for (const auto& pt : points)
        if (pt.reshaped_reward == -penalty) return ShieldVerdict::Reject;
    return ShieldVerdict::Accept;
}

ControlRng ControlRng::from_seed(std::uint64_t seed) {
    RngStream root(seed);
    return {root.fork("policy"), root.fork("shield")};
}

nlohmann::json to_json(const TransitionRecord& r) {
    nlohmann::json j;
    j["v"] = kTransitionLogVersion;
    j["t"] = r.step;
    j["x"] = r.state.x;
    j["x_next"] = r.info.x_before_reset;
    j["sensed"] = r.observation.glucose;
    j["spectra"] = r.state.spectra_level;
    j["budgets"] = r.budgets;
    j["next_budgets"] = r.next_budgets;
    j["proposal"] = {{"fast", r.proposal.fast}, {"long", r.proposal.long_flag}};
    j["decision"] = to_string(r.decision);
    j["shield"] = to_string(r.verdict);
    j["executed"] = to_string(r.executed_kind);
    j["eta_fast"] = r.executed.kind == ActionKind::Fast ? r.executed.magnitude : 0.0;
    j["eta_long"] = r.executed.kind == ActionKind::Long ? 1 : 0;
    j["long_effect"] = r.long_effect;
    j["reward"] = {{"base", r.base_reward}, {"reshaped", r.reshaped_reward}, {"switcher", r.switcher_reward}};
    j["meal_g"] = r.info.meal_grams;
    j["severe_hypo"] = r.info.severe_hypo;
    if (r.observation.carbs) j["carbs"] = *r.observation.carbs;
    return j;
}

namespace {

TransitionRecord begin_record(const Environment& env) {
    TransitionRecord rec;
    rec.observation = env.observe();
    rec.state = env.state();
    rec.step = rec.state.t;
    rec.budgets = env.budgets().values;
    return rec;
}

void finish_record(TransitionRecord& rec, Environment& env) {
    const auto result = env.step(rec.executed);
    rec.long_effect = rec.executed.kind == ActionKind::Long ? 1.0 : rec.state.spectra_level;
    rec.base_reward = result.base_reward;
    rec.reshaped_reward = result.reshaped_reward;
    rec.switcher_reward = result.reshaped_reward;
    rec.next_observation = result.observation;
    rec.next_state = env.state();
    rec.next_budgets = result.budgets.values;
    rec.info = result.info;
    rec.done = result.done;
}

} // namespace

TransitionRecord control_step(Environment& env, PolicyBundle& bundle, const ShieldConfig& shield_cfg,
                              ControlRng& rng) {
    TransitionRecord rec = begin_record(env);
    rec.proposal = propose(bundle, rec.observation, rng.policy);
    rec.decision = bundle.switcher ? bundle.switcher->decide(rec.observation, rec.proposal, rng.policy)
                                   : SwitchDecision::NoOp;

    const bool long_active = rec.state.spectra_level > 0.0;
    if (long_active && rec.decision == SwitchDecision::ActivateLong) rec.decision = SwitchDecision::NoOp;

    bool chosen = false;
    if (long_active) {
        rec.verdict = shield(shield_cfg, env, InterventionAction::noop(), rng.shield);
        if (rec.verdict != ShieldVerdict::Reject) {
            rec.executed = InterventionAction::noop();
            rec.executed_kind = ExecutedKind::ContinueLong;
            chosen = true;
        }
    }
    if (!chosen && rec.decision == SwitchDecision::ActivateLong && rec.proposal.long_flag == 1) {
        const auto candidate = InterventionAction::long_activation();
        if (env.action_allowed(candidate)) {
            rec.verdict = shield(shield_cfg, env, candidate, rng.shield);
            if (rec.verdict != ShieldVerdict::Reject) {
                rec.executed = candidate;
                rec.executed_kind = ExecutedKind::Long;
                chosen = true;
            }
        }
    } else if (!chosen && rec.decision == SwitchDecision::ActivateFast) {
        const auto candidate = InterventionAction::fast(rec.proposal.fast);
        rec.verdict = shield(shield_cfg, env, candidate, rng.shield);
        if (rec.verdict != ShieldVerdict::Reject) {
            rec.executed = candidate;
            rec.executed_kind = ExecutedKind::Fast;
            chosen = true;
        }
    }
    if (!chosen) {
        rec.executed = InterventionAction::noop();
        rec.executed_kind = long_active && rec.verdict != ShieldVerdict::Reject ? ExecutedKind::ContinueLong
                                                                               : ExecutedKind::NoOp;
    }
    finish_record(rec, env);
    return rec;
}

std::vector<TransitionRecord> run_episode(Environment& env, PolicyBundle& bundle, const ShieldConfig& shield_cfg,
                                          std::int64_t horizon, std::uint64_t episode_seed,
                                          const RecordObserver& observer) {
    if (horizon < 1) throw DomainError("run_episode: horizon must be >= 1");
    env.reset(episode_seed);
    auto rng = ControlRng::from_seed(episode_seed);
    std::vector<TransitionRecord> records;
    records.reserve(static_cast<std::size_t>(horizon));
    for (std::int64_t t = 0; t < horizon; ++t) {
        records.push_back(control_step(env, bundle, shield_cfg, rng));
        if (observer) observer(records.back());
        if (records.back().done) break;
    }
    return records;
}

std::vector<TransitionRecord> run_episode_case_a(Environment& env, FastPolicy& fast, const ShieldConfig& shield_cfg,
                                                 std::int64_t horizon, std::uint64_t episode_seed) {
    if (horizon < 1) throw DomainError("run_episode_case_a: horizon must be >= 1");
    env.reset(episode_seed);
    auto rng = ControlRng::from_seed(episode_seed);
    std::vector<TransitionRecord> records;
    for (std::int64_t t = 0; t < horizon; ++t) {
        TransitionRecord rec = begin_record(env);
        rec.proposal.fast = fast.propose(rec.observation, rng.policy);
        rec.decision = SwitchDecision::ActivateFast;
        const auto candidate = InterventionAction::fast(rec.proposal.fast);
        rec.verdict = shield(shield_cfg, env, candidate, rng.shield);
        if (rec.verdict != ShieldVerdict::Reject) {
            rec.executed = candidate;
            rec.executed_kind = ExecutedKind::Fast;
        }
        finish_record(rec, env);
        records.push_back(std::move(rec));
        if (records.back().done) break;
    }
    return records;
}

} // namespace zonerl
