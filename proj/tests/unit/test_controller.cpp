#include "toy_env.hpp"

#include "zonerl/controller.hpp"
#include "zonerl/errors.hpp"
#include "zonerl/glucose_env.hpp"
#include "zonerl/tabular.hpp"

#include <doctest.h>

#include <memory>

using namespace zonerl;
using zonerl::testing::ToyEnv;

namespace {

PolicyBundle make_bundle(double fast, int long_flag, SwitchDecision d) {
    PolicyBundle b;
    b.fast = std::make_shared<ConstantFastPolicy>(fast);
    b.long_policy = std::make_shared<ConstantLongPolicy>(long_flag);
    b.switcher = std::make_shared<ConstantSwitcher>(d);
    b.fast_set = {fast};
    return b;
}

} // namespace

TEST_CASE("propose: deterministic policies") {
    auto b = make_bundle(2.0, 1, SwitchDecision::NoOp);
    RngStream rng(1);
    const auto p = propose(b, Observation{}, rng);
    CHECK(p.fast == 2.0);
    CHECK(p.long_flag == 1);

    auto quiet = make_bundle(2.0, 0, SwitchDecision::NoOp);
    CHECK(propose(quiet, Observation{}, rng).long_flag == 0);
}

TEST_CASE("propose: uniform fast policy frequency") {
    PolicyBundle b;
    b.fast = std::make_shared<UniformFastPolicy>(std::vector<double>{1.0, 2.0});
    b.long_policy = std::make_shared<ConstantLongPolicy>(0);
    RngStream rng(123);
    int ones = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) ones += propose(b, Observation{}, rng).fast == 1.0 ? 1 : 0;
    CHECK(std::abs(ones / static_cast<double>(n) - 0.5) < 0.02);
}

TEST_CASE("shield: comfortable budgets are accepted") {
    ToyEnv env(ToyEnv::Params{});
    RngStream rng(1);
    CHECK(shield({true, 3, 1}, env, InterventionAction::fast(1.0), rng) == ShieldVerdict::Accept);
    CHECK(shield({false, 3, 1}, env, InterventionAction::fast(1.0), rng) == ShieldVerdict::Skipped);
}

TEST_CASE("shield: exhausted count budget rejects a fast impulse") {
    ToyEnv::Params p;
    p.constraints.intervention_budget = 1.0;
    ToyEnv env(p);
    env.step(InterventionAction::fast(1.0));
    REQUIRE(env.budgets().get(BudgetComponent::InterventionCount) == 0.0);
    RngStream rng(1);
    CHECK(shield({true, 1, 1}, env, InterventionAction::fast(1.0), rng) == ShieldVerdict::Reject);
    CHECK(shield({true, 1, 1}, env, InterventionAction::noop(), rng) == ShieldVerdict::Accept);
}

TEST_CASE("shield: slack that turns negative two steps ahead") {
    ToyEnv::Params p;
    p.x0 = 80.0;
    p.components = {BudgetComponent::LongAdmissible};
    ToyEnv env(p);
    RngStream rng(1);
    // after activation X = 70 (slack 6.5), then 60 (slack -3.5)
    CHECK(shield({true, 1, 1}, env, InterventionAction::long_activation(), rng) == ShieldVerdict::Accept);
    CHECK(shield({true, 3, 1}, env, InterventionAction::long_activation(), rng) == ShieldVerdict::Reject);
}

TEST_CASE("shield: invalid configuration") {
    ToyEnv env(ToyEnv::Params{});
    RngStream rng(1);
    CHECK_THROWS_AS(shield({true, 0, 1}, env, InterventionAction::noop(), rng), ConfigError);
    CHECK_THROWS_AS(shield({true, 1, 0}, env, InterventionAction::noop(), rng), ConfigError);
}

TEST_CASE("control step: an active long effect is continued") {
    ToyEnv env(ToyEnv::Params{});
    env.start_long_effect(0.4, 5);
    auto b = make_bundle(1.0, 1, SwitchDecision::ActivateLong);
    auto rng = ControlRng::from_seed(1);
    const auto rec = control_step(env, b, {true, 3, 1}, rng);
    CHECK(rec.executed_kind == ExecutedKind::ContinueLong);
    CHECK(rec.executed.is_noop());
    CHECK(rec.long_effect == 0.4);
    CHECK(rec.decision != SwitchDecision::ActivateLong);
}

TEST_CASE("control step: long activation") {
    ToyEnv env(ToyEnv::Params{});
    auto b = make_bundle(1.0, 1, SwitchDecision::ActivateLong);
    auto rng = ControlRng::from_seed(1);
    const auto rec = control_step(env, b, {true, 3, 1}, rng);
    CHECK(rec.verdict == ShieldVerdict::Accept);
    CHECK(rec.executed_kind == ExecutedKind::Long);
    CHECK(rec.long_effect == 1.0);
    CHECK(env.state().spectra_level == 1.0);
    CHECK(rec.base_reward == -1.0); // X on target, cost alpha only
}

TEST_CASE("control step: switch Long without a long proposal falls through to NoOp") {
    ToyEnv env(ToyEnv::Params{});
    auto b = make_bundle(1.0, 0, SwitchDecision::ActivateLong);
    auto rng = ControlRng::from_seed(1);
    CHECK(control_step(env, b, {true, 3, 1}, rng).executed_kind == ExecutedKind::NoOp);
}

TEST_CASE("control step: a rejected impulse becomes NoOp") {
    ToyEnv::Params p;
    p.constraints.intervention_budget = 1.0;
    p.x0 = 130.0;
    ToyEnv env(p);
    env.step(InterventionAction::fast(1.0));
    auto b = make_bundle(1.0, 0, SwitchDecision::ActivateFast);
    auto rng = ControlRng::from_seed(1);
    const double x = env.state().x;
    const auto rec = control_step(env, b, {true, 2, 1}, rng);
    CHECK(rec.verdict == ShieldVerdict::Reject);
    CHECK(rec.executed.is_noop());
    CHECK(rec.base_reward == base_reward(x, InterventionAction::noop(), 125.0, RewardConfig{1.0, 0.1, 1.0e6, 0.97}));
}

TEST_CASE("run episode: horizon and constant X") {
    ToyEnv env(ToyEnv::Params{});
    auto b = make_bundle(1.0, 0, SwitchDecision::NoOp);
    CHECK(run_episode(env, b, {true, 3, 1}, 1, 5).size() == 1);
    const auto recs = run_episode(env, b, {true, 3, 1}, 50, 5);
    CHECK(recs.size() == 50);
    for (const auto& r : recs) CHECK(r.info.x_before_reset == 125.0);
    CHECK_THROWS_AS(run_episode(env, b, {true, 3, 1}, 0, 5), DomainError);
}

TEST_CASE("run episode: count budget exhaustion") {
    for (std::int64_t T : {2, 3, 10, 40}) {
        ToyEnv::Params p;
        p.constraints.intervention_budget = 2.0;
        p.components = {BudgetComponent::InterventionCount};
        p.fast_drop = 0.0;
        ToyEnv env(p);
        auto b = make_bundle(1.0, 0, SwitchDecision::ActivateFast);
        const auto recs = run_episode(env, b, {true, 1, 1}, T, 9);
        int executed = 0;
        for (const auto& r : recs) executed += r.executed_kind == ExecutedKind::Fast ? 1 : 0;
        CHECK(executed == 2);
    }
}

TEST_CASE("run episode: observer sees every record and budgets reset per episode") {
    ToyEnv::Params p;
    p.constraints.intervention_budget = 2.0;
    ToyEnv env(p);
    auto b = make_bundle(1.0, 0, SwitchDecision::ActivateFast);
    int seen = 0;
    run_episode(env, b, {true, 1, 1}, 5, 1, [&](const TransitionRecord&) { ++seen; });
    CHECK(seen == 5);
    const auto again = run_episode(env, b, {true, 1, 1}, 5, 2);
    CHECK(again.front().budgets[0] == 2.0);
}

TEST_CASE("degenerate bundle") {
    auto base = make_bundle(2.0, 1, SwitchDecision::ActivateLong);
    base.fast_set = {1.0, 2.0};
    auto d = degenerate_to_case_a(base);
    RngStream rng(1);
    CHECK(d.switcher->decide(Observation{}, Proposal{}, rng) == SwitchDecision::ActivateFast);
    CHECK(d.long_policy->propose(Observation{}, rng) == 0);
    CHECK(d.fast_set == std::vector<double>{0.0, 1.0, 2.0});
    CHECK(degenerate_to_case_a(d).fast_set == d.fast_set);
}

TEST_CASE("degenerate bundle on the dual loop reproduces the fast-only loop") {
    GlucoseEnvConfig cfg;
    cfg.fast_set = {0.0, 1.0, 2.0, 4.0};
    cfg.days = 1;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        PolicyBundle base;
        base.fast = std::make_shared<UniformFastPolicy>(cfg.fast_set);
        base.long_policy = std::make_shared<ConstantLongPolicy>(1);
        base.switcher = std::make_shared<RandomSwitcher>(0.5, 0.2);
        base.fast_set = cfg.fast_set;
        auto d = degenerate_to_case_a(base);

        GlucoseEnv env_b(cfg), env_a(cfg);
        const auto rb = run_episode(env_b, d, {true, 6, 2}, cfg.horizon(), seed);
        UniformFastPolicy fast(cfg.fast_set);
        const auto ra = run_episode_case_a(env_a, fast, {true, 6, 2}, cfg.horizon(), seed);
        REQUIRE(rb.size() == ra.size());
        bool identical = true;
        for (std::size_t i = 0; i < ra.size(); ++i)
            identical = identical && ra[i].info.x_before_reset == rb[i].info.x_before_reset &&
                        ra[i].executed == rb[i].executed;
        CHECK(identical);
        CHECK(env_b.interventions().long_history.empty());
    }
}

TEST_CASE("shield soundness on the discrete fixtures without noise") {
    for (auto profile : {FixtureProfile::Tiny, FixtureProfile::Small}) {
        auto spec = fixture_spec(profile);
        spec.sigma = 0.0;
        auto mdp = std::make_shared<const DiscreteTargetMDP>(build_fixture_mdp(spec));
        PolicyBundle b;
        b.fast = std::make_shared<UniformFastPolicy>(spec.fast_set);
        b.long_policy = std::make_shared<ConstantLongPolicy>(1);
        b.switcher = std::make_shared<RandomSwitcher>(0.4, 0.5);
        b.fast_set = spec.fast_set;
        int negative = 0;
        int bad_reject = 0;
        for (std::size_t y = 0; y < mdp->num_states(); ++y) {
            if (mdp->state(y).budgets[0] < 0.0) continue;
            DiscreteMDPEnv env(mdp, y, 12);
            const auto recs = run_episode(env, b, {true, 2, 1}, 12, y + 1);
            for (const auto& r : recs) {
                for (double v : r.next_budgets) negative += v < 0.0 ? 1 : 0;
                if (r.verdict == ShieldVerdict::Reject && !r.executed.is_noop()) ++bad_reject;
            }
        }
        CHECK(negative == 0);
        CHECK(bad_reject == 0);
    }
}

TEST_CASE("transition log rows carry a schema version") {
    ToyEnv env(ToyEnv::Params{});
    auto b = make_bundle(1.0, 0, SwitchDecision::ActivateFast);
    const auto recs = run_episode(env, b, {true, 1, 1}, 2, 1);
    const auto j = to_json(recs.front());
    CHECK(j.at("v") == kTransitionLogVersion);
    CHECK(j.at("executed") == "fast");
    CHECK(j.at("shield") == "accept");
}
