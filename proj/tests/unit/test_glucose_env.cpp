#include "zonerl/constraints.hpp"
#include "zonerl/errors.hpp"
#include "zonerl/glucose_env.hpp"
#include "zonerl/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace zonerl;

namespace {

GlucoseEnvConfig quiet_config() {
    GlucoseEnvConfig cfg;
    cfg.dynamics.sigma_x = 0.0;
    cfg.sensor_sigma = 0.0;
    cfg.scenario.events.clear();
    cfg.days = 1;
    return cfg;
}

std::vector<double> rollout(GlucoseEnv& env, std::uint64_t seed, std::int64_t fast_at = -1, double h = 2.0) {
    env.reset(seed);
    std::vector<double> xs;
    for (std::int64_t t = 0; t < env.config().horizon(); ++t) {
        const auto a = t == fast_at ? InterventionAction::fast(h) : InterventionAction::noop();
        xs.push_back(env.step(a).info.x_before_reset);
    }
    return xs;
}

} // namespace

TEST_CASE("scenario: CMP has exactly two meals") {
    const auto s = scenario_template(ScenarioTag::CMP);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        RngStream rng(seed);
        const auto day = build_scenario(s, rng);
        CHECK(day.size() == 2);
        for (const auto& m : day) CHECK(m.grams >= 0.0);
    }
}

TEST_CASE("scenario: AGVP main meals occur with probability 0.95") {
    const auto s = scenario_template(ScenarioTag::AGVP);
    const std::int64_t mains[] = {84, 144, 216};
    long hits = 0;
    const int n = 10000;
    for (int seed = 0; seed < n; ++seed) {
        RngStream rng(static_cast<std::uint64_t>(seed));
        for (const auto& m : build_scenario(s, rng))
            if (std::find(std::begin(mains), std::end(mains), m.step) != std::end(mains)) ++hits;
    }
    CHECK(std::abs(hits / (3.0 * n) - 0.95) < 0.01);
}

TEST_CASE("scenario: PHC dinner is centred at 100 g") {
    const auto s = scenario_template(ScenarioTag::PHC);
    double sum = 0.0;
    int count = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        RngStream rng(seed);
        for (const auto& m : build_scenario(s, rng)) {
            if (m.step == 216) {
                sum += m.grams;
                ++count;
            }
        }
    }
    REQUIRE(count > 9000);
    CHECK(std::abs(sum / count - 100.0) < 0.5);
}

TEST_CASE("scenario json round trip") {
    const auto s = scenario_template(ScenarioTag::AGVP);
    const auto back = meal_scenario_from_json(to_json(s));
    REQUIRE(back.events.size() == s.events.size());
    CHECK(back.tag == ScenarioTag::AGVP);
    CHECK(back.events[3].carbs_hi == 30.0);
    CHECK(scenario_from_string("PHC") == ScenarioTag::PHC);
    CHECK_THROWS(scenario_from_string("XYZ"));
}

TEST_CASE("drift examples") {
    GlucoseDynamics d;
    CHECK(glucose_drift(d, 0.0, 0.0, 0.0, d.x_basal) == 0.0);
    GlucoseDynamics g{0.03, 0.0, 0.15, 0.0, 0.0, 140.0, 0.0};
    CHECK(glucose_drift(g, 50.0, 0.0, 0.0, 200.0) == doctest::Approx(1.5).epsilon(1e-15));
    GlucoseDynamics l{0.0, 0.0, 0.15, 0.8, 0.01, 140.0, 0.0};
    CHECK(glucose_drift(l, 0.0, 0.0, 1.0, 140.0) == doctest::Approx(-0.8).epsilon(1e-15));
}

TEST_CASE("NoOp at equilibrium keeps X") {
    GlucoseEnv env(quiet_config());
    const auto xs = rollout(env, 1);
    for (double x : xs) CHECK(x == 140.0);
}

TEST_CASE("fast activity decays geometrically") {
    GlucoseEnv env(quiet_config());
    env.reset(1);
    env.step(InterventionAction::fast(2.0));
    CHECK(env.fast_active() == doctest::Approx(2.0 * 0.85).epsilon(1e-13));
    for (int k = 2; k <= 21; ++k) {
        env.step(InterventionAction::noop());
        CHECK(env.fast_active() == doctest::Approx(2.0 * std::pow(0.85, k)).epsilon(1e-12));
    }
    CHECK(env.fast_active() == doctest::Approx(0.85 * 0.07751906216902867).epsilon(1e-12));
}

TEST_CASE("a meal raises X, which then relaxes toward basal") {
    auto cfg = quiet_config();
    cfg.scenario.events = {{0.0, 0.0, 50.0, 0.0, 1.0}};
    GlucoseEnv env(cfg);
    const auto xs = rollout(env, 1);
    const auto peak = static_cast<std::size_t>(std::max_element(xs.begin(), xs.end()) - xs.begin());
    CHECK(peak > 0);
    CHECK(xs[peak] > 150.0);
    for (std::size_t i = 1; i <= peak; ++i) CHECK(xs[i] >= xs[i - 1]);
    for (std::size_t i = peak + 1; i < xs.size(); ++i) CHECK(xs[i] <= xs[i - 1]);
    CHECK(xs.back() - 140.0 < 0.25 * (xs[peak] - 140.0));
}

TEST_CASE("insulin never raises X") {
    auto cfg = quiet_config();
    cfg.scenario = scenario_template(ScenarioTag::AGVP);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        for (std::int64_t when : {0, 50, 150}) {
            GlucoseEnv a(cfg), b(cfg);
            const auto base = rollout(a, seed);
            const auto dosed = rollout(b, seed, when, 4.0);
            for (std::size_t i = 0; i < base.size(); ++i) CHECK(dosed[i] <= base[i]);
        }
    }
}

TEST_CASE("pools stay nonnegative") {
    GlucoseEnvConfig cfg;
    cfg.scenario = scenario_template(ScenarioTag::PHC);
    GlucoseEnv env(cfg);
    RngStream rng(4);
    env.reset(4);
    for (std::int64_t t = 0; t < cfg.horizon(); ++t) {
        InterventionAction a;
        const double u = rng.uniform();
        if (u < 0.02 && !env.observe().long_active) a = InterventionAction::long_activation();
        else if (u < 0.1) a = InterventionAction::fast(cfg.fast_set[rng.index(cfg.fast_set.size())]);
        const auto r = env.step(a);
        CHECK(env.gut_carbs() >= 0.0);
        CHECK(env.fast_active() >= 0.0);
        CHECK(std::isfinite(r.info.x_before_reset));
        CHECK(env.state().x >= cfg.x_min);
        CHECK(env.state().x <= cfg.x_max);
    }
}

TEST_CASE("reset: deterministic and budgets restored") {
    GlucoseEnvConfig cfg;
    GlucoseEnv env(cfg);
    const auto a = env.reset(7);
    env.step(InterventionAction::fast(4.0));
    env.step(InterventionAction::noop());
    const auto b = env.reset(7);
    CHECK(a.glucose == b.glucose);
    CHECK(a.budgets == b.budgets);
    CHECK(env.state().x == cfg.initial_glucose);
    const auto bv = env.budgets();
    CHECK(bv.get(BudgetComponent::InterventionCount) == cfg.constraints.intervention_budget);
    CHECK(bv.get(BudgetComponent::ZoneViolation) == cfg.constraints.violation_budget);
    CHECK(bv.get(BudgetComponent::FastAdmissible) == cfg.initial_glucose - 62.5);
}

TEST_CASE("severe hypo triggers a reset and is counted") {
    auto cfg = quiet_config();
    GlucoseEnv env(cfg);
    env.reset(1);
    env.set_glucose(41.0);
    env.set_pools(0.0, 100.0);
    const double before = env.budgets().get(BudgetComponent::ZoneViolation);
    const auto r = env.step(InterventionAction::noop());
    CHECK(r.info.severe_hypo);
    CHECK(r.info.x_before_reset < 40.0);
    CHECK(env.severe_events() == 1);
    CHECK(env.state().x == cfg.initial_glucose);
    CHECK(env.fast_active() == 0.0);
    // the step itself started out of zone, and the sub-40 excursion is one more
    CHECK(env.budgets().get(BudgetComponent::ZoneViolation) == before - 2.0);
    const std::vector<double> xs{41.0, r.info.x_before_reset, 140.0};
    CHECK(aime(xs, 288) == doctest::Approx(288.0 / 3.0));
}

TEST_CASE("carbohydrate-blind observations carry no meal information") {
    GlucoseEnvConfig cfg;
    cfg.carbs_visible = false;
    GlucoseEnv a(cfg), b(cfg);
    a.reset(5, 100);
    b.reset(5, 200);
    std::int64_t first_meal = cfg.horizon();
    for (const auto* e : {&a, &b})
        for (const auto& m : e->meals().front()) first_meal = std::min(first_meal, m.step);
    REQUIRE(first_meal > 0);
    CHECK_FALSE(a.observe().carbs.has_value());
    for (std::int64_t t = 0; t <= first_meal; ++t) {
        const auto oa = a.step(InterventionAction::noop()).observation;
        const auto ob = b.step(InterventionAction::noop()).observation;
        CHECK_FALSE(oa.carbs.has_value());
        if (t < first_meal) {
            CHECK(oa.glucose == ob.glucose);
            CHECK(oa.trend == ob.trend);
            CHECK(oa.budgets == ob.budgets);
        }
    }
}

TEST_CASE("carbohydrate-visible observations report carbs on board") {
    auto cfg = quiet_config();
    cfg.scenario.events = {{0.0, 0.0, 50.0, 0.0, 1.0}};
    GlucoseEnv env(cfg);
    env.reset(1);
    const auto o = env.step(InterventionAction::noop()).observation;
    REQUIRE(o.carbs.has_value());
    CHECK(*o.carbs == doctest::Approx(50.0 * 0.97));
}

TEST_CASE("invalid actions") {
    GlucoseEnv env(GlucoseEnvConfig{});
    CHECK_THROWS_AS(env.step(InterventionAction::fast(3.0)), DomainError);
    env.step(InterventionAction::long_activation());
    CHECK(env.observe().long_active);
    CHECK_FALSE(env.action_allowed(InterventionAction::long_activation()));
    CHECK_THROWS_AS(env.step(InterventionAction::long_activation()), DomainError);
}

TEST_CASE("zone metric and constraint agree on every step") {
    GlucoseEnvConfig cfg;
    cfg.scenario = scenario_template(ScenarioTag::PHC);
    GlucoseEnv env(cfg);
    env.reset(3);
    for (std::int64_t t = 0; t < cfg.horizon(); ++t) {
        const auto r = env.step(InterventionAction::noop());
        const double x = r.info.x_before_reset;
        const std::vector<double> one{x};
        CHECK((constraint_zone_violation(x, 125.0, 55.0) == 0) == (time_in_range(one) == 100.0));
    }
}

TEST_CASE("no-insulin AGVP baseline sits in the calibration window") {
    GlucoseEnvConfig cfg;
    std::vector<double> tirs;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        GlucoseEnv env(cfg);
        tirs.push_back(time_in_range(rollout(env, seed)));
    }
    const double mean = mean_std(tirs).mean;
    CHECK(mean >= 25.0);
    CHECK(mean <= 55.0);
}

TEST_CASE("clones are independent of the original") {
    GlucoseEnvConfig cfg;
    GlucoseEnv env(cfg);
    env.reset(2);
    auto sim = env.clone();
    sim->step(InterventionAction::fast(4.0));
    sim->step(InterventionAction::noop());
    CHECK(env.state().t == 0);
    CHECK(env.fast_active() == 0.0);
}
