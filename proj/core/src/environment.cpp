#include "zonerl/environment.hpp"

#include "zonerl/errors.hpp"

#include <cmath>

namespace zonerl {

bool Environment::action_allowed(const InterventionAction& action) const {
    if (action.kind == ActionKind::Long) return state().spectra_level <= 0.0;
    return true;
}

std::vector<LookaheadPoint> Environment::lookahead(const InterventionAction& first, int horizon, int samples,
                                                   RngStream& rng) const {
    if (horizon < 1 || samples < 1) throw ShieldError("lookahead: horizon and samples must be >= 1");
    std::vector<LookaheadPoint> mean(static_cast<std::size_t>(horizon));
    for (int j = 0; j < samples; ++j) {
        auto sim = clone();
        if (!sim) throw ShieldError("lookahead: environment clone failed");
        sim->reseed(rng.next_seed());
        prepare_lookahead_model(*sim);
        for (int k = 0; k < horizon; ++k) {
            StepResult r = sim->step(k == 0 ? first : InterventionAction::noop());
            const double x = r.info.x_before_reset;
            if (!std::isfinite(x)) throw ShieldError("lookahead: model produced a non-finite state");
            auto& pt = mean[static_cast<std::size_t>(k)];
            pt.x += x / samples;
            if (pt.budgets.values.empty()) {
                pt.budgets.components = r.budgets.components;
                pt.budgets.values.assign(r.budgets.size(), 0.0);
            }
            for (std::size_t i = 0; i < r.budgets.size(); ++i) pt.budgets.values[i] += r.budgets[i] / samples;
        }
    }
    const auto& cfg = reward_config();
    for (auto& pt : mean) {
        const double base = base_reward(pt.x, InterventionAction::noop(), target(), cfg);
        pt.reshaped_reward = reshape_reward(base, pt.budgets.values, cfg.penalty);
    }
    return mean;
}

} // namespace zonerl
