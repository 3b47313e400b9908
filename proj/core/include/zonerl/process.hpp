#pragma once

#include "zonerl/rng.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace zonerl {

/// Markov state of the dual-intervention system at step t.
///
/// `long_pulse` is the activation pulse: 1 only on the step a long-acting
/// intervention is switched on. Between activation and exhaustion the long
/// effect is carried by `spectra_level`.
struct SystemState {
    double long_pulse = 0.0;
    double z_long = 0.0;
    double z_fast = 0.0;
    double x = 0.0;
    double spectra_level = 0.0;
    double fast_impulse = 0.0; // impulse applied at t, 0 if none
    std::int64_t t = 0;
};

/// 1 on an activation step, the spectra level while the effect decays, 0 once exhausted.
double effective_long_magnitude(const SystemState& state);

/// The controlled process X with Euler-Maruyama increments.
struct UnderlyingProcess {
    double x = 0.0;
    std::function<double(const SystemState&)> drift; // U, per unit time
    double sigma = 0.0;
    double dt = 1.0;
};

/// X <- X + U(state) dt + sigma sqrt(dt) xi. Throws DynamicsError on a non-finite drift.
double step_underlying(UnderlyingProcess& proc, const SystemState& state, RngStream& rng);

struct FastImpulse {
    std::int64_t t;
    double magnitude;
};

/// Fast (impulse) and long (switching) accumulators with their activation histories.
struct InterventionProcess {
    double z_fast = 0.0;
    double z_long = 0.0;
    double sigma_fast = 0.0;
    double sigma_long = 0.0;
    double dt = 1.0;
    std::vector<FastImpulse> fast_history;
    std::vector<std::int64_t> long_history;
};

/// Adds the impulse (if any) plus accumulator noise. Negative impulses are a DomainError,
/// as is a non-increasing impulse time.
double step_fast_process(InterventionProcess& proc, std::optional<double> impulse, std::int64_t t,
                         RngStream& rng);

/// Adds the activation pulse (1 at activation) plus accumulator noise.
double step_long_process(InterventionProcess& proc, bool activated, std::int64_t t, RngStream& rng);

struct LevelMass {
    double level;
    double probability;
};

/// Finite-level decay process scaling the long-acting effect.
///
/// Levels are {0, e_1, ..., e_m, 1}. One decay step from level index i stays with
/// probability q and otherwise drops d >= 1 positions with weight r^(d-1),
/// renormalised over the available lower levels. Level 0 is absorbing absent
/// activation; activation forces level 1.
class SpectraProcess {
public:
    SpectraProcess(std::vector<double> interior_levels, double stay_probability, double ratio);

    /// Default set {0, 0.2, 0.4, 0.6, 0.8} plus 1, q = 0.6, r = 0.5.
    static SpectraProcess standard();

    double level() const { return levels_[index_]; }
    std::size_t level_index() const { return index_; }
    void set_level(double level);
    void set_level_index(std::size_t index);

    bool active() const { return index_ > 0; }

    /// Full ordered level list, 0 first and 1 last.
    const std::vector<double>& levels() const { return levels_; }
    std::size_t level_count() const { return levels_.size(); }
    double stay_probability() const { return stay_; }
    double ratio() const { return ratio_; }

    std::size_t index_of(double level) const; // DomainError when not a level

    /// Exact one-step decay distribution from `from_level`, highest level first.
    std::vector<LevelMass> pmf(double from_level) const;
    std::vector<double> pmf_by_index(std::size_t from_index) const;

    /// Advances one step: level 1 when activated, otherwise a draw from the decay law.
    double step(bool activated, RngStream& rng);

private:
    std::vector<double> levels_;
    double stay_;
    double ratio_;
    std::size_t index_ = 0;
};

} // namespace zonerl
