#include "zonerl/process.hpp"

#include "zonerl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace zonerl {

double effective_long_magnitude(const SystemState& state) {
    if (state.long_pulse > 0.0) return 1.0;
    return state.spectra_level;
}

double step_underlying(UnderlyingProcess& proc, const SystemState& state, RngStream& rng) {
    if (!(proc.dt > 0.0)) throw DomainError("step_underlying: dt must be positive");
    const double u = proc.drift ? proc.drift(state) : 0.0;
    if (!std::isfinite(u)) {
        std::ostringstream os;
        os << "non-finite drift at t=" << state.t << " X=" << state.x << " E=" << state.spectra_level
           << " ZF=" << state.z_fast << " ZL=" << state.z_long;
        throw DynamicsError(os.str());
    }
    double next = proc.x + u * proc.dt;
    if (proc.sigma > 0.0) next += proc.sigma * std::sqrt(proc.dt) * rng.normal();
    if (!std::isfinite(next)) throw DynamicsError("step_underlying: non-finite X");
    proc.x = next;
    return next;
}

double step_fast_process(InterventionProcess& proc, std::optional<double> impulse, std::int64_t t,
                         RngStream& rng) {
    if (impulse) {
        if (!(*impulse >= 0.0) || !std::isfinite(*impulse))
            throw DomainError("step_fast_process: impulse must be a finite nonnegative value");
        if (!proc.fast_history.empty() && proc.fast_history.back().t >= t)
            throw DomainError("step_fast_process: impulse times must be strictly increasing");
        proc.z_fast += *impulse;
        proc.fast_history.push_back({t, *impulse});
    }
    if (proc.sigma_fast > 0.0) proc.z_fast += proc.sigma_fast * std::sqrt(proc.dt) * rng.normal();
    return proc.z_fast;
}

double step_long_process(InterventionProcess& proc, bool activated, std::int64_t t, RngStream& rng) {
    if (activated) {
        if (!proc.long_history.empty() && proc.long_history.back() >= t)
            throw DomainError("step_long_process: activation times must be strictly increasing");
        proc.z_long += 1.0;
        proc.long_history.push_back(t);
    }
    if (proc.sigma_long > 0.0) proc.z_long += proc.sigma_long * std::sqrt(proc.dt) * rng.normal();
    return proc.z_long;
}

SpectraProcess::SpectraProcess(std::vector<double> interior_levels, double stay_probability, double ratio)
    : stay_(stay_probability), ratio_(ratio) {
    if (!(stay_ > 0.0 && stay_ < 1.0)) throw DomainError("spectra: stay probability must lie in (0,1)");
    if (!(ratio_ > 0.0 && ratio_ < 1.0)) throw DomainError("spectra: ratio must lie in (0,1)");
    levels_.reserve(interior_levels.size() + 2);
    levels_.push_back(0.0);
    for (double e : interior_levels) {
        if (e == 0.0) continue; // tolerate callers that list 0 explicitly
        if (!(e > levels_.back() && e < 1.0))
            throw DomainError("spectra: interior levels must be strictly increasing within (0,1)");
        levels_.push_back(e);
    }
    levels_.push_back(1.0);
}

SpectraProcess SpectraProcess::standard() { return SpectraProcess({0.2, 0.4, 0.6, 0.8}, 0.6, 0.5); }

std::size_t SpectraProcess::index_of(double level) const {
    auto it = std::find(levels_.begin(), levels_.end(), level);
    if (it == levels_.end()) {
        std::ostringstream os;
        os << "spectra: " << level << " is not a valid level";
        throw DomainError(os.str());
    }
    return static_cast<std::size_t>(it - levels_.begin());
}

void SpectraProcess::set_level(double level) { index_ = index_of(level); }

void SpectraProcess::set_level_index(std::size_t index) {
    if (index >= levels_.size()) throw DomainError("spectra: level index out of range");
    index_ = index;
}

std::vector<double> SpectraProcess::pmf_by_index(std::size_t from) const {
    if (from >= levels_.size()) throw DomainError("spectra: level index out of range");
    std::vector<double> p(levels_.size(), 0.0);
    if (from == 0) {
        p[0] = 1.0;
        return p;
    }
    p[from] = stay_;
    double norm = 0.0;
    double w = 1.0;
    for (std::size_t d = 1; d <= from; ++d, w *= ratio_) norm += w;
    w = 1.0;
    for (std::size_t d = 1; d <= from; ++d, w *= ratio_) p[from - d] = (1.0 - stay_) * w / norm;
    return p;
}

std::vector<LevelMass> SpectraProcess::pmf(double from_level) const {
    const auto p = pmf_by_index(index_of(from_level));
    std::vector<LevelMass> out;
    for (std::size_t i = levels_.size(); i-- > 0;)
        if (p[i] > 0.0) out.push_back({levels_[i], p[i]});
    return out;
}

double SpectraProcess::step(bool activated, RngStream& rng) {
    if (activated) {
        index_ = levels_.size() - 1;
        return level();
    }
    if (index_ == 0) return 0.0;
    const auto p = pmf_by_index(index_);
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t next = 0;
    // walk from the current level downward so the stay branch is consumed first
    for (std::size_t i = index_ + 1; i-- > 0;) {
        acc += p[i];
        if (u < acc) {
            next = i;
            break;
        }
    }
    index_ = next;
    return level();
}

} // namespace zonerl
