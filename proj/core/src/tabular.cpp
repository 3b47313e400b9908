#include "zonerl/tabular.hpp"

#include "zonerl/errors.hpp"
#include "zonerl/process.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>

namespace zonerl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool is_long(const InterventionAction& a) { return a.kind == ActionKind::Long; }
bool is_fast(const InterventionAction& a) { return a.kind == ActionKind::Fast; }

std::string kind_name(ActionKind k) {
    switch (k) {
    case ActionKind::NoOp: return "noop";
    case ActionKind::Fast: return "fast";
    case ActionKind::Long: return "long";
    }
    return "?";
}

ActionKind kind_from_name(const std::string& s) {
    if (s == "noop") return ActionKind::NoOp;
    if (s == "fast") return ActionKind::Fast;
    if (s == "long") return ActionKind::Long;
    throw ModelError("mdp: unknown action kind '" + s + "'");
}

BudgetComponent component_from_name(const std::string& s) {
    for (auto c : all_budget_components())
        if (to_string(c) == s) return c;
    throw ModelError("mdp: unknown budget component '" + s + "'");
}

} // namespace

DiscreteTargetMDP::DiscreteTargetMDP(std::vector<DiscreteState> states, std::vector<InterventionAction> actions,
                                     std::vector<std::vector<std::vector<Transition>>> transitions,
                                     std::vector<std::vector<double>> reward, std::vector<std::vector<double>> base,
                                     std::vector<std::vector<char>> available, RewardConfig reward_cfg, double target,
                                     std::vector<BudgetComponent> budget_components)
    : states_(std::move(states)),
      actions_(std::move(actions)),
      transitions_(std::move(transitions)),
      reward_(std::move(reward)),
      base_(std::move(base)),
      available_(std::move(available)),
      cfg_(reward_cfg),
      target_(target),
      components_(std::move(budget_components)) {
    validate();
}

std::optional<std::size_t> DiscreteTargetMDP::action_index(const InterventionAction& action) const {
    for (std::size_t a = 0; a < actions_.size(); ++a)
        if (actions_[a] == action) return a;
    return std::nullopt;
}

double DiscreteTargetMDP::branch_value(std::size_t y, std::size_t a, std::span<const double> v) const {
    double cont = 0.0;
    for (const auto& tr : transitions_[y][a]) cont += tr.prob * v[tr.to];
    return reward_[y][a] + cfg_.gamma * cont;
}

void DiscreteTargetMDP::validate() const {
    const std::size_t n = states_.size();
    if (n == 0) throw ModelError("mdp: no states");
    if (n > kMaxDiscreteStates)
        throw ModelError("mdp: " + std::to_string(n) + " states exceeds the oracle bound of " +
                         std::to_string(kMaxDiscreteStates));
    if (actions_.empty() || !actions_[0].is_noop()) throw ModelError("mdp: action 0 must be NoOp");
    if (!(cfg_.gamma >= 0.0 && cfg_.gamma < 1.0)) throw ModelError("mdp: gamma must lie in [0,1)");
    if (!(cfg_.penalty > 0.0)) throw ModelError("mdp: penalty must be positive");
    const std::size_t m = actions_.size();
    if (transitions_.size() != n || reward_.size() != n || base_.size() != n || available_.size() != n)
        throw ModelError("mdp: table sizes do not match the state count");
    for (std::size_t y = 0; y < n; ++y) {
        if (transitions_[y].size() != m || reward_[y].size() != m || base_[y].size() != m ||
            available_[y].size() != m)
            throw ModelError("mdp: table sizes do not match the action count at state " + std::to_string(y));
        if (!available_[y][0]) throw ModelError("mdp: NoOp must be available everywhere");
        if (states_[y].budgets.size() != components_.size())
            throw ModelError("mdp: budget vector size mismatch at state " + std::to_string(y));
        for (std::size_t a = 0; a < m; ++a) {
            double sum = 0.0;
            for (const auto& tr : transitions_[y][a]) {
                if (tr.to >= n) throw ModelError("mdp: successor index out of range");
                if (!(tr.prob >= 0.0)) throw ModelError("mdp: negative transition probability");
                sum += tr.prob;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw ModelError("mdp: row (" + std::to_string(y) + ", " + std::to_string(a) + ") sums to " +
                                 std::to_string(sum));
            if (!std::isfinite(reward_[y][a]) || !std::isfinite(base_[y][a]))
                throw ModelError("mdp: non-finite reward");
        }
    }
}

FixtureProfile fixture_from_string(const std::string& s) {
    if (s == "tiny") return FixtureProfile::Tiny;
    if (s == "small") return FixtureProfile::Small;
    throw ConfigError("unknown fixture profile '" + s + "'");
}

FixtureSpec fixture_spec(FixtureProfile profile) {
    FixtureSpec s;
    if (profile == FixtureProfile::Tiny) return s;
    // X in {40, 60, ..., 220}: level i is 40 + 20 i, so M = 130 and l = 50 become 4.5 and 2.5
    s.x_levels = 10;
    s.target = 4.5;
    s.drift = 0.5;
    s.k_long = 1.5;
    s.k_fast = 1.0;
    s.sigma = 0.5;
    s.spectra_interior = {0.25, 0.5, 0.75};
    s.intervention_budget = 3;
    s.fast_set = {1.0, 2.0};
    s.reward = RewardConfig{1.0, 0.5, 100.0, 0.9};
    return s;
}

std::vector<Transition> quantise_gaussian(double mean, double sigma, int levels) {
    std::map<int, double> mass;
    auto put = [&](double pos, double p) {
        if (p <= 0.0) return;
        const int i = std::clamp(static_cast<int>(pos), 0, levels - 1);
        mass[i] += p;
    };
    bool placed = false;
    if (sigma > 0.0) {
        const double c = std::round(mean);
        const double d = mean - c;
        const double s2 = sigma * sigma;
        const double up = 0.5 * (s2 + d * d + d);
        const double down = 0.5 * (s2 + d * d - d);
        const double mid = 1.0 - s2 - d * d;
        if (up >= 0.0 && down >= 0.0 && mid >= 0.0) {
            put(c - 1.0, down);
            put(c, mid);
            put(c + 1.0, up);
            placed = true;
        }
    }
    if (!placed) {
        const double lo = std::floor(mean);
        const double w = mean - lo;
        put(lo, 1.0 - w);
        put(lo + 1.0, w);
    }
    std::vector<Transition> out;
    for (const auto& [i, p] : mass) out.push_back({static_cast<std::size_t>(i), p});
    return out;
}

DiscreteTargetMDP build_fixture_mdp(const FixtureSpec& spec) {
    if (spec.x_levels < 1 || spec.intervention_budget < 1) throw ModelError("fixture: invalid sizes");
    SpectraProcess spectra(spec.spectra_interior, spec.spectra_stay, spec.spectra_ratio);
    const std::size_t nx = static_cast<std::size_t>(spec.x_levels);
    const std::size_t ns = spectra.level_count();
    const std::size_t nb = static_cast<std::size_t>(spec.intervention_budget) + 2;
    auto index = [&](std::size_t xi, std::size_t si, std::size_t slot) { return (xi * ns + si) * nb + slot; };

    std::vector<InterventionAction> actions{InterventionAction::noop(), InterventionAction::long_activation()};
    for (double h : spec.fast_set) actions.push_back(InterventionAction::fast(h));
    const std::size_t m = actions.size();
    const std::size_t n = nx * ns * nb;

    std::vector<DiscreteState> states(n);
    std::vector<std::vector<std::vector<Transition>>> P(n, std::vector<std::vector<Transition>>(m));
    std::vector<std::vector<double>> R(n, std::vector<double>(m));
    std::vector<std::vector<double>> B(n, std::vector<double>(m));
    std::vector<std::vector<char>> avail(n, std::vector<char>(m, 1));

    for (std::size_t xi = 0; xi < nx; ++xi) {
        for (std::size_t si = 0; si < ns; ++si) {
            for (std::size_t slot = 0; slot < nb; ++slot) {
                const std::size_t y = index(xi, si, slot);
                const double budget = static_cast<double>(slot) - 1.0;
                states[y] = {static_cast<double>(xi), si, spectra.levels()[si], {budget}};
                for (std::size_t a = 0; a < m; ++a) {
                    const auto& act = actions[a];
                    const bool masked = is_long(act) && si > 0;
                    avail[y][a] = masked ? 0 : 1;
                    const auto& effective = masked ? actions[0] : act;
                    B[y][a] = base_reward(static_cast<double>(xi), act, spec.target, spec.reward);
                    R[y][a] = budget < 0.0 ? -spec.reward.penalty : B[y][a];
                    if (budget < 0.0) {
                        P[y][a] = {{y, 1.0}};
                        continue;
                    }
                    const bool activate = is_long(effective);
                    const double eff = activate ? 1.0 : spectra.levels()[si];
                    const double h = is_fast(effective) ? effective.magnitude : 0.0;
                    const double mean = static_cast<double>(xi) + spec.drift - spec.k_long * eff - spec.k_fast * h;
                    const auto xs = quantise_gaussian(mean, spec.sigma, spec.x_levels);
                    const auto es = spectra.pmf_by_index(activate ? ns - 1 : si);
                    const std::size_t next_slot = slot - static_cast<std::size_t>(constraint_count(effective));
                    std::map<std::size_t, double> row;
                    for (const auto& xt : xs)
                        for (std::size_t sj = 0; sj < ns; ++sj)
                            if (es[sj] > 0.0) row[index(xt.to, sj, next_slot)] += xt.prob * es[sj];
                    for (const auto& [to, p] : row) P[y][a].push_back({to, p});
                }
            }
        }
    }
    return DiscreteTargetMDP(std::move(states), std::move(actions), std::move(P), std::move(R), std::move(B),
                             std::move(avail), spec.reward, spec.target);
}

DiscreteTargetMDP build_fixture_mdp(FixtureProfile profile) { return build_fixture_mdp(fixture_spec(profile)); }

namespace {

double operator_over(const DiscreteTargetMDP& mdp, std::span<const double> v, std::size_t y, bool (*pred)(const InterventionAction&),
                     OperatorMode mode, std::span<const double> policy) {
    double best = kNegInf;
    double avg = 0.0;
    double weight = 0.0;
    std::size_t k = 0;
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
        if (!pred(mdp.action(a))) continue;
        const std::size_t slot = k++;
        if (!mdp.available(y, a)) continue;
        const double val = mdp.branch_value(y, a, v);
        best = std::max(best, val);
        if (mode == OperatorMode::FixedPolicy) {
            const double w = slot < policy.size() ? policy[slot] : 0.0;
            avg += w * val;
            weight += w;
        }
    }
    if (mode == OperatorMode::Greedy || best == kNegInf) return best;
    if (weight <= 0.0) throw DomainError("intervention operator: policy puts no mass on available actions");
    return avg / weight;
}

} // namespace

double intervention_operator_long(const DiscreteTargetMDP& mdp, std::span<const double> v, std::size_t y,
                                  OperatorMode mode, std::span<const double> policy) {
    return operator_over(mdp, v, y, is_long, mode, policy);
}

double intervention_operator_fast(const DiscreteTargetMDP& mdp, std::span<const double> v, std::size_t y,
                                  OperatorMode mode, std::span<const double> policy) {
    return operator_over(mdp, v, y, is_fast, mode, policy);
}

std::vector<double> bellman_backup(const DiscreteTargetMDP& mdp, std::span<const double> v) {
    if (v.size() != mdp.num_states()) throw DomainError("bellman_backup: value vector size mismatch");
    std::vector<double> out(mdp.num_states());
    for (std::size_t y = 0; y < mdp.num_states(); ++y) {
        const double cont = mdp.branch_value(y, 0, v);
        out[y] = std::max(std::max(intervention_operator_long(mdp, v, y), cont), intervention_operator_fast(mdp, v, y));
    }
    return out;
}

ValueIterationResult value_iteration(const DiscreteTargetMDP& mdp, double tol, int max_iterations) {
    if (!(tol > 0.0)) throw DomainError("value_iteration: tolerance must be positive");
    const double gamma = mdp.gamma();
    const double stop = gamma > 0.0 ? tol * (1.0 - gamma) / gamma : std::numeric_limits<double>::infinity();
    ValueIterationResult res;
    res.v.assign(mdp.num_states(), 0.0);
    double residual = std::numeric_limits<double>::infinity();
    while (true) {
        if (res.iterations >= max_iterations)
            throw ConvergenceError("value_iteration: no convergence after " + std::to_string(max_iterations) +
                                       " sweeps (residual " + std::to_string(residual) + ")",
                                   residual);
        auto next = bellman_backup(mdp, res.v);
        residual = 0.0;
        for (std::size_t y = 0; y < next.size(); ++y) residual = std::max(residual, std::abs(next[y] - res.v[y]));
        res.v = std::move(next);
        res.residuals.push_back(residual);
        ++res.iterations;
        if (residual < stop) break;
    }
    res.q.assign(mdp.num_states(), std::vector<double>(mdp.num_actions()));
    for (std::size_t y = 0; y < mdp.num_states(); ++y)
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) res.q[y][a] = mdp.branch_value(y, a, res.v);
    return res;
}

QTable::QTable(std::size_t states, std::size_t actions, double init)
    : states_(states), actions_(actions), values_(states * actions, init), visits_(states * actions, 0) {}

double QTable::long_branch(const DiscreteTargetMDP& mdp, std::size_t y) const {
    double best = kNegInf;
    for (std::size_t a = 0; a < actions_; ++a)
        if (is_long(mdp.action(a)) && mdp.available(y, a)) best = std::max(best, at(y, a));
    return best;
}

double QTable::fast_branch(const DiscreteTargetMDP& mdp, std::size_t y) const {
    double best = kNegInf;
    for (std::size_t a = 0; a < actions_; ++a)
        if (is_fast(mdp.action(a)) && mdp.available(y, a)) best = std::max(best, at(y, a));
    return best;
}

double QTable::value(const DiscreteTargetMDP& mdp, std::size_t y) const {
    return std::max(std::max(long_branch(mdp, y), at(y, 0)), fast_branch(mdp, y));
}

double QTable::max_abs_diff(const DiscreteTargetMDP& mdp, const std::vector<std::vector<double>>& other) const {
    double worst = 0.0;
    for (std::size_t y = 0; y < states_; ++y)
        for (std::size_t a = 0; a < actions_; ++a)
            if (mdp.available(y, a)) worst = std::max(worst, std::abs(at(y, a) - other[y][a]));
    return worst;
}

void QTable::write_csv(std::ostream& os) const {
    os << "state,action,value,visits\n";
    os << std::setprecision(17);
    for (std::size_t y = 0; y < states_; ++y)
        for (std::size_t a = 0; a < actions_; ++a) os << y << ',' << a << ',' << at(y, a) << ',' << visits(y, a) << '\n';
}

double LearningSchedule::step_size(std::uint64_t visits) const {
    return std::min(1.0, c / std::pow(static_cast<double>(visits) + c0, omega));
}

double LearningSchedule::epsilon(std::uint64_t t) const {
    return std::max(eps_floor, 1.0 / (1.0 + static_cast<double>(t) / eps_scale));
}

void LearningSchedule::validate() const {
    if (!(c > 0.0) || !(c0 > 0.0)) throw ConfigError("learning schedule: c and c0 must be positive");
    // sum alpha = inf and sum alpha^2 < inf
    if (!(omega > 0.5 && omega <= 1.0)) throw ConfigError("learning schedule: omega must lie in (0.5, 1]");
    if (eps_floor < 0.0 || eps_floor > 1.0) throw ConfigError("learning schedule: eps_floor outside [0,1]");
    if (episode_length < 1) throw ConfigError("learning schedule: episode_length must be >= 1");
}

void q_update(QTable& q, const SampledTransition& tr, const DiscreteTargetMDP& mdp, double step) {
    const double target = tr.reward + mdp.gamma() * q.value(mdp, tr.next);
    q.at(tr.y, tr.a) += step * (target - q.at(tr.y, tr.a));
}

std::size_t sample_next(const DiscreteTargetMDP& mdp, std::size_t y, std::size_t a, RngStream& rng) {
    const auto& row = mdp.row(y, a);
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& tr : row) {
        acc += tr.prob;
        if (u < acc) return tr.to;
    }
    return row.back().to;
}

std::size_t greedy_action(const QTable& q, const DiscreteTargetMDP& mdp, std::size_t y, double tie_tol) {
    const double v = q.value(mdp, y);
    for (std::size_t a = 0; a < mdp.num_actions(); ++a)
        if (is_long(mdp.action(a)) && mdp.available(y, a) && q.at(y, a) >= v - tie_tol) return a;
    for (std::size_t a = 0; a < mdp.num_actions(); ++a)
        if (is_fast(mdp.action(a)) && mdp.available(y, a) && q.at(y, a) >= v - tie_tol) return a;
    return 0;
}

SwitchDecision greedy_switch(const QTable& q, const DiscreteTargetMDP& mdp, std::size_t y, double tie_tol) {
    const auto& act = mdp.action(greedy_action(q, mdp, y, tie_tol));
    if (is_long(act)) return SwitchDecision::ActivateLong;
    if (is_fast(act)) return SwitchDecision::ActivateFast;
    return SwitchDecision::NoOp;
}

QLearningResult q_learning(const DiscreteTargetMDP& mdp, const LearningSchedule& schedule, std::uint64_t seed,
                           const std::vector<std::vector<double>>* oracle) {
    schedule.validate();
    QLearningResult res;
    res.q = QTable(mdp.num_states(), mdp.num_actions());
    RngStream rng(seed);
    std::vector<std::size_t> allowed;
    std::size_t y = rng.index(mdp.num_states());
    int in_episode = 0;
    for (std::uint64_t t = 0; t < schedule.max_updates; ++t) {
        if (in_episode == schedule.episode_length) {
            y = rng.index(mdp.num_states());
            in_episode = 0;
        }
        std::size_t a;
        if (rng.uniform() < schedule.epsilon(t)) {
            allowed.clear();
            for (std::size_t b = 0; b < mdp.num_actions(); ++b)
                if (mdp.available(y, b)) allowed.push_back(b);
            a = allowed[rng.index(allowed.size())];
        } else {
            a = greedy_action(res.q, mdp, y);
        }
        const std::size_t next = sample_next(mdp, y, a, rng);
        const double step = schedule.step_size(res.q.visits(y, a));
        res.q.visit(y, a);
        q_update(res.q, {y, a, mdp.reward(y, a), next}, mdp, step);
        y = next;
        ++in_episode;
        ++res.updates;
        if (oracle && res.updates % 10000 == 0) res.error_trace.push_back(res.q.max_abs_diff(mdp, *oracle));
    }
    if (oracle) res.final_error = res.q.max_abs_diff(mdp, *oracle);
    return res;
}

SwitchingPolicy extract_switching_policy(const DiscreteTargetMDP& mdp, const ValueIterationResult& vi,
                                         double tie_tol) {
    const auto tv = bellman_backup(mdp, vi.v);
    SwitchingPolicy pol;
    const std::size_t n = mdp.num_states();
    pol.decision.resize(n);
    pol.m_long.resize(n);
    pol.m_fast.resize(n);
    pol.action.resize(n, 0);
    for (std::size_t y = 0; y < n; ++y) {
        pol.m_long[y] = intervention_operator_long(mdp, vi.v, y);
        pol.m_fast[y] = intervention_operator_fast(mdp, vi.v, y);
        if (pol.m_long[y] >= tv[y] - tie_tol) {
            pol.decision[y] = SwitchDecision::ActivateLong;
        } else if (pol.m_fast[y] >= tv[y] - tie_tol) {
            pol.decision[y] = SwitchDecision::ActivateFast;
        } else {
            pol.decision[y] = SwitchDecision::NoOp;
        }
        const double target = pol.decision[y] == SwitchDecision::ActivateLong ? pol.m_long[y] : pol.m_fast[y];
        auto pred = pol.decision[y] == SwitchDecision::ActivateLong ? is_long : is_fast;
        if (pol.decision[y] == SwitchDecision::NoOp) continue;
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
            if (pred(mdp.action(a)) && mdp.available(y, a) && mdp.branch_value(y, a, vi.v) >= target - tie_tol) {
                pol.action[y] = a;
                break;
            }
        }
    }
    return pol;
}

HittingTimes first_hitting_times(const DiscreteTargetMDP& mdp, const SwitchingPolicy& policy, std::size_t start,
                                 std::int64_t horizon, RngStream& rng) {
    if (start >= mdp.num_states()) throw DomainError("first_hitting_times: start state out of range");
    HittingTimes ht;
    std::size_t y = start;
    for (std::int64_t t = 0; t < horizon && !(ht.long_time && ht.fast_time); ++t) {
        if (policy.decision[y] == SwitchDecision::ActivateLong && !ht.long_time) ht.long_time = t;
        if (policy.decision[y] == SwitchDecision::ActivateFast && !ht.fast_time) ht.fast_time = t;
        y = sample_next(mdp, y, policy.action[y], rng);
    }
    return ht;
}

nlohmann::json mdp_to_json(const DiscreteTargetMDP& mdp) {
    nlohmann::json j;
    j["format"] = "zonerl-mdp";
    j["version"] = 1;
    const auto& cfg = mdp.reward_config();
    j["reward_config"] = {{"long_cost", cfg.long_cost},
                          {"fast_cost", cfg.fast_cost},
                          {"penalty", cfg.penalty},
                          {"gamma", cfg.gamma}};
    j["target"] = mdp.target();
    nlohmann::json comps = nlohmann::json::array();
    for (auto c : mdp.budget_components()) comps.push_back(to_string(c));
    j["budget_components"] = comps;
    nlohmann::json actions = nlohmann::json::array();
    for (const auto& a : mdp.actions()) actions.push_back({{"kind", kind_name(a.kind)}, {"magnitude", a.magnitude}});
    j["actions"] = actions;
    nlohmann::json states = nlohmann::json::array();
    nlohmann::json available = nlohmann::json::array();
    nlohmann::json base = nlohmann::json::array();
    nlohmann::json transitions = nlohmann::json::array();
    for (std::size_t y = 0; y < mdp.num_states(); ++y) {
        const auto& s = mdp.state(y);
        states.push_back(
            {{"x", s.x}, {"spectra_index", s.spectra_index}, {"spectra_level", s.spectra_level}, {"budgets", s.budgets}});
        nlohmann::json av = nlohmann::json::array();
        nlohmann::json bs = nlohmann::json::array();
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
            av.push_back(mdp.available(y, a) ? 1 : 0);
            bs.push_back(mdp.base(y, a));
            for (const auto& tr : mdp.row(y, a))
                transitions.push_back(
                    {{"from", y}, {"action", a}, {"to", tr.to}, {"prob", tr.prob}, {"reward", mdp.reward(y, a)}});
        }
        available.push_back(av);
        base.push_back(bs);
    }
    j["states"] = states;
    j["available"] = available;
    j["base"] = base;
    j["transitions"] = transitions;
    return j;
}

DiscreteTargetMDP mdp_from_json(const nlohmann::json& j) {
    try {
        if (j.value("format", std::string{}) != "zonerl-mdp") throw ModelError("mdp: not a zonerl-mdp document");
        const auto& rc = j.at("reward_config");
        RewardConfig cfg{rc.at("long_cost").get<double>(), rc.at("fast_cost").get<double>(),
                         rc.at("penalty").get<double>(), rc.at("gamma").get<double>()};
        std::vector<BudgetComponent> comps;
        for (const auto& c : j.at("budget_components")) comps.push_back(component_from_name(c.get<std::string>()));
        std::vector<InterventionAction> actions;
        for (const auto& a : j.at("actions"))
            actions.push_back({kind_from_name(a.at("kind").get<std::string>()), a.at("magnitude").get<double>()});
        std::vector<DiscreteState> states;
        for (const auto& s : j.at("states"))
            states.push_back({s.at("x").get<double>(), s.at("spectra_index").get<std::size_t>(),
                              s.at("spectra_level").get<double>(), s.at("budgets").get<std::vector<double>>()});
        const std::size_t n = states.size();
        const std::size_t m = actions.size();
        if (n > kMaxDiscreteStates) throw ModelError("mdp: state count exceeds the oracle bound");
        std::vector<std::vector<std::vector<Transition>>> P(n, std::vector<std::vector<Transition>>(m));
        std::vector<std::vector<double>> R(n, std::vector<double>(m, 0.0));
        std::vector<std::vector<char>> seen(n, std::vector<char>(m, 0));
        for (const auto& t : j.at("transitions")) {
            const auto from = t.at("from").get<std::size_t>();
            const auto a = t.at("action").get<std::size_t>();
            if (from >= n || a >= m) throw ModelError("mdp: transition index out of range");
            const double r = t.at("reward").get<double>();
            if (seen[from][a] && R[from][a] != r) throw ModelError("mdp: inconsistent rewards within a row");
            seen[from][a] = 1;
            R[from][a] = r;
            P[from][a].push_back({t.at("to").get<std::size_t>(), t.at("prob").get<double>()});
        }
        std::vector<std::vector<double>> B = R;
        if (j.contains("base")) B = j.at("base").get<std::vector<std::vector<double>>>();
        std::vector<std::vector<char>> avail(n, std::vector<char>(m, 1));
        if (j.contains("available")) {
            const auto raw = j.at("available").get<std::vector<std::vector<int>>>();
            if (raw.size() != n) throw ModelError("mdp: availability table size mismatch");
            for (std::size_t y = 0; y < n; ++y) {
                if (raw[y].size() != m) throw ModelError("mdp: availability table size mismatch");
                for (std::size_t a = 0; a < m; ++a) avail[y][a] = raw[y][a] ? 1 : 0;
            }
        }
        return DiscreteTargetMDP(std::move(states), std::move(actions), std::move(P), std::move(R), std::move(B),
                                 std::move(avail), cfg, j.at("target").get<double>(), std::move(comps));
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("mdp: malformed document: ") + e.what());
    }
}

DiscreteMDPEnv::DiscreteMDPEnv(std::shared_ptr<const DiscreteTargetMDP> mdp, std::size_t start_state,
                               std::int64_t horizon)
    : mdp_(std::move(mdp)), start_(start_state), horizon_(horizon) {
    if (!mdp_) throw DomainError("discrete env: null model");
    if (start_ >= mdp_->num_states()) throw DomainError("discrete env: start state out of range");
    if (horizon_ < 1) throw DomainError("discrete env: horizon must be >= 1");
    y_ = start_;
    sync();
}

std::unique_ptr<Environment> DiscreteMDPEnv::clone() const { return std::make_unique<DiscreteMDPEnv>(*this); }

void DiscreteMDPEnv::sync() {
    const auto& s = mdp_->state(y_);
    sys_ = SystemState{};
    sys_.x = s.x;
    sys_.spectra_level = s.spectra_level;
    sys_.t = t_;
}

void DiscreteMDPEnv::set_state_index(std::size_t y) {
    if (y >= mdp_->num_states()) throw DomainError("discrete env: state out of range");
    y_ = y;
    sync();
}

Observation DiscreteMDPEnv::reset(std::uint64_t seed) {
    reseed(seed);
    y_ = start_;
    t_ = 0;
    sync();
    return observe();
}

BudgetVector DiscreteMDPEnv::budgets_of(std::size_t y) const {
    return BudgetVector{mdp_->budget_components(), mdp_->state(y).budgets};
}

BudgetVector DiscreteMDPEnv::budgets() const { return budgets_of(y_); }

Observation DiscreteMDPEnv::observe() const {
    Observation o;
    o.step = t_;
    o.glucose = sys_.x;
    o.spectra_level = sys_.spectra_level;
    o.long_active = mdp_->state(y_).spectra_index > 0;
    o.budgets = mdp_->state(y_).budgets;
    o.state_index = y_;
    return o;
}

bool DiscreteMDPEnv::action_allowed(const InterventionAction& action) const {
    const auto a = mdp_->action_index(action);
    return a && mdp_->available(y_, *a);
}

StepResult DiscreteMDPEnv::step(const InterventionAction& action) {
    const auto a = mdp_->action_index(action);
    if (!a) throw DomainError("discrete env: action " + to_string(action) + " not in the model");
    if (!mdp_->available(y_, *a)) throw DomainError("discrete env: action " + to_string(action) + " unavailable");
    StepResult res;
    res.base_reward = mdp_->base(y_, *a);
    res.reshaped_reward = mdp_->reward(y_, *a);
    y_ = sample_next(*mdp_, y_, *a, rng_);
    ++t_;
    sync();
    res.budgets = budgets_of(y_);
    res.info.x_before_reset = sys_.x;
    res.observation = observe();
    res.done = t_ >= horizon_;
    return res;
}

std::vector<LookaheadPoint> DiscreteMDPEnv::lookahead(const InterventionAction& first, int horizon, int samples,
                                                      RngStream&) const {
    if (horizon < 1 || samples < 1) throw ShieldError("lookahead: horizon and samples must be >= 1");
    const auto a0 = mdp_->action_index(first);
    if (!a0) throw ShieldError("lookahead: action " + to_string(first) + " not in the model");
    const std::size_t n = mdp_->num_states();
    std::vector<double> dist(n, 0.0);
    dist[y_] = 1.0;
    std::vector<LookaheadPoint> out;
    const auto& cfg = mdp_->reward_config();
    for (int k = 0; k < horizon; ++k) {
        std::vector<double> next(n, 0.0);
        for (std::size_t y = 0; y < n; ++y) {
            if (dist[y] == 0.0) continue;
            for (const auto& tr : mdp_->row(y, k == 0 ? *a0 : 0)) next[tr.to] += dist[y] * tr.prob;
        }
        dist = std::move(next);
        LookaheadPoint pt;
        pt.budgets.components = mdp_->budget_components();
        pt.budgets.values.assign(pt.budgets.components.size(), 0.0);
        for (std::size_t y = 0; y < n; ++y) {
            if (dist[y] == 0.0) continue;
            pt.x += dist[y] * mdp_->state(y).x;
            for (std::size_t i = 0; i < pt.budgets.size(); ++i)
                pt.budgets.values[i] += dist[y] * mdp_->state(y).budgets[i];
        }
        pt.reshaped_reward =
            reshape_reward(base_reward(pt.x, InterventionAction::noop(), target(), cfg), pt.budgets.values, cfg.penalty);
        out.push_back(std::move(pt));
    }
    return out;
}

} // namespace zonerl
