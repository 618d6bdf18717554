#include "sharedctl/mdp.hpp"

#include "sharedctl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace sharedctl {

StateMask to_mask(const StateSet& states, std::size_t num_states) {
    StateMask mask(num_states, 0);
    for (StateId s : states) {
        if (s >= num_states)
            throw ModelError("state " + std::to_string(s) + " out of range");
        mask[s] = 1;
    }
    return mask;
}

StateSet to_set(const StateMask& mask) {
    StateSet out;
    for (std::size_t s = 0; s < mask.size(); ++s)
        if (mask[s]) out.push_back(static_cast<StateId>(s));
    return out;
}

namespace {

std::string where(std::size_t s, const std::string& action) {
    return "state " + std::to_string(s) + ", action '" + action + "'";
}

void normalize_choice(Choice& c, std::size_t state, std::size_t num_states) {
    if (!std::isfinite(c.cost) || c.cost < 0)
        throw ModelError(where(state, c.name) + ": cost must be finite and non-negative");

    for (const auto& t : c.successors) {
        if (t.to >= num_states)
            throw ModelError(where(state, c.name) + ": successor " + std::to_string(t.to) +
                             " out of range");
        if (!std::isfinite(t.p) || t.p < 0 || t.p > 1)
            throw ModelError(where(state, c.name) + ": probability " + std::to_string(t.p) +
                             " outside [0,1]");
    }

    std::sort(c.successors.begin(), c.successors.end(),
              [](const Successor& a, const Successor& b) { return a.to < b.to; });
    std::vector<Successor> merged;
    for (const auto& t : c.successors) {
        if (!merged.empty() && merged.back().to == t.to)
            merged.back().p += t.p;
        else
            merged.push_back(t);
    }
    std::erase_if(merged, [](const Successor& t) { return t.p == 0.0; });

    double sum = 0;
    for (const auto& t : merged) sum += t.p;
    if (std::abs(sum - 1.0) > kProbabilityTolerance)
        throw ModelError(where(state, c.name) + ": probabilities sum to " +
                         std::to_string(sum));
    // Sums within rounding of 1 are left alone so that reloading a written model is exact.
    if (merged.size() == 1)
        merged[0].p = 1.0;
    else if (std::abs(sum - 1.0) > 1e-12)
        for (auto& t : merged) t.p /= sum;
    c.successors = std::move(merged);
}

} // namespace

Mdp::Mdp(std::vector<StateSpec> states, StateId initial)
    : states_(std::move(states)), initial_(initial) {
    if (states_.empty()) throw ModelError("model has no states");
    if (initial_ >= states_.size())
        throw ModelError("initial state " + std::to_string(initial_) + " out of range");

    for (std::size_t s = 0; s < states_.size(); ++s) {
        auto& st = states_[s];
        if (st.actions.empty())
            throw ModelError("state " + std::to_string(s) + " has no actions (deadlock)");
        std::unordered_set<std::string> names;
        for (auto& c : st.actions) {
            if (!names.insert(c.name).second)
                throw ModelError(where(s, c.name) + ": duplicate action name");
            normalize_choice(c, s, states_.size());
            num_transitions_ += c.successors.size();
        }
        num_choices_ += st.actions.size();
        std::sort(st.labels.begin(), st.labels.end());
        st.labels.erase(std::unique(st.labels.begin(), st.labels.end()), st.labels.end());
    }
}

std::optional<ActionIndex> Mdp::find_action(StateId s, std::string_view name) const {
    const auto& acts = states_[s].actions;
    for (std::size_t a = 0; a < acts.size(); ++a)
        if (acts[a].name == name) return static_cast<ActionIndex>(a);
    return std::nullopt;
}

bool Mdp::has_label(StateId s, std::string_view ap) const {
    const auto& l = states_[s].labels;
    return std::binary_search(l.begin(), l.end(), ap);
}

Strategy Strategy::uniform(const Mdp& mdp) {
    std::vector<std::vector<double>> d(mdp.num_states());
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        const auto k = mdp.num_actions(s);
        d[s].assign(k, 1.0 / static_cast<double>(k));
    }
    return Strategy(std::move(d));
}

Strategy Strategy::deterministic(const Mdp& mdp, std::span<const ActionIndex> choice) {
    if (choice.size() != mdp.num_states())
        throw StrategyMismatch("deterministic strategy needs one action per state");
    std::vector<std::vector<double>> d(mdp.num_states());
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        if (choice[s] >= mdp.num_actions(s))
            throw StrategyMismatch("state " + std::to_string(s) + ": action index " +
                                   std::to_string(choice[s]) + " not enabled");
        d[s].assign(mdp.num_actions(s), 0.0);
        d[s][choice[s]] = 1.0;
    }
    return Strategy(std::move(d));
}

void Strategy::validate(const Mdp& mdp) const {
    if (dist_.size() != mdp.num_states())
        throw StrategyMismatch("strategy covers " + std::to_string(dist_.size()) +
                               " states, model has " + std::to_string(mdp.num_states()));
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        const auto& d = dist_[s];
        if (d.size() != mdp.num_actions(s))
            throw StrategyMismatch("state " + std::to_string(s) + ": strategy has " +
                                   std::to_string(d.size()) + " entries for " +
                                   std::to_string(mdp.num_actions(s)) + " actions");
        double sum = 0;
        for (double p : d) {
            if (!std::isfinite(p) || p < 0)
                throw StrategyMismatch("state " + std::to_string(s) +
                                       ": negative or non-finite probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kProbabilityTolerance)
            throw StrategyMismatch("state " + std::to_string(s) + ": probabilities sum to " +
                                   std::to_string(sum));
    }
}

double OccupancyMeasure::total_absorbed() const {
    return std::accumulate(absorbed.begin(), absorbed.end(), 0.0);
}

double OccupancyMeasure::visits(StateId s) const {
    if (s < target.size() && target[s]) return absorbed[s];
    const auto& row = state_action[s];
    return std::accumulate(row.begin(), row.end(), 0.0);
}

} // namespace sharedctl
