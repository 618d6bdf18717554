#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sharedctl {

using StateId = std::uint32_t;
using ActionIndex = std::uint32_t;

/// Sorted, duplicate-free list of state ids.
using StateSet = std::vector<StateId>;

/// Dense membership flags indexed by state id.
using StateMask = std::vector<char>;

StateMask to_mask(const StateSet& states, std::size_t num_states);
StateSet to_set(const StateMask& mask);

/// Tolerance on probability sums, applied when models and strategies are loaded.
inline constexpr double kProbabilityTolerance = 1e-9;

struct Successor {
    StateId to = 0;
    double p = 0.0;
};

struct Choice {
    std::string name;
    double cost = 0.0;
    std::vector<Successor> successors;
};

struct StateSpec {
    std::vector<std::string> labels;
    std::vector<Choice> actions;
};

/**
 * Finite labeled MDP with per-state action sets and sparse transition
 * distributions.
 *
 * The constructor enforces the model invariants: every state has at least one
 * action, action names are unique within a state, probabilities lie in [0,1],
 * costs are finite and non-negative and every distribution sums to one within
 * kProbabilityTolerance. Distributions within tolerance are renormalized,
 * duplicate successors are merged and zero-probability entries are dropped.
 * Violations raise ModelError naming the offending state and action.
 */
class Mdp {
public:
    Mdp() = default;
    Mdp(std::vector<StateSpec> states, StateId initial);

    std::size_t num_states() const noexcept { return states_.size(); }
    StateId initial() const noexcept { return initial_; }

    std::size_t num_actions(StateId s) const { return states_[s].actions.size(); }
    std::span<const Choice> actions(StateId s) const { return states_[s].actions; }
    const Choice& action(StateId s, ActionIndex a) const { return states_[s].actions[a]; }
    std::optional<ActionIndex> find_action(StateId s, std::string_view name) const;

    std::span<const std::string> labels(StateId s) const { return states_[s].labels; }
    bool has_label(StateId s, std::string_view ap) const;

    /// Number of stored (state, action, successor) triples with positive probability.
    std::size_t num_transitions() const noexcept { return num_transitions_; }
    std::size_t num_choices() const noexcept { return num_choices_; }

    const std::vector<StateSpec>& states() const noexcept { return states_; }

private:
    std::vector<StateSpec> states_;
    StateId initial_ = 0;
    std::size_t num_transitions_ = 0;
    std::size_t num_choices_ = 0;
};

/**
 * Memoryless randomized strategy: one distribution over the enabled actions
 * of every state, stored by action index.
 */
class Strategy {
public:
    Strategy() = default;
    explicit Strategy(std::vector<std::vector<double>> dist) : dist_(std::move(dist)) {}

    static Strategy uniform(const Mdp& mdp);
    static Strategy deterministic(const Mdp& mdp, std::span<const ActionIndex> choice);

    std::size_t num_states() const noexcept { return dist_.size(); }
    std::span<const double> at(StateId s) const { return dist_[s]; }
    double operator()(StateId s, ActionIndex a) const { return dist_[s][a]; }

    void set(StateId s, std::vector<double> dist) { dist_[s] = std::move(dist); }

    /// Throws StrategyMismatch unless this is a valid strategy for `mdp`.
    void validate(const Mdp& mdp) const;

    const std::vector<std::vector<double>>& data() const noexcept { return dist_; }

private:
    std::vector<std::vector<double>> dist_;
};

/// Markov chain obtained by fixing a strategy; rows hold merged successors.
struct InducedMc {
    StateId initial = 0;
    std::vector<std::vector<Successor>> rows;
    /// Expected one-step cost per state under the inducing strategy.
    std::vector<double> state_cost;

    std::size_t num_states() const noexcept { return rows.size(); }
};

/// Closed, strongly connected sub-MDP. `actions[i]` are the actions of
/// `states[i]` whose support stays inside the component.
struct EndComponent {
    StateSet states;
    std::vector<std::vector<ActionIndex>> actions;
};

/**
 * Occupancy measure on a (target, transient) partition: expected action
 * counts on the transient states and absorption mass on the target states.
 */
struct OccupancyMeasure {
    std::vector<std::vector<double>> state_action;
    std::vector<double> absorbed;
    StateMask transient;
    StateMask target;
    /// False when the strategy keeps mass inside the transient set forever.
    bool valid = true;

    double total_absorbed() const;
    double visits(StateId s) const;
};

} // namespace sharedctl
