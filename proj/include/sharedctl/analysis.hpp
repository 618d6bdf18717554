#pragma once

#include "sharedctl/linear_system.hpp"
#include "sharedctl/mdp.hpp"

#include <span>
#include <vector>

namespace sharedctl {

struct PrunedMdp {
    Mdp mdp;
    /// original_id[new] = id of the state in the unpruned model.
    std::vector<StateId> original_id;
};

/// Restricts `mdp` to the states reachable from the initial state through
/// positive-probability edges. State order is preserved.
PrunedMdp prune_unreachable_with_map(const Mdp& mdp);
Mdp prune_unreachable(const Mdp& mdp);

/// States reachable from `from` under some strategy.
StateMask forward_reachable(const Mdp& mdp, StateId from);

/// States with a positive-probability path (under some strategy) into `targets`.
/// Paths may only pass through `allowed` states when a mask is given.
StateMask backward_reachable(const Mdp& mdp, const StateMask& targets,
                             const StateMask* allowed = nullptr);

/// Tarjan's algorithm over an adjacency list; components come out in reverse
/// topological order, roots visited in index order.
std::vector<std::vector<StateId>>
strongly_connected_components(const std::vector<std::vector<StateId>>& adjacency);

InducedMc induce_mc(const Mdp& mdp, const Strategy& strategy);

/// Probability of eventually reaching `target` from every state of `mc`.
std::vector<double> reach_probabilities(const InducedMc& mc, const StateMask& target,
                                        const LinearSolveOptions& options = {});
double reach_probability(const InducedMc& mc, StateId from, const StateSet& target);

/// Expected cost accumulated before the first visit to `goal`.
/// Throws DivergentCost when `goal` is missed with positive probability.
double expected_cost(const InducedMc& mc, std::span<const double> cost, StateId from,
                     const StateSet& goal);

/// Maximal end components, optionally restricted to the states in `within`.
std::vector<EndComponent> maximal_end_components(const Mdp& mdp,
                                                 const StateMask* within = nullptr);

/**
 * Occupancy measure of a fixed strategy on the partition (target, transient):
 * expected state-action counts on `transient` and absorption probabilities on
 * `target`. States the strategy never reaches get zero occupancy. When the
 * strategy traps mass inside `transient`, the trapped entries are +inf and the
 * result is flagged invalid.
 */
OccupancyMeasure compute_occupancy(const Mdp& mdp, const Strategy& strategy,
                                   const StateSet& target, const StateSet& transient);

} // namespace sharedctl
