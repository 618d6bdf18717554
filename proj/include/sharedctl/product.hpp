#pragma once

#include "sharedctl/dra.hpp"
#include "sharedctl/mdp.hpp"

#include <vector>

namespace sharedctl {

/// Rabin pair lifted to product states.
struct LiftedPair {
    StateMask avoid;
    StateMask visit;
};

/**
 * Synchronous product of an MDP with a DRA, restricted to the states
 * reachable from (s_I, next(q_I, L(s_I))). Product state k is labeled "q<j>"
 * where j = automaton_state[k]; costs and action names are copied from the
 * base model.
 */
struct ProductMdp {
    Mdp mdp;
    std::vector<StateId> base_state;
    std::vector<AutomatonState> automaton_state;
    std::vector<LiftedPair> pairs;
};

ProductMdp build_product(const Mdp& mdp, const Dra& dra);

/// Per pair: drop the avoid states, decompose into MECs, keep the components
/// touching the visit states. Duplicates across pairs are merged.
std::vector<EndComponent> accepting_end_components(const ProductMdp& product);

struct RelevantStates {
    /// Union of the accepting end components.
    StateSet accepting;
    /// States outside `accepting` with a positive-probability path into it.
    StateSet transient;
};

RelevantStates relevant_states(const ProductMdp& product, const std::vector<EndComponent>& aecs);

/// Every action of every AEC state becomes a self-loop with probability 1.
ProductMdp absorb_end_components(const ProductMdp& product, const std::vector<EndComponent>& aecs);

/// Strategy on the product that plays the base strategy of the projected state.
Strategy lift_strategy(const ProductMdp& product, const Strategy& base);

/// Product states whose base state carries `label`.
StateSet product_states_with_label(const ProductMdp& product, const Mdp& base,
                                   const std::string& label);

/// Sorted list of every label used in the model.
std::vector<std::string> model_propositions(const Mdp& mdp);

} // namespace sharedctl
