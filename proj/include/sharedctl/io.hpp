#pragma once

#include "sharedctl/dra.hpp"
#include "sharedctl/gridworld.hpp"
#include "sharedctl/irl.hpp"
#include "sharedctl/mdp.hpp"
#include "sharedctl/product.hpp"
#include "sharedctl/synthesis.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace sharedctl {

// JSON readers throw ConfigError on malformed documents and ModelError when a
// well-formed document violates a model invariant.

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

Mdp parse_model(const std::string& text);
std::string model_to_json(const Mdp& mdp);

/// State id -> {action name: probability}; actions left out get 0.
Strategy parse_strategy(const std::string& text, const Mdp& mdp);
std::string strategy_to_json(const Mdp& mdp, const Strategy& strategy);

DemonstrationSet parse_demos(const std::string& text, const Mdp& mdp);
std::string demos_to_json(const Mdp& mdp, const DemonstrationSet& demos);

GridworldConfig parse_scenario(const std::string& text);
std::string scenario_to_json(const GridworldConfig& config);

/// Everything a session needs to replay a synthesized strategy.
struct ResultDocument {
    SynthesisResult result;
    double beta = 0.0;
    double epsilon = 0.0;
    /// Product state k = (base_state[k], automaton_state[k]); the repaired
    /// and human strategies are indexed by product state.
    std::vector<StateId> base_state;
    std::vector<AutomatonState> automaton_state;
    StateSet accepting;
    StateSet transient;
    Strategy human;
    std::string dra;
    std::optional<double> seconds;
};

ResultDocument make_result_document(const ProductMdp& product, const RepairProblem& problem,
                                    const SynthesisResult& result, const Dra& dra);
std::string result_to_json(const Mdp& product_mdp, const ResultDocument& doc);
/// Strategies are read against the product built from `base` and the stored automaton.
ResultDocument parse_result(const std::string& text, const Mdp& base);

} // namespace sharedctl
