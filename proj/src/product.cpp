#include "sharedctl/product.hpp"

#include "sharedctl/analysis.hpp"
#include "sharedctl/errors.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <unordered_map>

namespace sharedctl {

ProductMdp build_product(const Mdp& mdp, const Dra& dra) {
    const std::size_t nq = dra.num_states();
    std::vector<Letter> letter(mdp.num_states());
    for (StateId s = 0; s < mdp.num_states(); ++s) letter[s] = dra.letter_of(mdp.labels(s));

    std::unordered_map<std::uint64_t, StateId> index;
    ProductMdp out;
    auto key = [nq](StateId s, AutomatonState q) {
        return static_cast<std::uint64_t>(s) * nq + q;
    };
    auto intern = [&](StateId s, AutomatonState q) {
        auto [it, fresh] = index.try_emplace(key(s, q), static_cast<StateId>(out.base_state.size()));
        if (fresh) {
            out.base_state.push_back(s);
            out.automaton_state.push_back(q);
        }
        return it->second;
    };

    const StateId s0 = mdp.initial();
    intern(s0, dra.next(dra.initial(), letter[s0]));
    std::vector<StateSpec> specs;
    for (StateId k = 0; k < out.base_state.size(); ++k) {
        const StateId s = out.base_state[k];
        const AutomatonState q = out.automaton_state[k];
        StateSpec spec;
        spec.labels = {"q" + std::to_string(q)};
        for (const auto& c : mdp.actions(s)) {
            Choice pc{c.name, c.cost, {}};
            pc.successors.reserve(c.successors.size());
            for (const auto& t : c.successors)
                pc.successors.push_back({intern(t.to, dra.next(q, letter[t.to])), t.p});
            spec.actions.push_back(std::move(pc));
        }
        specs.push_back(std::move(spec));
    }
    out.mdp = Mdp(std::move(specs), 0);

    const std::size_t n = out.base_state.size();
    for (const auto& pair : dra.pairs()) {
        LiftedPair lp{StateMask(n, 0), StateMask(n, 0)};
        for (std::size_t k = 0; k < n; ++k) {
            lp.avoid[k] = pair.avoid[out.automaton_state[k]];
            lp.visit[k] = pair.visit[out.automaton_state[k]];
        }
        out.pairs.push_back(std::move(lp));
    }
    return out;
}

std::vector<EndComponent> accepting_end_components(const ProductMdp& product) {
    const std::size_t n = product.mdp.num_states();
    std::map<StateSet, EndComponent> unique;
    for (const auto& pair : product.pairs) {
        StateMask allowed(n, 0);
        for (std::size_t s = 0; s < n; ++s) allowed[s] = !pair.avoid[s];
        for (auto& ec : maximal_end_components(product.mdp, &allowed)) {
            const bool accepting =
                std::any_of(ec.states.begin(), ec.states.end(), [&](StateId s) { return pair.visit[s]; });
            if (accepting) unique.try_emplace(ec.states, std::move(ec));
        }
    }
    std::vector<EndComponent> out;
    for (auto& [states, ec] : unique) out.push_back(std::move(ec));
    std::sort(out.begin(), out.end(),
              [](const EndComponent& a, const EndComponent& b) { return a.states < b.states; });
    return out;
}

RelevantStates relevant_states(const ProductMdp& product, const std::vector<EndComponent>& aecs) {
    const std::size_t n = product.mdp.num_states();
    StateMask in_b(n, 0);
    for (const auto& ec : aecs)
        for (StateId s : ec.states) in_b[s] = 1;
    RelevantStates out;
    out.accepting = to_set(in_b);
    if (out.accepting.empty()) return out;
    StateMask back = backward_reachable(product.mdp, in_b);
    for (std::size_t s = 0; s < n; ++s)
        if (back[s] && !in_b[s]) out.transient.push_back(static_cast<StateId>(s));
    return out;
}

ProductMdp absorb_end_components(const ProductMdp& product, const std::vector<EndComponent>& aecs) {
    StateMask in_b(product.mdp.num_states(), 0);
    for (const auto& ec : aecs)
        for (StateId s : ec.states) in_b[s] = 1;
    std::vector<StateSpec> specs = product.mdp.states();
    for (StateId s = 0; s < specs.size(); ++s) {
        if (!in_b[s]) continue;
        for (auto& c : specs[s].actions) c.successors = {{s, 1.0}};
    }
    ProductMdp out = product;
    out.mdp = Mdp(std::move(specs), product.mdp.initial());
    return out;
}

Strategy lift_strategy(const ProductMdp& product, const Strategy& base) {
    std::vector<std::vector<double>> dist(product.mdp.num_states());
    for (StateId k = 0; k < dist.size(); ++k) {
        const StateId s = product.base_state[k];
        if (s >= base.num_states())
            throw StrategyMismatch("strategy does not cover base state " + std::to_string(s));
        auto row = base.at(s);
        dist[k].assign(row.begin(), row.end());
    }
    Strategy out(std::move(dist));
    out.validate(product.mdp);
    return out;
}

StateSet product_states_with_label(const ProductMdp& product, const Mdp& base,
                                   const std::string& label) {
    StateSet out;
    for (StateId k = 0; k < product.base_state.size(); ++k)
        if (base.has_label(product.base_state[k], label)) out.push_back(k);
    return out;
}

std::vector<std::string> model_propositions(const Mdp& mdp) {
    std::set<std::string> all;
    for (StateId s = 0; s < mdp.num_states(); ++s)
        for (const auto& l : mdp.labels(s)) all.insert(l);
    return {all.begin(), all.end()};
}

} // namespace sharedctl
