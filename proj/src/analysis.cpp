#include "sharedctl/analysis.hpp"

#include "sharedctl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace sharedctl {

PrunedMdp prune_unreachable_with_map(const Mdp& mdp) {
    const StateMask reach = forward_reachable(mdp, mdp.initial());
    std::vector<StateId> new_id(mdp.num_states(), 0);
    PrunedMdp out;
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        if (!reach[s]) continue;
        new_id[s] = static_cast<StateId>(out.original_id.size());
        out.original_id.push_back(s);
    }
    if (out.original_id.size() == mdp.num_states()) {
        out.mdp = mdp;
        return out;
    }
    std::vector<StateSpec> states;
    states.reserve(out.original_id.size());
    for (StateId old : out.original_id) {
        StateSpec spec = mdp.states()[old];
        for (auto& c : spec.actions)
            for (auto& t : c.successors) t.to = new_id[t.to];
        states.push_back(std::move(spec));
    }
    out.mdp = Mdp(std::move(states), new_id[mdp.initial()]);
    return out;
}

Mdp prune_unreachable(const Mdp& mdp) { return prune_unreachable_with_map(mdp).mdp; }

StateMask forward_reachable(const Mdp& mdp, StateId from) {
    StateMask seen(mdp.num_states(), 0);
    std::vector<StateId> stack{from};
    seen[from] = 1;
    while (!stack.empty()) {
        const StateId s = stack.back();
        stack.pop_back();
        for (const auto& c : mdp.actions(s))
            for (const auto& t : c.successors)
                if (!seen[t.to]) {
                    seen[t.to] = 1;
                    stack.push_back(t.to);
                }
    }
    return seen;
}

StateMask backward_reachable(const Mdp& mdp, const StateMask& targets, const StateMask* allowed) {
    const std::size_t n = mdp.num_states();
    std::vector<std::vector<StateId>> pred(n);
    for (StateId s = 0; s < n; ++s)
        for (const auto& c : mdp.actions(s))
            for (const auto& t : c.successors) pred[t.to].push_back(s);

    StateMask seen(n, 0);
    std::vector<StateId> stack;
    for (StateId s = 0; s < n; ++s)
        if (targets[s]) {
            seen[s] = 1;
            stack.push_back(s);
        }
    while (!stack.empty()) {
        const StateId s = stack.back();
        stack.pop_back();
        for (StateId p : pred[s]) {
            if (seen[p] || (allowed && !(*allowed)[p])) continue;
            seen[p] = 1;
            stack.push_back(p);
        }
    }
    return seen;
}

std::vector<std::vector<StateId>>
strongly_connected_components(const std::vector<std::vector<StateId>>& adj) {
    const std::size_t n = adj.size();
    constexpr std::size_t unset = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> index(n, unset), low(n, 0);
    std::vector<char> on_stack(n, 0);
    std::vector<StateId> stack;
    std::vector<std::vector<StateId>> out;
    std::size_t counter = 0;

    struct Frame {
        StateId v;
        std::size_t edge;
    };
    std::vector<Frame> call;

    for (StateId root = 0; root < n; ++root) {
        if (index[root] != unset) continue;
        call.push_back({root, 0});
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            auto& f = call.back();
            if (f.edge < adj[f.v].size()) {
                const StateId w = adj[f.v][f.edge++];
                if (index[w] == unset) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
                continue;
            }
            const StateId v = f.v;
            call.pop_back();
            if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
            if (low[v] == index[v]) {
                std::vector<StateId> comp;
                StateId w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp.push_back(w);
                } while (w != v);
                std::sort(comp.begin(), comp.end());
                out.push_back(std::move(comp));
            }
        }
    }
    return out;
}

InducedMc induce_mc(const Mdp& mdp, const Strategy& strategy) {
    if (strategy.num_states() != mdp.num_states())
        throw StrategyMismatch("strategy covers " + std::to_string(strategy.num_states()) +
                               " states, model has " + std::to_string(mdp.num_states()));
    InducedMc mc;
    mc.initial = mdp.initial();
    mc.rows.resize(mdp.num_states());
    mc.state_cost.assign(mdp.num_states(), 0.0);
    std::vector<double> acc(mdp.num_states(), 0.0);
    std::vector<StateId> touched;
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        const auto dist = strategy.at(s);
        if (dist.size() != mdp.num_actions(s))
            throw StrategyMismatch("state " + std::to_string(s) +
                                   ": strategy and model disagree on the action set");
        touched.clear();
        double total = 0.0;
        for (ActionIndex a = 0; a < dist.size(); ++a) {
            const double w = dist[a];
            if (!(w >= 0)) throw StrategyMismatch("state " + std::to_string(s) + ": negative or non-finite weight");
            total += w;
            if (w == 0) continue;
            const auto& c = mdp.action(s, a);
            mc.state_cost[s] += w * c.cost;
            for (const auto& t : c.successors) {
                if (acc[t.to] == 0.0) touched.push_back(t.to);
                acc[t.to] += w * t.p;
            }
        }
        if (std::abs(total - 1.0) > kProbabilityTolerance)
            throw StrategyMismatch("state " + std::to_string(s) + ": weights sum to " + std::to_string(total));
        std::sort(touched.begin(), touched.end());
        auto& row = mc.rows[s];
        row.reserve(touched.size());
        for (StateId t : touched) {
            row.push_back({t, acc[t]});
            acc[t] = 0.0;
        }
    }
    return mc;
}

namespace {

StateMask mc_backward(const InducedMc& mc, const StateMask& targets) {
    const std::size_t n = mc.num_states();
    std::vector<std::vector<StateId>> pred(n);
    for (StateId s = 0; s < n; ++s)
        for (const auto& t : mc.rows[s])
            if (t.p > 0) pred[t.to].push_back(s);
    StateMask seen = targets;
    std::vector<StateId> stack;
    for (StateId s = 0; s < n; ++s)
        if (seen[s]) stack.push_back(s);
    while (!stack.empty()) {
        const StateId s = stack.back();
        stack.pop_back();
        for (StateId p : pred[s])
            if (!seen[p]) {
                seen[p] = 1;
                stack.push_back(p);
            }
    }
    return seen;
}

} // namespace

std::vector<double> reach_probabilities(const InducedMc& mc, const StateMask& target,
                                        const LinearSolveOptions& options) {
    const std::size_t n = mc.num_states();
    const StateMask can_reach = mc_backward(mc, target);

    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> idx(n, none);
    std::vector<StateId> unknown;
    for (StateId s = 0; s < n; ++s)
        if (can_reach[s] && !target[s]) {
            idx[s] = unknown.size();
            unknown.push_back(s);
        }

    std::vector<double> result(n, 0.0);
    for (StateId s = 0; s < n; ++s)
        if (target[s]) result[s] = 1.0;
    if (unknown.empty()) return result;

    std::vector<Entry> entries;
    std::vector<double> rhs(unknown.size(), 0.0);
    for (std::size_t i = 0; i < unknown.size(); ++i) {
        double self = 1.0;
        for (const auto& t : mc.rows[unknown[i]]) {
            if (target[t.to])
                rhs[i] += t.p;
            else if (idx[t.to] == i)
                self -= t.p;
            else if (idx[t.to] != none)
                entries.push_back({i, idx[t.to], -t.p});
        }
        entries.push_back({i, i, self});
    }
    const auto sol = solve_sparse(unknown.size(), entries, rhs, options);
    if (!sol.converged) throw NumericalBreakdown("reachability solve did not converge");
    for (std::size_t i = 0; i < unknown.size(); ++i)
        result[unknown[i]] = std::clamp(sol.x[i], 0.0, 1.0);
    return result;
}

double reach_probability(const InducedMc& mc, StateId from, const StateSet& target) {
    if (target.empty()) throw DomainError("reach_probability: empty target set");
    return reach_probabilities(mc, to_mask(target, mc.num_states()))[from];
}

double expected_cost(const InducedMc& mc, std::span<const double> cost, StateId from,
                     const StateSet& goal) {
    const std::size_t n = mc.num_states();
    if (cost.size() != n) throw DomainError("expected_cost: cost vector size mismatch");
    const StateMask goal_mask = to_mask(goal, n);
    const auto prob = reach_probabilities(mc, goal_mask);
    if (prob[from] < 1.0 - kProbabilityTolerance)
        throw DivergentCost("goal reached with probability " + std::to_string(prob[from]) +
                            " < 1; expected cost is infinite");
    if (goal_mask[from]) return 0.0;

    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> idx(n, none);
    std::vector<StateId> live;
    for (StateId s = 0; s < n; ++s)
        if (prob[s] > 0 && !goal_mask[s]) {
            idx[s] = live.size();
            live.push_back(s);
        }
    std::vector<Entry> entries;
    std::vector<double> rhs(live.size());
    for (std::size_t i = 0; i < live.size(); ++i) {
        rhs[i] = cost[live[i]];
        double self = 1.0;
        for (const auto& t : mc.rows[live[i]]) {
            if (idx[t.to] == i)
                self -= t.p;
            else if (idx[t.to] != none)
                entries.push_back({i, idx[t.to], -t.p});
        }
        entries.push_back({i, i, self});
    }
    const auto sol = solve_sparse(live.size(), entries, rhs);
    if (!sol.converged) throw NumericalBreakdown("expected-cost solve did not converge");
    return sol.x[idx[from]];
}

std::vector<EndComponent> maximal_end_components(const Mdp& mdp, const StateMask* within) {
    const std::size_t n = mdp.num_states();
    // allowed[s][a]: action a of s is still a candidate
    std::vector<std::vector<char>> allowed(n);
    StateMask alive(n, 0);
    for (StateId s = 0; s < n; ++s) {
        if (within && !(*within)[s]) continue;
        alive[s] = 1;
        allowed[s].assign(mdp.num_actions(s), 1);
    }
    // component id of each alive state inside the candidate currently processed
    std::vector<std::size_t> comp(n, 0);

    std::vector<EndComponent> result;
    std::deque<std::vector<StateId>> work;
    work.push_back(to_set(alive));

    std::size_t next_tag = 0;
    while (!work.empty()) {
        std::vector<StateId> cand = std::move(work.front());
        work.pop_front();
        const std::size_t tag = ++next_tag;
        for (StateId s : cand) comp[s] = tag;

        // Drop actions leaving the candidate until stable; drop states left without actions.
        bool changed = true;
        while (changed) {
            changed = false;
            for (StateId s : cand) {
                if (comp[s] != tag) continue;
                bool any = false;
                for (ActionIndex a = 0; a < allowed[s].size(); ++a) {
                    if (!allowed[s][a]) continue;
                    for (const auto& t : mdp.action(s, a).successors)
                        if (comp[t.to] != tag || !alive[t.to]) {
                            allowed[s][a] = 0;
                            break;
                        }
                    any = any || allowed[s][a];
                }
                if (!any) {
                    comp[s] = 0;
                    alive[s] = 0;
                    changed = true;
                }
            }
        }
        std::erase_if(cand, [&](StateId s) { return comp[s] != tag; });
        if (cand.empty()) continue;

        // SCCs of the candidate's remaining graph, on local indices.
        std::vector<std::size_t> local(n, 0);
        for (std::size_t i = 0; i < cand.size(); ++i) local[cand[i]] = i;
        std::vector<std::vector<StateId>> g(cand.size());
        for (std::size_t i = 0; i < cand.size(); ++i) {
            const StateId s = cand[i];
            for (ActionIndex a = 0; a < allowed[s].size(); ++a) {
                if (!allowed[s][a]) continue;
                for (const auto& t : mdp.action(s, a).successors)
                    g[i].push_back(static_cast<StateId>(local[t.to]));
            }
            std::sort(g[i].begin(), g[i].end());
            g[i].erase(std::unique(g[i].begin(), g[i].end()), g[i].end());
        }
        auto sccs = strongly_connected_components(g);
        if (sccs.size() == 1) {
            EndComponent ec;
            ec.states = cand;
            for (StateId s : cand) {
                std::vector<ActionIndex> acts;
                for (ActionIndex a = 0; a < allowed[s].size(); ++a)
                    if (allowed[s][a]) acts.push_back(a);
                ec.actions.push_back(std::move(acts));
            }
            result.push_back(std::move(ec));
            continue;
        }
        std::sort(sccs.begin(), sccs.end(),
                  [](const auto& a, const auto& b) { return a.front() < b.front(); });
        for (auto& c : sccs) {
            std::vector<StateId> states;
            states.reserve(c.size());
            for (StateId i : c) states.push_back(cand[i]);
            work.push_back(std::move(states));
        }
    }
    std::sort(result.begin(), result.end(), [](const EndComponent& a, const EndComponent& b) {
        return a.states.front() < b.states.front();
    });
    return result;
}

OccupancyMeasure compute_occupancy(const Mdp& mdp, const Strategy& strategy,
                                   const StateSet& target, const StateSet& transient) {
    const std::size_t n = mdp.num_states();
    const InducedMc mc = induce_mc(mdp, strategy);

    OccupancyMeasure occ;
    occ.target = to_mask(target, n);
    occ.transient = to_mask(transient, n);
    for (StateId s = 0; s < n; ++s)
        if (occ.target[s] && occ.transient[s])
            throw DomainError("target and transient sets overlap at state " + std::to_string(s));
    occ.absorbed.assign(n, 0.0);
    occ.state_action.resize(n);
    for (StateId s = 0; s < n; ++s) occ.state_action[s].assign(mdp.num_actions(s), 0.0);

    const StateId init = mdp.initial();
    if (occ.target[init]) {
        occ.absorbed[init] = 1.0;
        return occ;
    }
    if (!occ.transient[init]) return occ;

    // Transient states the strategy actually visits.
    StateMask reach(n, 0);
    std::vector<StateId> stack{init};
    reach[init] = 1;
    while (!stack.empty()) {
        const StateId s = stack.back();
        stack.pop_back();
        for (const auto& t : mc.rows[s])
            if (occ.transient[t.to] && !reach[t.to]) {
                reach[t.to] = 1;
                stack.push_back(t.to);
            }
    }

    // Visited transient states that can leave the transient set; the rest are trapped.
    std::vector<std::vector<StateId>> pred(n);
    StateMask leaves(n, 0);
    std::vector<StateId> queue;
    for (StateId s = 0; s < n; ++s) {
        if (!reach[s]) continue;
        for (const auto& t : mc.rows[s]) {
            if (!occ.transient[t.to]) {
                if (!leaves[s]) {
                    leaves[s] = 1;
                    queue.push_back(s);
                }
            } else if (reach[t.to]) {
                pred[t.to].push_back(s);
            }
        }
    }
    while (!queue.empty()) {
        const StateId s = queue.back();
        queue.pop_back();
        for (StateId p : pred[s])
            if (!leaves[p]) {
                leaves[p] = 1;
                queue.push_back(p);
            }
    }

    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> idx(n, none);
    std::vector<StateId> live;
    for (StateId s = 0; s < n; ++s) {
        if (!reach[s]) continue;
        if (leaves[s]) {
            idx[s] = live.size();
            live.push_back(s);
        } else {
            occ.valid = false;
            for (auto& v : occ.state_action[s]) v = std::numeric_limits<double>::infinity();
        }
    }
    if (!leaves[init]) return occ;

    // y = alpha + Q^T y over the live transient states.
    std::vector<Entry> entries;
    std::vector<double> rhs(live.size(), 0.0);
    rhs[idx[init]] = 1.0;
    for (std::size_t j = 0; j < live.size(); ++j) {
        double self = 1.0;
        for (const auto& t : mc.rows[live[j]]) {
            const std::size_t i = idx[t.to];
            if (i == none) continue;
            if (i == j)
                self -= t.p;
            else
                entries.push_back({i, j, -t.p});
        }
        entries.push_back({j, j, self});
    }
    const auto sol = solve_sparse(live.size(), entries, rhs);
    if (!sol.converged) occ.valid = false;

    for (std::size_t j = 0; j < live.size(); ++j) {
        const StateId s = live[j];
        const double y = std::max(0.0, sol.x[j]);
        const auto dist = strategy.at(s);
        for (ActionIndex a = 0; a < dist.size(); ++a) occ.state_action[s][a] = dist[a] * y;
        for (const auto& t : mc.rows[s])
            if (occ.target[t.to]) occ.absorbed[t.to] += t.p * y;
    }
    return occ;
}

} // namespace sharedctl
