#include <doctest.h>

#include "sharedctl/analysis.hpp"
#include "sharedctl/errors.hpp"
#include "sharedctl/linear_system.hpp"
#include "support/models.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <random>
#include <set>

using namespace sharedctl;

namespace {

StateSpec absorbing(StateId s, std::vector<std::string> labels = {}) {
    StateSpec st;
    st.labels = std::move(labels);
    st.actions = {{"loop", 0.0, {{s, 1.0}}}};
    return st;
}

// BFS over positive-probability edges, independent of forward_reachable.
std::vector<StateId> bfs_order(const Mdp& m) {
    std::vector<char> seen(m.num_states(), 0);
    std::deque<StateId> q{m.initial()};
    seen[m.initial()] = 1;
    while (!q.empty()) {
        const StateId s = q.front();
        q.pop_front();
        for (const auto& c : m.actions(s))
            for (const auto& t : c.successors)
                if (t.p > 0 && !seen[t.to]) {
                    seen[t.to] = 1;
                    q.push_back(t.to);
                }
    }
    std::vector<StateId> out;
    for (StateId s = 0; s < m.num_states(); ++s)
        if (seen[s]) out.push_back(s);
    return out;
}

// MEC oracle: repeated SCC refinement with SCCs taken from a dense
// transitive closure.
std::set<std::vector<StateId>> mec_oracle(const Mdp& m) {
    const std::size_t n = m.num_states();
    std::vector<std::vector<char>> enabled(n);
    for (StateId s = 0; s < n; ++s) enabled[s].assign(m.num_actions(s), 1);
    std::vector<char> alive(n, 1);
    std::vector<int> comp(n, -1);
    for (bool changed = true; changed;) {
        changed = false;
        std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
        for (StateId s = 0; s < n; ++s) {
            if (!alive[s]) continue;
            reach[s][s] = 1;
            for (std::size_t a = 0; a < enabled[s].size(); ++a)
                if (enabled[s][a])
                    for (const auto& t : m.action(s, a).successors)
                        if (alive[t.to]) reach[s][t.to] = 1;
        }
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                if (reach[i][k])
                    for (std::size_t j = 0; j < n; ++j)
                        if (reach[k][j]) reach[i][j] = 1;
        for (StateId s = 0; s < n; ++s) {
            comp[s] = -1;
            if (!alive[s]) continue;
            for (StateId r = 0; r <= s; ++r)
                if (alive[r] && reach[s][r] && reach[r][s]) {
                    comp[s] = static_cast<int>(r);
                    break;
                }
        }
        for (StateId s = 0; s < n; ++s) {
            if (!alive[s]) continue;
            bool any = false;
            for (std::size_t a = 0; a < enabled[s].size(); ++a) {
                if (!enabled[s][a]) continue;
                for (const auto& t : m.action(s, a).successors)
                    if (!alive[t.to] || comp[t.to] != comp[s]) {
                        enabled[s][a] = 0;
                        changed = true;
                        break;
                    }
                any |= enabled[s][a] != 0;
            }
            if (!any) {
                alive[s] = 0;
                changed = true;
            }
        }
    }
    std::map<int, std::vector<StateId>> groups;
    for (StateId s = 0; s < n; ++s)
        if (alive[s]) groups[comp[s]].push_back(s);
    std::set<std::vector<StateId>> out;
    for (auto& [k, v] : groups) out.insert(v);
    return out;
}

// Value iteration for expected cost to `goal`.
double cost_by_iteration(const InducedMc& mc, const std::vector<double>& cost, StateId from,
                         const StateMask& goal) {
    std::vector<double> v(mc.num_states(), 0.0);
    for (int it = 0; it < 200000; ++it) {
        double diff = 0;
        for (StateId s = 0; s < mc.num_states(); ++s) {
            if (goal[s]) continue;
            double nv = cost[s];
            for (const auto& t : mc.rows[s]) nv += t.p * v[t.to];
            diff = std::max(diff, std::abs(nv - v[s]));
            v[s] = nv;
        }
        if (diff < 1e-13) break;
    }
    return v[from];
}

} // namespace

TEST_CASE("model invariants are enforced at construction") {
    SUBCASE("deadlock") {
        std::vector<StateSpec> st(1);
        CHECK_THROWS_AS(Mdp(st, 0), ModelError);
    }
    SUBCASE("probability sum") {
        std::vector<StateSpec> st(2);
        st[0].actions = {{"a", 0.0, {{0, 0.5}, {1, 0.4}}}};
        st[1] = absorbing(1);
        CHECK_THROWS_AS(Mdp(st, 0), ModelError);
    }
    SUBCASE("negative cost") {
        std::vector<StateSpec> st{absorbing(0)};
        st[0].actions[0].cost = -1.0;
        CHECK_THROWS_AS(Mdp(st, 0), ModelError);
    }
    SUBCASE("duplicate action name") {
        std::vector<StateSpec> st{absorbing(0)};
        st[0].actions.push_back(st[0].actions[0]);
        CHECK_THROWS_AS(Mdp(st, 0), ModelError);
    }
    SUBCASE("successor out of range") {
        std::vector<StateSpec> st(1);
        st[0].actions = {{"a", 0.0, {{3, 1.0}}}};
        CHECK_THROWS_AS(Mdp(st, 0), ModelError);
    }
    SUBCASE("renormalization within tolerance, zero entries dropped, duplicates merged") {
        std::vector<StateSpec> st(2);
        st[0].actions = {{"a", 0.0, {{1, 0.5}, {1, 0.5 - 5e-10}, {0, 0.0}}}};
        st[1] = absorbing(1);
        const Mdp m(st, 0);
        REQUIRE(m.action(0, 0).successors.size() == 1);
        CHECK(m.action(0, 0).successors[0].p == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(m.num_transitions() == 2);
    }
}

TEST_CASE("strategies are validated against the model") {
    const Mdp m = fixtures::two_stage();
    CHECK_NOTHROW(Strategy::uniform(m).validate(m));
    Strategy bad({{0.5, 0.6}, {0.5, 0.5}, {1.0}, {1.0}, {1.0}});
    CHECK_THROWS_AS(bad.validate(m), StrategyMismatch);
    Strategy wrong_arity({{1.0}, {0.5, 0.5}, {1.0}, {1.0}, {1.0}});
    CHECK_THROWS_AS(wrong_arity.validate(m), StrategyMismatch);
    Strategy negative({{1.5, -0.5}, {0.5, 0.5}, {1.0}, {1.0}, {1.0}});
    CHECK_THROWS_AS(negative.validate(m), StrategyMismatch);
    CHECK_THROWS_AS(induce_mc(m, bad), StrategyMismatch);
}

TEST_CASE("pruning drops unreachable states and keeps the initial state") {
    const Mdp two_stage = fixtures::two_stage();
    CHECK(prune_unreachable(two_stage).num_states() == 5);

    auto st = two_stage.states();
    st.push_back(absorbing(5));
    const Mdp extra(st, 0);
    const PrunedMdp p = prune_unreachable_with_map(extra);
    CHECK(p.mdp.num_states() == 5);
    CHECK(p.original_id == std::vector<StateId>{0, 1, 2, 3, 4});

    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        // 40 connected states followed by 10 that only point among themselves.
        fixtures::RandomMdpShape shape;
        shape.states = 40;
        Mdp a = fixtures::random_mdp(rng, shape);
        shape.states = 10;
        Mdp b = fixtures::random_mdp(rng, shape);
        auto all = a.states();
        for (auto spec : b.states()) {
            for (auto& c : spec.actions)
                for (auto& t : c.successors) t.to += 40;
            all.push_back(spec);
        }
        const StateId init = std::uniform_int_distribution<StateId>(0, 39)(rng);
        const Mdp joined(all, init);
        const auto order = bfs_order(joined);
        const PrunedMdp pr = prune_unreachable_with_map(joined);
        CHECK(pr.original_id == order);
        CHECK(pr.mdp.num_states() == order.size());
        CHECK(pr.original_id[pr.mdp.initial()] == init);
        for (StateId s = 0; s < pr.mdp.num_states(); ++s)
            CHECK(pr.mdp.num_actions(s) == joined.num_actions(pr.original_id[s]));
    }
}

TEST_CASE("induced chain of the example") {
    const Mdp m = fixtures::two_stage();
    auto prob = [](const InducedMc& mc, StateId s, StateId t) {
        for (const auto& e : mc.rows[s])
            if (e.to == t) return e.p;
        return 0.0;
    };
    const InducedMc unif = induce_mc(m, Strategy::uniform(m));
    CHECK(prob(unif, 0, 1) == doctest::Approx(0.5));
    CHECK(prob(unif, 0, 3) == doctest::Approx(0.5));
    CHECK(prob(unif, 1, 2) == doctest::Approx(0.5));
    CHECK(prob(unif, 1, 4) == doctest::Approx(0.5));
    const InducedMc s1 = induce_mc(m, fixtures::two_stage_sigma1(m));
    CHECK(prob(s1, 0, 1) == doctest::Approx(0.6));
    CHECK(prob(s1, 1, 2) == doctest::Approx(0.6));
}

TEST_CASE("induced chains are stochastic and match the definition") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Mdp m = fixtures::random_mdp(rng, {});
        const Strategy s = fixtures::random_strategy(rng, m);
        const InducedMc mc = induce_mc(m, s);
        for (StateId x = 0; x < m.num_states(); ++x) {
            double total = 0;
            std::map<StateId, double> expect;
            for (ActionIndex a = 0; a < m.num_actions(x); ++a)
                for (const auto& t : m.action(x, a).successors) expect[t.to] += s(x, a) * t.p;
            for (const auto& e : mc.rows[x]) {
                total += e.p;
                CHECK(e.p == doctest::Approx(expect[e.to]).epsilon(1e-12));
            }
            CHECK(std::abs(total - 1.0) <= 1e-9);
        }
        // Point-mass strategies reproduce the chosen action's row.
        std::vector<ActionIndex> pick(m.num_states());
        for (StateId x = 0; x < m.num_states(); ++x) pick[x] = static_cast<ActionIndex>(m.num_actions(x) - 1);
        const InducedMc det = induce_mc(m, Strategy::deterministic(m, pick));
        for (StateId x = 0; x < m.num_states(); ++x)
            CHECK(det.rows[x].size() == m.action(x, pick[x]).successors.size());
    }
}

TEST_CASE("example reach probabilities") {
    const Mdp m = fixtures::two_stage();
    const StateSet target{2};
    CHECK(std::abs(reach_probability(induce_mc(m, fixtures::two_stage_sigma1(m)), 0, target) - 0.36) <= 1e-12);
    CHECK(std::abs(reach_probability(induce_mc(m, Strategy::uniform(m)), 0, target) - 0.25) <= 1e-12);
    CHECK(std::abs(reach_probability(induce_mc(m, fixtures::two_stage_safe(m)), 0, target) - 0.16) <= 1e-12);
}

TEST_CASE("reach probability is monotone in the target set") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const Mdp m = fixtures::random_mdp(rng, {});
        const InducedMc mc = induce_mc(m, fixtures::random_strategy(rng, m));
        StateSet small, large;
        for (StateId s = 1; s < m.num_states(); ++s) {
            const double u = std::uniform_real_distribution<double>(0, 1)(rng);
            if (u < 0.1) small.push_back(s);
            if (u < 0.3) large.push_back(s);
        }
        if (small.empty()) continue;
        const double a = reach_probability(mc, 0, small), b = reach_probability(mc, 0, large);
        CHECK(a >= -1e-12);
        CHECK(b <= 1.0 + 1e-12);
        CHECK(a <= b + 1e-12);
    }
}

TEST_CASE("Gauss-Seidel path agrees with the direct solve") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const Mdp m = fixtures::random_mdp(rng, {});
        const InducedMc mc = induce_mc(m, fixtures::random_strategy(rng, m));
        StateMask target(m.num_states(), 0);
        target[m.num_states() - 1] = 1;
        LinearSolveOptions iterative;
        iterative.direct_limit = 0;
        const auto d = reach_probabilities(mc, target);
        const auto g = reach_probabilities(mc, target, iterative);
        for (std::size_t i = 0; i < d.size(); ++i) CHECK(std::abs(d[i] - g[i]) <= 1e-8);
    }
}

TEST_CASE("expected cost") {
    SUBCASE("deterministic chain") {
        std::vector<StateSpec> st(3);
        st[0].actions = {{"go", 1.0, {{1, 1.0}}}};
        st[1].actions = {{"go", 1.0, {{2, 1.0}}}};
        st[2] = absorbing(2);
        const Mdp m(st, 0);
        const InducedMc mc = induce_mc(m, Strategy::uniform(m));
        CHECK(expected_cost(mc, mc.state_cost, 0, {2}) == doctest::Approx(2.0));
    }
    SUBCASE("geometric") {
        std::vector<StateSpec> st(2);
        st[0].actions = {{"try", 1.0, {{0, 0.5}, {1, 0.5}}}};
        st[1] = absorbing(1);
        const Mdp m(st, 0);
        const InducedMc mc = induce_mc(m, Strategy::uniform(m));
        CHECK(expected_cost(mc, mc.state_cost, 0, {1}) == doctest::Approx(2.0));
    }
    SUBCASE("goal missed with positive probability") {
        const Mdp m = fixtures::two_stage();
        const InducedMc mc = induce_mc(m, Strategy::uniform(m));
        CHECK_THROWS_AS(expected_cost(mc, mc.state_cost, 0, {2}), DivergentCost);
    }
    SUBCASE("random chains agree with value iteration") {
        std::mt19937_64 rng(13);
        int checked = 0;
        for (int trial = 0; trial < 60 && checked < 10; ++trial) {
            Mdp m = fixtures::random_mdp(rng, {});
            // Make the last state an absorbing goal that everything reaches.
            auto st = m.states();
            const StateId goal = static_cast<StateId>(st.size() - 1);
            st[goal] = absorbing(goal);
            for (StateId s = 0; s < goal; ++s)
                for (auto& c : st[s].actions) {
                    for (auto& t : c.successors) t.p *= 0.8;
                    c.successors.push_back({goal, 0.2});
                }
            m = Mdp(st, 0);
            const InducedMc mc = induce_mc(m, fixtures::random_strategy(rng, m));
            StateMask g(m.num_states(), 0);
            g[goal] = 1;
            CHECK(expected_cost(mc, mc.state_cost, 0, {goal}) ==
                  doctest::Approx(cost_by_iteration(mc, mc.state_cost, 0, g)).epsilon(1e-6));
            ++checked;
        }
        CHECK(checked == 10);
    }
}

TEST_CASE("maximal end components") {
    SUBCASE("example has three absorbing singletons") {
        const auto mecs = maximal_end_components(fixtures::two_stage());
        std::set<StateSet> got;
        for (const auto& ec : mecs) got.insert(ec.states);
        CHECK(got == std::set<StateSet>{{2}, {3}, {4}});
    }
    SUBCASE("two states looping") {
        std::vector<StateSpec> st(2);
        st[0].actions = {{"a", 0.0, {{1, 1.0}}}};
        st[1].actions = {{"b", 0.0, {{0, 1.0}}}};
        const auto mecs = maximal_end_components(Mdp(st, 0));
        REQUIRE(mecs.size() == 1);
        CHECK(mecs[0].states == StateSet{0, 1});
    }
    SUBCASE("random models agree with the refinement oracle and are closed and connected") {
        std::mt19937_64 rng(17);
        for (int trial = 0; trial < 30; ++trial) {
            fixtures::RandomMdpShape shape;
            shape.states = 30;
            shape.loop_rate = 0.3;
            const Mdp m = fixtures::random_mdp(rng, shape);
            const auto mecs = maximal_end_components(m);
            std::set<StateSet> got;
            for (const auto& ec : mecs) {
                got.insert(ec.states);
                const StateMask in = to_mask(ec.states, m.num_states());
                REQUIRE(ec.actions.size() == ec.states.size());
                for (std::size_t i = 0; i < ec.states.size(); ++i) {
                    REQUIRE(!ec.actions[i].empty());
                    for (ActionIndex a : ec.actions[i])
                        for (const auto& t : m.action(ec.states[i], a).successors) CHECK(in[t.to]);
                }
                // Uniform play over the component actions reaches every member surely.
                std::vector<std::vector<double>> dist(m.num_states());
                for (StateId s = 0; s < m.num_states(); ++s) dist[s].assign(m.num_actions(s), 0.0);
                for (StateId s = 0; s < m.num_states(); ++s) dist[s][0] = 1.0;
                for (std::size_t i = 0; i < ec.states.size(); ++i) {
                    auto& d = dist[ec.states[i]];
                    std::fill(d.begin(), d.end(), 0.0);
                    for (ActionIndex a : ec.actions[i]) d[a] = 1.0 / ec.actions[i].size();
                }
                const InducedMc mc = induce_mc(m, Strategy(dist));
                for (StateId from : ec.states)
                    for (StateId to : ec.states)
                        CHECK(reach_probability(mc, from, {to}) == doctest::Approx(1.0).epsilon(1e-9));
            }
            CHECK(got == mec_oracle(m));
        }
    }
}

TEST_CASE("occupancy of a fixed strategy") {
    SUBCASE("example under the uniform strategy") {
        const Mdp m = fixtures::two_stage();
        const OccupancyMeasure x = compute_occupancy(m, Strategy::uniform(m), {2, 3, 4}, {0, 1});
        CHECK(x.valid);
        CHECK(x.state_action[0][0] == doctest::Approx(0.5));
        CHECK(x.state_action[0][1] == doctest::Approx(0.5));
        CHECK(x.state_action[1][0] == doctest::Approx(0.25));
        CHECK(x.state_action[1][1] == doctest::Approx(0.25));
        CHECK(x.absorbed[2] == doctest::Approx(0.25));
        CHECK(x.absorbed[3] == doctest::Approx(0.5));
        CHECK(x.absorbed[4] == doctest::Approx(0.25));
    }
    SUBCASE("single path has unit flow") {
        std::vector<StateSpec> st(4);
        for (StateId s = 0; s < 3; ++s) st[s].actions = {{"go", 1.0, {{s + 1, 1.0}}}};
        st[3] = absorbing(3);
        const Mdp m(st, 0);
        const OccupancyMeasure x = compute_occupancy(m, Strategy::uniform(m), {3}, {0, 1, 2});
        for (StateId s = 0; s < 3; ++s) CHECK(x.state_action[s][0] == doctest::Approx(1.0));
        CHECK(x.absorbed[3] == doctest::Approx(1.0));
    }
    SUBCASE("trapped mass is flagged") {
        std::vector<StateSpec> st(2);
        st[0].actions = {{"stay", 0.0, {{0, 1.0}}}, {"go", 0.0, {{1, 1.0}}}};
        st[1] = absorbing(1);
        const Mdp m(st, 0);
        const ActionIndex pick[] = {0, 0};
        const OccupancyMeasure x = compute_occupancy(m, Strategy::deterministic(m, pick), {1}, {0});
        CHECK_FALSE(x.valid);
    }
}

TEST_CASE("occupancy satisfies flow balance and matches simulation") {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 5; ++trial) {
        fixtures::RandomMdpShape shape;
        shape.states = 8;
        shape.target_rate = 0.3;
        const Mdp m = fixtures::random_mdp(rng, shape);
        StateMask tmask(m.num_states(), 0);
        for (StateId s = 1; s < m.num_states(); ++s) tmask[s] = m.has_label(s, "target");
        const StateSet target = to_set(tmask);
        if (target.empty()) continue;
        StateMask back = backward_reachable(m, tmask);
        StateSet transient;
        for (StateId s = 0; s < m.num_states(); ++s)
            if (back[s] && !tmask[s]) transient.push_back(s);
        if (transient.empty() || transient[0] != 0) continue;
        const Strategy sigma = fixtures::random_strategy(rng, m);
        const OccupancyMeasure x = compute_occupancy(m, sigma, target, transient);
        REQUIRE(x.valid);

        // Flow balance on the transient states.
        const StateMask in_r = to_mask(transient, m.num_states());
        for (StateId s : transient) {
            double out = 0, in = 0;
            for (ActionIndex a = 0; a < m.num_actions(s); ++a) out += x.state_action[s][a];
            for (StateId p : transient)
                for (ActionIndex a = 0; a < m.num_actions(p); ++a)
                    for (const auto& t : m.action(p, a).successors)
                        if (t.to == s) in += t.p * x.state_action[p][a];
            CHECK(std::abs(out - in - (s == m.initial() ? 1.0 : 0.0)) <= 1e-6);
        }
        CHECK(x.total_absorbed() <= 1.0 + 1e-6);

        // Monte-Carlo visit counts.
        const int episodes = 1000000;
        std::vector<std::vector<double>> count(m.num_states());
        for (StateId s = 0; s < m.num_states(); ++s) count[s].assign(m.num_actions(s), 0.0);
        std::vector<double> absorbed(m.num_states(), 0.0);
        std::uniform_real_distribution<double> unit(0, 1);
        auto draw = [&](auto&& weights, std::size_t k) {
            double u = unit(rng), acc = 0;
            for (std::size_t i = 0; i < k; ++i) {
                acc += weights(i);
                if (u < acc) return i;
            }
            return k - 1;
        };
        for (int e = 0; e < episodes; ++e) {
            StateId s = m.initial();
            for (int guard = 0; in_r[s] && guard < 10000; ++guard) {
                const ActionIndex a = static_cast<ActionIndex>(draw([&](std::size_t i) { return sigma(s, i); }, m.num_actions(s)));
                count[s][a] += 1;
                const auto& succ = m.action(s, a).successors;
                s = succ[draw([&](std::size_t i) { return succ[i].p; }, succ.size())].to;
            }
            if (tmask[s]) absorbed[s] += 1;
        }
        for (StateId s : transient)
            for (ActionIndex a = 0; a < m.num_actions(s); ++a) {
                const double sim = count[s][a] / episodes, exact = x.state_action[s][a];
                CHECK(std::abs(sim - exact) <= 1e-2 * std::max(1.0, exact));
            }
        for (StateId s : target) CHECK(std::abs(absorbed[s] / episodes - x.absorbed[s]) <= 1e-2);
    }
}
