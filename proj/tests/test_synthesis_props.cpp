#include <doctest.h>

#include "sharedctl/analysis.hpp"
#include "sharedctl/dra.hpp"
#include "sharedctl/errors.hpp"
#include "sharedctl/product.hpp"
#include "sharedctl/synthesis.hpp"
#include "support/models.hpp"

#include <cmath>
#include <optional>
#include <random>

using namespace sharedctl;

namespace {

struct Instance {
    ProductMdp product;
    RepairProblem problem;
    double human_probability = 0.0;
    double best = 0.0;
};

double reach_of(const RepairProblem& p, const Strategy& s) {
    if (p.accepting.empty()) return 0.0;
    return reach_probabilities(induce_mc(p.model, s), to_mask(p.accepting, p.model.num_states()))[p.model.initial()];
}

// Random reach-avoid instances where the human misses a threshold that is
// still reachable; beta sits halfway between the two.
std::optional<Instance> make_instance(std::mt19937_64& rng, std::size_t states) {
    fixtures::RandomMdpShape shape;
    shape.states = states;
    shape.loop_rate = 0.2;
    const Mdp m = fixtures::random_mdp(rng, shape);
    const std::vector<std::string> ap{"crash", "target"};
    const Dra d = template_to_dra(SpecTemplate{ReachAvoid{{"crash"}, "target"}, 0.0}, ap);
    Instance in;
    in.product = build_product(m, d);
    in.problem = make_repair_problem(in.product, lift_strategy(in.product, fixtures::random_strategy(rng, m)), 0.0);
    if (in.problem.accepting.empty() || in.problem.transient.empty()) return std::nullopt;
    in.human_probability = reach_of(in.problem, in.problem.human);
    in.best = max_satisfaction_lp(in.problem).probability;
    if (in.best < in.human_probability + 0.05) return std::nullopt;
    in.problem.beta = in.human_probability + 0.5 * (in.best - in.human_probability);
    return in;
}

std::vector<Instance> instances(std::uint64_t seed, std::size_t count, std::size_t states) {
    std::mt19937_64 rng(seed);
    std::vector<Instance> out;
    for (int tries = 0; out.size() < count && tries < 1000; ++tries)
        if (auto in = make_instance(rng, states)) out.push_back(std::move(*in));
    REQUIRE(out.size() == count);
    return out;
}

double lp_box_optimum(const RepairProblem& p, double delta) {
    OccupancyProgram prog(p, false, false);
    prog.add_deviation_rows(delta);
    prog.maximize_satisfaction();
    const LpOutcome out = solve(prog.lp());
    REQUIRE(out.status == LpStatus::Optimal);
    return out.objective;
}

} // namespace

TEST_CASE("bisection result is sandwiched by the box reachability") {
    for (const Instance& in : instances(61, 15, 30)) {
        const RepairProblem& p = in.problem;
        const SynthesisResult r = synthesize(p, Method::Qcp);
        r.strategy.validate(p.model);
        const double prob = reach_of(p, r.strategy);
        CHECK(std::abs(prob - r.probability) <= 1e-9);
        CHECK(prob >= p.beta - kVerifyMargin);
        CHECK(r.upper - r.lower <= p.epsilon + 1e-12);
        CHECK(max_reach_in_box(p, r.upper).probability >= p.beta - 1e-9);
        CHECK(max_reach_in_box(p, r.lower).probability < p.beta + 1e-9);
        CHECK(std::abs(max_deviation(r.strategy, p.human, &p.transient) - r.delta_hat) <= 1e-12);
        CHECK(r.delta_hat <= r.upper + 1e-9);
        // Inside B the strategy stays in the accepting components.
        for (const auto& ec : p.components)
            for (std::size_t i = 0; i < ec.states.size(); ++i) {
                double inside = 0;
                for (ActionIndex a : ec.actions[i]) inside += r.strategy(ec.states[i], a);
                CHECK(inside == doctest::Approx(1.0));
            }
    }
}

TEST_CASE("box iteration and the occupancy LP agree on the best reach probability") {
    for (const Instance& in : instances(67, 12, 25))
        for (double delta : {0.0, 0.1, 0.3, 1.0}) {
            const double box = max_reach_in_box(in.problem, delta).probability;
            CHECK(box == doctest::Approx(lp_box_optimum(in.problem, delta)).epsilon(1e-6));
        }
}

TEST_CASE("both feasibility engines find the same deviation") {
    for (const Instance& in : instances(71, 10, 30)) {
        SynthesisOptions lp;
        lp.engine = FeasibilityEngine::Lp;
        SynthesisOptions box;
        box.engine = FeasibilityEngine::BoxIteration;
        const SynthesisResult a = synthesize(in.problem, Method::Qcp, lp);
        const SynthesisResult b = synthesize(in.problem, Method::Qcp, box);
        CHECK(a.engine == FeasibilityEngine::Lp);
        CHECK(b.engine == FeasibilityEngine::BoxIteration);
        CHECK(std::abs(a.upper - b.upper) <= 2 * in.problem.epsilon);
        CHECK(a.probability >= in.problem.beta - kVerifyMargin);
        CHECK(b.probability >= in.problem.beta - kVerifyMargin);
    }
}

TEST_CASE("bisection never deviates more than the greedy scan") {
    for (const Instance& in : instances(73, 15, 30)) {
        const SynthesisResult q = synthesize(in.problem, Method::Qcp);
        const SynthesisResult g = synthesize(in.problem, Method::Greedy);
        CHECK(g.probability >= in.problem.beta - kVerifyMargin);
        CHECK(q.upper <= g.delta_hat + in.problem.epsilon);
        const SynthesisResult o = synthesize(in.problem, Method::OccInf);
        CHECK(o.probability >= in.problem.beta - kVerifyMargin);
        const SynthesisResult s = synthesize(in.problem, Method::MaxSat);
        CHECK(s.probability == doctest::Approx(in.best).epsilon(1e-6));
    }
}

TEST_CASE("expected cost constraints hold on the returned strategy") {
    int checked = 0;
    for (Instance in : instances(79, 12, 25)) {
        const SynthesisResult free = synthesize(in.problem, Method::Qcp);
        const OccupancyMeasure occ = compute_occupancy(in.problem.model, free.strategy, in.problem.accepting,
                                                       in.problem.transient);
        double cost = 0;
        for (StateId s : in.problem.transient)
            for (ActionIndex a = 0; a < in.problem.model.num_actions(s); ++a)
                cost += occ.state_action[s][a] * in.problem.model.action(s, a).cost;
        in.problem.cost.push_back({in.problem.accepting, 0.95 * cost});
        SynthesisResult r;
        try {
            r = synthesize(in.problem, Method::Qcp);
        } catch (const SpecInfeasible&) {
            continue;
        }
        CHECK(r.engine == FeasibilityEngine::Lp);
        const OccupancyMeasure o = compute_occupancy(in.problem.model, r.strategy, in.problem.accepting,
                                                     in.problem.transient);
        double got = 0;
        for (StateId s : in.problem.transient)
            for (ActionIndex a = 0; a < in.problem.model.num_actions(s); ++a)
                got += o.state_action[s][a] * in.problem.model.action(s, a).cost;
        CHECK(got <= 0.95 * cost + 1e-6);
        CHECK(r.probability >= in.problem.beta - kVerifyMargin);
        ++checked;
    }
    CHECK(checked >= 3);
}
