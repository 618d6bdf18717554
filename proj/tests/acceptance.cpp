// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any fails.

#include "sharedctl/analysis.hpp"
#include "sharedctl/dra.hpp"
#include "sharedctl/errors.hpp"
#include "sharedctl/gridworld.hpp"
#include "sharedctl/io.hpp"
#include "sharedctl/irl.hpp"
#include "sharedctl/product.hpp"
#include "sharedctl/synthesis.hpp"
#include "support/models.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>

using namespace sharedctl;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %d: %s  %s  [%.2fs]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const std::string kFixtures = SHAREDCTL_FIXTURES;

Dra reach_avoid(const std::vector<std::string>& ap, std::vector<std::string> avoid = {"crash"}) {
    return template_to_dra(SpecTemplate{ReachAvoid{std::move(avoid), "target"}, 0.0}, ap);
}

double reach_of(const RepairProblem& p, const Strategy& s) {
    if (p.accepting.empty()) return 0.0;
    return reach_probabilities(induce_mc(p.model, s), to_mask(p.accepting, p.model.num_states()))[p.model.initial()];
}

bool lp_feasible(const RepairProblem& p, double delta) {
    const LpStatus s = repair_feasibility(p, delta).status;
    return s == LpStatus::Optimal || s == LpStatus::Feasible;
}

// Feasibility is monotone when every infeasible probe lies below every feasible one.
bool monotone(std::vector<Probe> probes) {
    double max_infeasible = -1.0, min_feasible = 2.0;
    for (const auto& p : probes) {
        if (p.feasible) min_feasible = std::min(min_feasible, p.delta);
        else max_infeasible = std::max(max_infeasible, p.delta);
    }
    return max_infeasible < min_feasible;
}

struct Instance {
    RepairProblem problem;
    std::size_t base_states = 0;
};

std::optional<Instance> random_instance(std::mt19937_64& rng, std::size_t states) {
    fixtures::RandomMdpShape shape;
    shape.states = states;
    shape.loop_rate = 0.2;
    const Mdp m = fixtures::random_mdp(rng, shape);
    const ProductMdp p = build_product(m, reach_avoid({"crash", "target"}));
    Instance in;
    in.base_states = states;
    in.problem = make_repair_problem(p, lift_strategy(p, fixtures::random_strategy(rng, m)), 0.0);
    if (in.problem.accepting.empty() || in.problem.transient.empty()) return std::nullopt;
    const double human = reach_of(in.problem, in.problem.human);
    const double best = max_satisfaction_lp(in.problem).probability;
    if (best < human + 0.05) return std::nullopt;
    in.problem.beta = human + 0.5 * (best - human);
    return in;
}

// Criterion-4 checks on one problem: trace plus random probes monotone,
// qcp no worse than greedy, verified probability.
struct PropertyCheck {
    bool monotone = true;
    bool dominance = true;
    bool verified = true;
    double qcp = 0.0;
    double greedy = 0.0;
    double probability = 0.0;
    std::size_t probes = 0;
};

PropertyCheck check_properties(const RepairProblem& p, std::mt19937_64& rng, std::size_t random_probes,
                               const SynthesisOptions& options) {
    PropertyCheck c;
    const SynthesisResult q = synthesize(p, Method::Qcp, options);
    const SynthesisResult g = synthesize(p, Method::Greedy, options);
    std::vector<Probe> probes = q.iterations;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < random_probes; ++i) {
        const double d = unit(rng);
        probes.push_back({d, options.engine == FeasibilityEngine::BoxIteration
                                 ? max_reach_in_box(p, d).probability >= p.beta - kVerifyMargin
                                 : lp_feasible(p, d)});
    }
    probes.insert(probes.end(), g.iterations.begin(), g.iterations.end());
    c.monotone = monotone(probes);
    c.qcp = q.delta_hat;
    c.greedy = g.delta_hat;
    c.dominance = q.delta_hat <= g.delta_hat;
    c.probability = verify(p, q.strategy).probability;
    c.verified = c.probability >= p.beta - 1e-6;
    c.probes = probes.size();
    return c;
}

} // namespace

int main() {
    std::printf("acceptance run\n");

    report(1, [] {
        const auto t0 = Clock::now();
        const Mdp m = parse_model(read_file(kFixtures + "/two_stage.json"));
        const Strategy s1 = parse_strategy(read_file(kFixtures + "/two_stage_sigma1.json"), m);
        const Strategy safe = parse_strategy(read_file(kFixtures + "/two_stage_safe.json"), m);
        const StateSet target{2};
        const double p1 = reach_probability(induce_mc(m, s1), m.initial(), target);
        const double pu = reach_probability(induce_mc(m, Strategy::uniform(m)), m.initial(), target);
        const double ps = reach_probability(induce_mc(m, safe), m.initial(), target);
        const double t = seconds_since(t0);
        const bool ok = std::abs(p1 - 0.36) <= 1e-9 && std::abs(pu - 0.25) <= 1e-9 && std::abs(ps - 0.16) <= 1e-9 && t < 1.0;
        return Outcome{ok, fmt("sigma1=%.12f uniform=%.12f safe=%.12f", p1, pu, ps)};
    });

    report(2, [] {
        const auto t0 = Clock::now();
        const Mdp m = parse_model(read_file(kFixtures + "/two_stage.json"));
        const ProductMdp p = build_product(m, reach_avoid({"target"}, {}));
        const RepairProblem prob = make_repair_problem(p, lift_strategy(p, Strategy::uniform(m)), 0.0);
        const MaxSatisfaction ms = max_satisfaction_lp(prob);
        // Brute force over the four deterministic choices at s0 and s1.
        double best = -1;
        ActionIndex best_a = 0, best_c = 0;
        for (ActionIndex a = 0; a < 2; ++a)
            for (ActionIndex c = 0; c < 2; ++c) {
                const ActionIndex pick[] = {a, c, 0, 0, 0};
                const double v = reach_probability(induce_mc(m, Strategy::deterministic(m, pick)), m.initial(), {2});
                if (v > best + 1e-12) best = v, best_a = a, best_c = c;
            }
        StateId k0 = 0, k1 = 0;
        for (StateId k = 0; k < p.mdp.num_states(); ++k) {
            if (p.base_state[k] == 0) k0 = k;
            if (p.base_state[k] == 1) k1 = k;
        }
        const bool same = ms.strategy(k0, best_a) > 1 - 1e-9 && ms.strategy(k1, best_c) > 1 - 1e-9;
        const bool ok = std::abs(ms.probability - 0.36) <= 1e-9 && std::abs(best - 0.36) <= 1e-12 && best_a == 0 &&
                        best_c == 0 && same && seconds_since(t0) < 1.0;
        return Outcome{ok, fmt("lp=%.12f brute=%.12f strategy=(%s,%s)", ms.probability, best,
                               m.action(0, best_a).name.c_str(), m.action(1, best_c).name.c_str())};
    });

    report(3, [] {
        const auto t0 = Clock::now();
        const Mdp m = parse_model(read_file(kFixtures + "/two_stage.json"));
        const ProductMdp p = build_product(m, reach_avoid({"target"}, {}));
        RepairProblem prob = make_repair_problem(p, lift_strategy(p, Strategy::uniform(m)), 0.3);
        prob.epsilon = 1e-4;
        const SynthesisResult r = bisect_repair(prob);
        const double closed = (std::sqrt(0.3) - 0.5) / 0.2;
        const auto bound = static_cast<std::size_t>(std::ceil(std::log2(1.0 / prob.epsilon)));
        const bool ok = std::abs(r.delta_hat - closed) <= prob.epsilon + 1e-6 && r.iterations.size() <= bound &&
                        seconds_since(t0) < 5.0;
        return Outcome{ok, fmt("delta_hat=%.6f closed_form=%.6f probes=%zu (bound %zu) probability=%.6f", r.delta_hat,
                               closed, r.iterations.size(), bound, r.probability)};
    });

    report(4, [] {
        const auto t0 = Clock::now();
        std::mt19937_64 rng(2024);
        std::uniform_int_distribution<std::size_t> size(20, 200);
        SynthesisOptions lp;
        lp.engine = FeasibilityEngine::Lp;
        int instances = 0, bad_monotone = 0, bad_dominance = 0, bad_verify = 0;
        std::size_t probes = 0, largest = 0;
        while (instances < 20) {
            auto in = random_instance(rng, size(rng));
            if (!in) continue;
            ++instances;
            largest = std::max(largest, in->base_states);
            const PropertyCheck c = check_properties(in->problem, rng, 50, lp);
            bad_monotone += c.monotone ? 0 : 1;
            bad_dominance += c.dominance ? 0 : 1;
            bad_verify += c.verified ? 0 : 1;
            probes += c.probes;
            if (!c.dominance)
                std::printf("  instance %d: qcp %.6f > greedy %.6f\n", instances, c.qcp, c.greedy);
        }
        const double t = seconds_since(t0);
        const bool ok = bad_monotone == 0 && bad_dominance == 0 && bad_verify == 0 && t < 300.0;
        return Outcome{ok, fmt("%d MDPs (largest %zu states), %zu probes, LP engine; non-monotone=%d "
                               "qcp>greedy=%d below-beta=%d",
                               instances, largest, probes, bad_monotone, bad_dominance, bad_verify)};
    });

    report(5, [] {
        GridworldConfig c8;
        c8.n = 8;
        c8.m = 6;
        GridworldConfig c10 = c8;
        c10.n = 10;
        const Gridworld g8(c8), g10(c10);
        const bool counts = g8.mdp().num_states() == 2304 && g8.mdp().num_transitions() == 36864 &&
                            g10.mdp().num_states() == 3600 && g10.mdp().num_transitions() == 57600;
        GridworldConfig d8 = c8, d10 = c10;
        d8.agent_slip = d10.agent_slip = false;
        const Gridworld h8(d8), h10(d10);
        std::printf("  info: deterministic agent moves give %zu/%zu and %zu/%zu\n", h8.mdp().num_states(),
                    h8.mdp().num_transitions(), h10.mdp().num_states(), h10.mdp().num_transitions());

        // End to end on 8x8 with a synthetic soft-optimal human.
        const auto t0 = Clock::now();
        const FeatureMap phi = builtin_grid_features(g8);
        std::vector<double> w(phi.dim(), 0.0);
        w[0] = 2.0;
        w[1] = -4.0;
        const Strategy human = soft_policy(g8.mdp(), phi, w, 20).steps_left[20];
        const ProductMdp p = build_product(g8.mdp(), reach_avoid({"crash", "target"}));
        const RepairProblem prob = make_repair_problem(p, lift_strategy(p, human), 0.7);
        const double human_p = reach_of(prob, prob.human);
        std::mt19937_64 rng(8);
        const PropertyCheck pc = check_properties(prob, rng, 10, {});
        const double t = seconds_since(t0);
        std::printf("  info: 8x8 product %zu states, B=%zu, S_r=%zu, human reaches %.4f\n", p.mdp.num_states(),
                    prob.accepting.size(), prob.transient.size(), human_p);
        const bool synth = pc.monotone && pc.dominance && pc.verified && t < 600.0;
        return Outcome{counts && synth,
                       fmt("8x8: %zu states %zu transitions, 10x10: %zu states %zu transitions (want 2304/36864, "
                           "3600/57600); synth beta=0.7 delta_hat=%.6f greedy=%.6f probability=%.6f in %.1fs%s",
                           g8.mdp().num_states(), g8.mdp().num_transitions(), g10.mdp().num_states(),
                           g10.mdp().num_transitions(), pc.qcp, pc.greedy, pc.probability, t,
                           synth ? "" : " (property failure)")};
    });

    report(6, [] {
        const std::uint64_t n = sample_bound(0.05, 0.99);
        return Outcome{n == 1060, fmt("sample_bound(0.05, 0.99)=%llu", static_cast<unsigned long long>(n))};
    });

    report(7, [] {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double worst = 0;
        int adjusted = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const Mdp m = fixtures::random_mdp(rng, {});
            const Strategy h = fixtures::random_strategy(rng, m), ha = fixtures::random_strategy(rng, m);
            BlendingFunction b(m.num_states());
            for (double& x : b) x = unit(rng) * 0.999;
            const AutonomyExtraction ex = extract_autonomy(ha, h, b);
            adjusted += static_cast<int>(ex.report.size());
            const Strategy back = blend(h, ex.autonomy, ex.adjusted);
            worst = std::max(worst, max_deviation(back, ha));
        }
        return Outcome{worst <= 1e-9, fmt("100 triples, worst |blend - repaired| = %.3g, %d weights lowered", worst,
                                          adjusted)};
    });

    report(8, [] {
        const auto t0 = Clock::now();
        GridworldConfig c;
        c.n = 5;
        c.m = 2;
        const Gridworld g(c);
        const FeatureMap phi = builtin_grid_features(g);
        std::vector<double> truth(phi.dim(), 0.0);
        truth[0] = 2.0;
        truth[1] = -4.0;
        truth[6] = -0.5;
        const std::size_t length = 10;
        const auto demos = sample_demonstrations(g.mdp(), soft_policy(g.mdp(), phi, truth, length), 10000, length, 5);
        IrlOptions opt;
        opt.tolerance = 1e-4;
        const IrlResult r = maxent_irl(g.mdp(), demos, phi, opt);
        const auto emp = empirical_features(demos, phi);
        const auto exp = expected_features(g.mdp(), demos, phi, r.weights);
        double worst = 0;
        for (std::size_t k = 0; k < emp.size(); ++k) worst = std::max(worst, std::abs(emp[k] - exp[k]));

        // Finite differences on a 3-state model.
        std::mt19937_64 rng(3);
        fixtures::RandomMdpShape shape;
        shape.states = 3;
        const Mdp m3 = fixtures::random_mdp(rng, shape);
        FeatureMap f3;
        f3.names = {"a", "b"};
        std::uniform_real_distribution<double> unit(0, 1);
        f3.values.resize(3);
        for (StateId s = 0; s < 3; ++s)
            for (ActionIndex a = 0; a < m3.num_actions(s); ++a) f3.values[s].push_back({unit(rng), unit(rng)});
        const std::vector<double> w3{0.8, -0.3};
        const auto d3 = sample_demonstrations(m3, soft_policy(m3, f3, std::vector<double>{1.0, 1.0}, 5), 50, 5, 9);
        const auto grad = irl_gradient(m3, d3, f3, w3);
        double rel = 0;
        for (std::size_t k = 0; k < 2; ++k) {
            auto wp = w3, wm = w3;
            wp[k] += 1e-6;
            wm[k] -= 1e-6;
            const double fd = (irl_log_likelihood(m3, d3, f3, wp) - irl_log_likelihood(m3, d3, f3, wm)) / 2e-6;
            rel = std::max(rel, std::abs(fd - grad[k]) / std::max(std::abs(fd), 1e-12));
        }
        const double t = seconds_since(t0);
        return Outcome{worst <= 1e-2 && rel <= 1e-4 && t < 300.0,
                       fmt("5x5, 10^4 episodes: %zu iterations, worst feature gap %.2e; gradient relative error %.2e",
                           r.iterations, worst, rel)};
    });

    report(9, [] {
        // Timed delivery on a 5x5 grid: every move costs one time unit.
        GridworldConfig c;
        c.n = 5;
        c.m = 2;
        c.seed = 4;
        const Gridworld g(c);
        const ProductMdp p = build_product(g.mdp(), reach_avoid({"crash", "target"}));
        const RepairProblem base = make_repair_problem(p, lift_strategy(p, Strategy::uniform(g.mdp())), 0.0);

        // Smallest expected time that still reaches B with probability beta.
        auto min_time = [&](double beta) {
            RepairProblem q = base;
            q.beta = beta;
            OccupancyProgram prog(q, true, false);
            const StateMask in_b = to_mask(q.accepting, q.model.num_states());
            for (StateId s : q.transient)
                for (ActionIndex a = 0; a < q.model.num_actions(s); ++a)
                    prog.lp().set_cost(prog.var(s, a), in_b[s] ? 0.0 : q.model.action(s, a).cost);
            prog.lp().set_sense(Sense::Minimize);
            return solve(prog.lp()).objective;
        };
        const double floor9 = min_time(0.9);
        const double kappas[3] = {floor9 * 1.05, floor9 * 1.3, 1e9};
        double delta[2][3];
        std::string grid;
        const double betas[2] = {0.7, 0.9};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 3; ++j) {
                RepairProblem q = base;
                q.beta = betas[i];
                q.cost.push_back({q.accepting, kappas[j]});
                const SynthesisResult r = synthesize(q, Method::Qcp);
                delta[i][j] = r.delta_hat;
                grid += fmt(" b=%.1f k=%.3g:%.4f", betas[i], kappas[j], r.delta_hat);
            }
        bool ok = true;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j + 1 < 3; ++j) ok &= delta[i][j] >= delta[i][j + 1];
        for (int j = 0; j < 3; ++j) ok &= delta[1][j] >= delta[0][j];
        return Outcome{ok, "delta_hat by beta and kappa:" + grid};
    });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
