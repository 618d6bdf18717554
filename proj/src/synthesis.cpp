#include "sharedctl/synthesis.hpp"

#include "sharedctl/analysis.hpp"
#include "sharedctl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sharedctl {

const char* to_string(Method method) {
    switch (method) {
    case Method::Qcp: return "qcp";
    case Method::Greedy: return "greedy";
    case Method::OccInf: return "occ_inf";
    case Method::MaxSat: return "max_sat";
    }
    return "?";
}

const char* to_string(FeasibilityEngine engine) {
    switch (engine) {
    case FeasibilityEngine::Auto: return "auto";
    case FeasibilityEngine::Lp: return "lp";
    case FeasibilityEngine::BoxIteration: return "box";
    }
    return "?";
}

void RepairProblem::validate() const {
    const std::size_t n = model.num_states();
    if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("threshold must lie in [0,1]");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("bisection accuracy must lie in (0,1)");
    human.validate(model);
    StateMask seen(n, 0);
    for (StateId s : accepting) {
        if (s >= n) throw DomainError("accepting state out of range");
        seen[s] = 1;
    }
    for (StateId s : transient) {
        if (s >= n) throw DomainError("transient state out of range");
        if (seen[s]) throw DomainError("state " + std::to_string(s) + " is both in B and S_r");
    }
    for (const auto& r : reach) {
        if (!(r.lambda >= 0.0 && r.lambda <= 1.0)) throw DomainError("reach threshold must lie in [0,1]");
        for (StateId s : r.through)
            if (s >= n) throw DomainError("reach constraint state out of range");
    }
    for (const auto& c : cost) {
        if (!(c.kappa >= 0.0)) throw DomainError("cost bound must be non-negative");
        for (StateId s : c.goal)
            if (s >= n) throw DomainError("cost constraint state out of range");
    }
}

RepairProblem make_repair_problem(const ProductMdp& product, const Strategy& human, double beta) {
    RepairProblem p;
    p.components = accepting_end_components(product);
    const auto rel = relevant_states(product, p.components);
    p.model = absorb_end_components(product, p.components).mdp;
    p.accepting = rel.accepting;
    p.transient = rel.transient;
    p.human = human;
    p.beta = beta;
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------

OccupancyProgram::OccupancyProgram(const RepairProblem& problem, bool with_threshold,
                                   bool with_extras)
    : p_(problem) {
    const Mdp& m = p_.model;
    const std::size_t n = m.num_states();
    in_b_ = to_mask(p_.accepting, n);
    in_r_ = to_mask(p_.transient, n);
    sa_.resize(n);
    b_var_.assign(n, static_cast<std::size_t>(-1));

    for (StateId s : p_.transient)
        for (ActionIndex a = 0; a < m.num_actions(s); ++a)
            sa_[s].push_back(lp_.add_variable(0.0, kInf, 0.0,
                                              "x_" + std::to_string(s) + "_" + std::to_string(a)));

    std::vector<std::vector<Term>> inflow(n);
    for (StateId s : p_.transient)
        for (ActionIndex a = 0; a < m.num_actions(s); ++a)
            for (const auto& t : m.action(s, a).successors)
                if (in_r_[t.to] || in_b_[t.to]) inflow[t.to].push_back({sa_[s][a], t.p});

    const StateId init = m.initial();
    for (StateId s : p_.accepting)
        if (!inflow[s].empty() || s == init) {
            b_var_[s] = lp_.add_variable(0.0, 1.0, 0.0, "xb_" + std::to_string(s));
            b_entered_.push_back(s);
        }

    for (StateId s : p_.transient) {
        std::vector<Term> row;
        for (std::size_t v : sa_[s]) row.push_back({v, 1.0});
        for (const auto& t : inflow[s]) row.push_back({t.var, -t.coef});
        lp_.add_row(std::move(row), Relation::Equal, s == init ? 1.0 : 0.0, "flow_" + std::to_string(s));
    }
    for (StateId s : b_entered_) {
        std::vector<Term> row{{b_var_[s], 1.0}};
        for (const auto& t : inflow[s]) row.push_back({t.var, -t.coef});
        lp_.add_row(std::move(row), Relation::Equal, s == init ? 1.0 : 0.0, "absorb_" + std::to_string(s));
    }

    if (with_threshold) {
        std::vector<Term> row;
        for (StateId s : b_entered_) row.push_back({b_var_[s], 1.0});
        lp_.add_row(std::move(row), Relation::GreaterEqual, p_.beta, "threshold");
    }
    if (with_extras) {
        for (const auto& r : p_.reach) add_reachability_constraint(r);
        for (const auto& c : p_.cost) add_expected_cost_constraint(c);
    }
}

void OccupancyProgram::add_deviation_rows(double delta) {
    const Mdp& m = p_.model;
    for (StateId s : p_.transient) {
        const std::size_t k = m.num_actions(s);
        if (k < 2) continue;
        const auto h = p_.human.at(s);
        for (ActionIndex a = 0; a < k; ++a) {
            const double hi = h[a] + delta, lo = h[a] - delta;
            std::vector<Term> upper, lower;
            for (ActionIndex b = 0; b < k; ++b) {
                const double own = b == a ? 1.0 : 0.0;
                upper.push_back({sa_[s][b], own - hi});
                lower.push_back({sa_[s][b], own - lo});
            }
            lp_.add_row(std::move(upper), Relation::LessEqual, 0.0);
            lp_.add_row(std::move(lower), Relation::GreaterEqual, 0.0);
        }
    }
}

void OccupancyProgram::maximize_satisfaction() {
    for (StateId s : b_entered_) lp_.set_cost(b_var_[s], 1.0);
    lp_.set_sense(Sense::Maximize);
}

std::size_t OccupancyProgram::add_occupancy_gap(const OccupancyMeasure& target) {
    const std::size_t t = lp_.add_variable(0.0, kInf, 1.0, "gap");
    for (StateId s : p_.transient)
        for (ActionIndex a = 0; a < sa_[s].size(); ++a) {
            const double v = target.state_action[s][a];
            lp_.add_row({{sa_[s][a], 1.0}, {t, -1.0}}, Relation::LessEqual, v);
            lp_.add_row({{sa_[s][a], 1.0}, {t, 1.0}}, Relation::GreaterEqual, v);
        }
    return t;
}

void OccupancyProgram::add_reachability_constraint(const ReachConstraint& c) {
    // B states that cannot be entered without passing through `through`.
    const Mdp& m = p_.model;
    const StateMask gate = to_mask(c.through, m.num_states());
    StateMask free_reach(m.num_states(), 0);
    std::vector<StateId> stack;
    if (!gate[m.initial()]) {
        free_reach[m.initial()] = 1;
        stack.push_back(m.initial());
    }
    while (!stack.empty()) {
        const StateId s = stack.back();
        stack.pop_back();
        for (const auto& ch : m.actions(s))
            for (const auto& t : ch.successors)
                if (!free_reach[t.to] && !gate[t.to]) {
                    free_reach[t.to] = 1;
                    stack.push_back(t.to);
                }
    }
    std::vector<Term> row;
    for (StateId s : b_entered_)
        if (!free_reach[s]) row.push_back({b_var_[s], 1.0});
    lp_.add_row(std::move(row), Relation::GreaterEqual, c.lambda, "reach");
}

void OccupancyProgram::add_expected_cost_constraint(const CostConstraint& c) {
    const StateMask goal = to_mask(c.goal, p_.model.num_states());
    std::vector<Term> row;
    for (StateId s : p_.transient) {
        if (goal[s]) continue;
        for (ActionIndex a = 0; a < sa_[s].size(); ++a) {
            const double cost = p_.model.action(s, a).cost;
            if (cost != 0.0) row.push_back({sa_[s][a], cost});
        }
    }
    lp_.add_row(std::move(row), Relation::LessEqual, c.kappa, "cost");
}

double OccupancyProgram::flow(const std::vector<double>& values, StateId s) const {
    double y = 0;
    for (std::size_t v : sa_[s]) y += std::max(0.0, values[v]);
    return y;
}

namespace {

// Closest point of the box [h - cap, h + cap] within the simplex, by clamping
// and spreading the remaining mass proportionally to the available room.
void project_to_box(std::vector<double>& sigma, std::span<const double> h, double cap) {
    const std::size_t k = sigma.size();
    std::vector<double> lo(k), hi(k);
    double sum = 0;
    for (std::size_t a = 0; a < k; ++a) {
        lo[a] = std::max(0.0, h[a] - cap);
        hi[a] = std::min(1.0, h[a] + cap);
        sigma[a] = std::clamp(sigma[a], lo[a], hi[a]);
        sum += sigma[a];
    }
    double room = 0;
    for (std::size_t a = 0; a < k; ++a) room += sum < 1.0 ? hi[a] - sigma[a] : sigma[a] - lo[a];
    if (room <= 0.0) return;
    const double need = 1.0 - sum;
    for (std::size_t a = 0; a < k; ++a)
        sigma[a] += need * (sum < 1.0 ? hi[a] - sigma[a] : sigma[a] - lo[a]) / room;
}

constexpr double kZeroFlow = 1e-10;

// Inside B: stay in the accepting component (uniform over its actions).
void settle_accepting(const RepairProblem& p, const StateMask& in_b, std::vector<std::vector<double>>& dist) {
    StateMask done(in_b.size(), 0);
    for (const auto& ec : p.components)
        for (std::size_t i = 0; i < ec.states.size(); ++i) {
            const StateId s = ec.states[i];
            if (!in_b[s] || done[s]) continue;
            done[s] = 1;
            auto& d = dist[s];
            std::fill(d.begin(), d.end(), 0.0);
            for (ActionIndex a : ec.actions[i]) d[a] = 1.0 / static_cast<double>(ec.actions[i].size());
        }
    for (StateId s : p.accepting) {
        if (done[s]) continue;
        auto& d = dist[s];
        std::fill(d.begin(), d.end(), 1.0 / static_cast<double>(d.size()));
    }
}

} // namespace

Strategy OccupancyProgram::extract(const std::vector<double>& values, double delta_cap) const {
    const Mdp& m = p_.model;
    const std::size_t n = m.num_states();
    std::vector<std::vector<double>> dist(n);
    for (StateId s = 0; s < n; ++s) {
        const auto h = p_.human.at(s);
        dist[s].assign(h.begin(), h.end());
    }
    for (StateId s : p_.transient) {
        const double y = flow(values, s);
        if (y <= kZeroFlow) continue;
        auto& d = dist[s];
        for (ActionIndex a = 0; a < d.size(); ++a) d[a] = std::max(0.0, values[sa_[s][a]]) / y;
        const auto h = p_.human.at(s);
        double dev = 0;
        for (ActionIndex a = 0; a < d.size(); ++a) dev = std::max(dev, std::abs(d[a] - h[a]));
        if (dev > delta_cap + 1e-9) project_to_box(d, h, delta_cap);
    }
    settle_accepting(p_, in_b_, dist);
    return Strategy(std::move(dist));
}

OccupancyMeasure OccupancyProgram::occupancy(const std::vector<double>& values) const {
    const std::size_t n = p_.model.num_states();
    OccupancyMeasure occ;
    occ.transient = in_r_;
    occ.target = in_b_;
    occ.absorbed.assign(n, 0.0);
    occ.state_action.resize(n);
    for (StateId s = 0; s < n; ++s) occ.state_action[s].assign(p_.model.num_actions(s), 0.0);
    for (StateId s : p_.transient)
        for (ActionIndex a = 0; a < sa_[s].size(); ++a)
            occ.state_action[s][a] = std::max(0.0, values[sa_[s][a]]);
    for (StateId s : b_entered_) occ.absorbed[s] = std::clamp(values[b_var_[s]], 0.0, 1.0);
    return occ;
}

// ---------------------------------------------------------------------------

double max_deviation(const Strategy& s1, const Strategy& s2, const StateSet* scope) {
    if (s1.num_states() != s2.num_states())
        throw StrategyMismatch("strategies cover different state counts");
    auto one = [&](StateId s) {
        const auto a = s1.at(s), b = s2.at(s);
        if (a.size() != b.size())
            throw StrategyMismatch("strategies disagree on the actions of state " + std::to_string(s));
        double dev = 0;
        for (std::size_t i = 0; i < a.size(); ++i) dev = std::max(dev, std::abs(a[i] - b[i]));
        return dev;
    };
    double dev = 0;
    if (scope) {
        for (StateId s : *scope) dev = std::max(dev, one(s));
    } else {
        for (StateId s = 0; s < s1.num_states(); ++s) dev = std::max(dev, one(s));
    }
    return dev;
}

Verification verify(const RepairProblem& problem, const Strategy& strategy, VerifyMode mode) {
    Verification v;
    if (!problem.accepting.empty()) {
        const InducedMc mc = induce_mc(problem.model, strategy);
        v.probability = reach_probability(mc, problem.model.initial(), problem.accepting);
    }
    v.pass = mode == VerifyMode::AtLeast ? v.probability >= problem.beta - kVerifyMargin
                                         : v.probability <= problem.beta + kVerifyMargin;
    return v;
}

MaxSatisfaction max_satisfaction_lp(const RepairProblem& problem, const SynthesisOptions& options) {
    problem.validate();
    OccupancyProgram prog(problem, false, true);
    prog.maximize_satisfaction();
    const LpOutcome out = options.backend(prog.lp(), false, options.lp);
    if (out.status == LpStatus::Infeasible) {
        if (problem.reach.empty() && problem.cost.empty())
            throw InfeasibleModel("occupancy constraints admit no solution");
        throw SpecInfeasible("the additional reach/cost constraints cannot be met",
                             std::numeric_limits<double>::quiet_NaN());
    }
    if (out.status != LpStatus::Optimal)
        throw NumericalBreakdown(std::string("maximal satisfaction LP ended ") + to_string(out.status));
    MaxSatisfaction ms;
    ms.lp_objective = out.objective;
    ms.strategy = prog.extract(out.values);
    ms.occupancy = prog.occupancy(out.values);
    ms.probability = verify(problem, ms.strategy).probability;
    return ms;
}

namespace {

// Best point of {l <= sigma <= u, sum sigma = 1} for the values q: start at the
// lower bounds and pour the remaining mass into the best actions first.
void fill_box(std::span<const double> h, double delta, const std::vector<double>& q, std::vector<double>& out) {
    const std::size_t k = h.size();
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return q[a] > q[b]; });
    out.resize(k);
    double left = 1.0;
    for (std::size_t a = 0; a < k; ++a) {
        out[a] = std::max(0.0, h[a] - delta);
        left -= out[a];
    }
    for (std::size_t a : order) {
        if (left <= 0.0) break;
        const double add = std::min(left, std::min(1.0, h[a] + delta) - out[a]);
        out[a] += add;
        left -= add;
    }
}

} // namespace

BoxReachability max_reach_in_box(const RepairProblem& problem, double delta) {
    if (!(delta >= 0.0 && delta <= 1.0)) throw DomainError("deviation bound must lie in [0,1]");
    const Mdp& m = problem.model;
    const std::size_t n = m.num_states();
    const StateMask in_b = to_mask(problem.accepting, n);
    std::vector<std::vector<double>> dist = problem.human.data();
    settle_accepting(problem, in_b, dist);

    auto evaluate = [&] {
        if (problem.accepting.empty()) return std::vector<double>(n, 0.0);
        return reach_probabilities(induce_mc(m, Strategy(dist)), in_b);
    };
    BoxReachability out;
    std::vector<double> v = evaluate(), q, cand;
    // Switching only on strict improvement keeps the values monotone and
    // never closes a cycle that avoids B.
    for (;; ++out.iterations) {
        if (out.iterations > 10 * n + 100) throw NumericalBreakdown("policy iteration did not settle");
        bool changed = false;
        for (StateId s : problem.transient) {
            const std::size_t k = m.num_actions(s);
            if (k < 2) continue;
            q.assign(k, 0.0);
            for (ActionIndex a = 0; a < k; ++a)
                for (const auto& t : m.action(s, a).successors) q[a] += t.p * v[t.to];
            fill_box(problem.human.at(s), delta, q, cand);
            double now = 0, next = 0;
            for (ActionIndex a = 0; a < k; ++a) {
                now += dist[s][a] * q[a];
                next += cand[a] * q[a];
            }
            if (next > now + 1e-12) {
                dist[s] = cand;
                changed = true;
            }
        }
        if (!changed) break;
        v = evaluate();
    }
    out.probability = v[m.initial()];
    out.strategy = Strategy(std::move(dist));
    return out;
}

LpOutcome repair_feasibility(const RepairProblem& problem, double delta,
                             const SynthesisOptions& options) {
    if (!(delta >= 0.0 && delta <= 1.0)) throw DomainError("deviation bound must lie in [0,1]");
    OccupancyProgram prog(problem, true, true);
    prog.add_deviation_rows(delta);
    return options.backend(prog.lp(), true, options.lp);
}

namespace {

bool feasible(LpStatus s) { return s == LpStatus::Feasible || s == LpStatus::Optimal; }

SynthesisResult finish(const RepairProblem& problem, SynthesisResult r) {
    r.probability = verify(problem, r.strategy).probability;
    r.full_deviation = max_deviation(problem.human, r.strategy);
    return r;
}

// Shared prologue: reject unreachable thresholds, report achievable maximum.
MaxSatisfaction require_satisfiable(const RepairProblem& problem, const SynthesisOptions& options) {
    problem.validate();
    MaxSatisfaction ms = max_satisfaction_lp(problem, options);
    if (ms.lp_objective < problem.beta - kVerifyMargin)
        throw SpecInfeasible("threshold " + std::to_string(problem.beta) +
                                 " exceeds the achievable maximum " + std::to_string(ms.lp_objective),
                             ms.lp_objective);
    return ms;
}

} // namespace

namespace {

FeasibilityEngine pick_engine(const RepairProblem& problem, const SynthesisOptions& options) {
    if (options.engine != FeasibilityEngine::Auto) {
        if (options.engine == FeasibilityEngine::BoxIteration && (!problem.reach.empty() || !problem.cost.empty()))
            throw DomainError("box iteration cannot enforce reach or cost constraints");
        return options.engine;
    }
    return problem.reach.empty() && problem.cost.empty() ? FeasibilityEngine::BoxIteration : FeasibilityEngine::Lp;
}

// Feasibility probes at successive deviation bounds, sharing the LP skeleton
// and the simplex basis between calls.
class Prober {
public:
    Prober(const RepairProblem& problem, const SynthesisOptions& options)
        : p_(problem), opt_(options), engine_(pick_engine(problem, options)), base_(problem, true, true) {}

    FeasibilityEngine engine() const noexcept { return engine_; }

    // Returns whether `delta` is feasible; on success the strategy and
    // occupancy of the witness are stored.
    bool probe(double delta, SynthesisResult& r) {
        if (engine_ == FeasibilityEngine::BoxIteration) {
            BoxReachability box = max_reach_in_box(p_, delta);
            r.policy_iterations += box.iterations;
            const bool ok = box.probability >= p_.beta - 1e-9;
            if (ok) {
                r.strategy = std::move(box.strategy);
                r.occupancy = compute_occupancy(p_.model, r.strategy, p_.accepting, p_.transient);
            }
            return ok;
        }
        OccupancyProgram prog = base_;
        prog.add_deviation_rows(delta);
        LpOptions lp_opt = opt_.lp;
        if (opt_.warm_start && !basis_.basic.empty()) lp_opt.warm_start = &basis_;
        LpOutcome out = opt_.backend(prog.lp(), true, lp_opt);
        r.lp_iterations += out.iterations;
        const bool ok = feasible(out.status);
        if (ok) {
            r.strategy = base_.extract(out.values, delta);
            r.occupancy = base_.occupancy(out.values);
        }
        basis_ = std::move(out.basis);
        return ok;
    }

private:
    const RepairProblem& p_;
    const SynthesisOptions& opt_;
    FeasibilityEngine engine_;
    OccupancyProgram base_;
    Basis basis_;
};

} // namespace

SynthesisResult bisect_repair(const RepairProblem& problem, const SynthesisOptions& options) {
    const MaxSatisfaction ms = require_satisfiable(problem, options);
    SynthesisResult r;
    r.method = Method::Qcp;
    Prober prober(problem, options);
    r.engine = prober.engine();

    const Verification human = verify(problem, problem.human);
    if (human.pass) {
        r.strategy = problem.human;
        r.delta_hat = 0.0;
        r.lower = r.upper = 0.0;
        r.occupancy = compute_occupancy(problem.model, problem.human, problem.accepting, problem.transient);
        return finish(problem, std::move(r));
    }

    SynthesisResult witness;
    bool have_witness = false;
    double l = 0.0, u = 1.0;
    while (u - l > problem.epsilon) {
        const double delta = 0.5 * (l + u);
        const bool ok = prober.probe(delta, witness);
        r.iterations.push_back({delta, ok});
        if (ok) {
            u = delta;
            r.strategy = witness.strategy;
            r.occupancy = witness.occupancy;
            have_witness = true;
        } else {
            l = delta;
        }
    }
    r.lp_iterations = witness.lp_iterations;
    r.policy_iterations = witness.policy_iterations;
    r.lower = l;
    r.upper = u;
    if (!have_witness) {
        r.strategy = ms.strategy;
        r.occupancy = ms.occupancy;
    }
    r.delta_hat = max_deviation(problem.human, r.strategy, &problem.transient);
    return finish(problem, std::move(r));
}

SynthesisResult greedy_repair(const RepairProblem& problem, const SynthesisOptions& options) {
    const double step = options.greedy_step;
    if (!(step > 0.0 && step <= 1.0)) throw DomainError("greedy step must lie in (0,1]");
    const MaxSatisfaction ms = require_satisfiable(problem, options);
    SynthesisResult r;
    r.method = Method::Greedy;
    Prober prober(problem, options);
    r.engine = prober.engine();

    const auto probes = static_cast<std::size_t>(std::ceil(1.0 / step - 1e-9));
    for (std::size_t k = 1; k <= probes; ++k) {
        const double delta = std::min(1.0, static_cast<double>(k) * step);
        const bool ok = prober.probe(delta, r);
        r.iterations.push_back({delta, ok});
        if (ok) {
            r.delta_hat = delta;
            r.lower = k > 1 ? static_cast<double>(k - 1) * step : 0.0;
            r.upper = delta;
            return finish(problem, std::move(r));
        }
    }
    // Numerically the last probe can miss the maximum by a hair; fall back on it.
    r.delta_hat = 1.0;
    r.strategy = ms.strategy;
    r.occupancy = ms.occupancy;
    return finish(problem, std::move(r));
}

SynthesisResult repair_occupancy_infnorm(const RepairProblem& problem, const SynthesisOptions& options) {
    require_satisfiable(problem, options);
    const OccupancyMeasure xh =
        compute_occupancy(problem.model, problem.human, problem.accepting, problem.transient);
    if (!xh.valid)
        throw DomainError("the human strategy keeps mass in S_r forever; its occupancy is unbounded");
    OccupancyProgram prog(problem, true, true);
    const std::size_t t = prog.add_occupancy_gap(xh);
    prog.lp().set_sense(Sense::Minimize);
    const LpOutcome out = options.backend(prog.lp(), false, options.lp);
    if (out.status != LpStatus::Optimal)
        throw NumericalBreakdown(std::string("occupancy gap LP ended ") + to_string(out.status));
    SynthesisResult r;
    r.method = Method::OccInf;
    r.lp_iterations = out.iterations;
    r.occupancy_gap = out.values[t];
    r.strategy = prog.extract(out.values);
    r.occupancy = prog.occupancy(out.values);
    r.delta_hat = max_deviation(problem.human, r.strategy, &problem.transient);
    r.lower = r.upper = r.delta_hat;
    return finish(problem, std::move(r));
}

SynthesisResult synthesize(const RepairProblem& problem, Method method, const SynthesisOptions& options) {
    switch (method) {
    case Method::Qcp: return bisect_repair(problem, options);
    case Method::Greedy: return greedy_repair(problem, options);
    case Method::OccInf: return repair_occupancy_infnorm(problem, options);
    case Method::MaxSat: {
        const MaxSatisfaction ms = max_satisfaction_lp(problem, options);
        SynthesisResult r;
        r.method = Method::MaxSat;
        r.strategy = ms.strategy;
        r.occupancy = ms.occupancy;
        r.delta_hat = max_deviation(problem.human, r.strategy, &problem.transient);
        return finish(problem, std::move(r));
    }
    }
    throw DomainError("unknown method");
}

// ---------------------------------------------------------------------------

Strategy blend(const Strategy& human, const Strategy& autonomy, const BlendingFunction& b) {
    if (human.num_states() != autonomy.num_states() || b.size() != human.num_states())
        throw StrategyMismatch("blend operands cover different state counts");
    std::vector<std::vector<double>> out(human.num_states());
    for (StateId s = 0; s < out.size(); ++s) {
        const auto h = human.at(s), a = autonomy.at(s);
        if (h.size() != a.size()) throw StrategyMismatch("blend operands disagree at state " + std::to_string(s));
        if (!(b[s] >= 0.0 && b[s] <= 1.0)) throw DomainError("blending weight outside [0,1]");
        out[s].resize(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) out[s][i] = b[s] * h[i] + (1.0 - b[s]) * a[i];
    }
    return Strategy(std::move(out));
}

AutonomyExtraction extract_autonomy(const Strategy& repaired, const Strategy& human,
                                    const BlendingFunction& b) {
    if (repaired.num_states() != human.num_states() || b.size() != human.num_states())
        throw StrategyMismatch("operands cover different state counts");
    AutonomyExtraction out;
    out.adjusted = b;
    std::vector<std::vector<double>> dist(human.num_states());
    for (StateId s = 0; s < dist.size(); ++s) {
        const auto ha = repaired.at(s), h = human.at(s);
        if (ha.size() != h.size()) throw StrategyMismatch("operands disagree at state " + std::to_string(s));
        if (!(b[s] >= 0.0 && b[s] <= 1.0)) throw DomainError("blending weight outside [0,1]");
        double diff = 0;
        for (std::size_t i = 0; i < h.size(); ++i) diff = std::max(diff, std::abs(ha[i] - h[i]));
        if (diff <= 1e-12) {
            dist[s].assign(h.begin(), h.end());
            continue;
        }
        if (b[s] >= 1.0)
            throw DegenerateBlend("state " + std::to_string(s) +
                                  ": weight 1 on the human but the repaired strategy differs");
        double w = b[s];
        for (std::size_t i = 0; i < h.size(); ++i)
            if (ha[i] - w * h[i] < 0.0) w = std::min(w, ha[i] / h[i]);
        if (w < b[s]) {
            out.report.push_back({s, b[s], w});
            out.adjusted[s] = w;
        }
        dist[s].resize(h.size());
        for (std::size_t i = 0; i < h.size(); ++i)
            dist[s][i] = std::max(0.0, (ha[i] - w * h[i]) / (1.0 - w));
    }
    out.autonomy = Strategy(std::move(dist));
    return out;
}

} // namespace sharedctl
