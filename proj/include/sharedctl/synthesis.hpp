#pragma once

#include "sharedctl/lp.hpp"
#include "sharedctl/mdp.hpp"
#include "sharedctl/product.hpp"

#include <string>
#include <vector>

namespace sharedctl {

/// Probability of passing through `through` before entering B is at least `lambda`.
struct ReachConstraint {
    StateSet through;
    double lambda = 0.0;
};

/// Expected cost accumulated on S_r outside `goal` stays at or below `kappa`.
struct CostConstraint {
    StateSet goal;
    double kappa = 0.0;
};

/**
 * Strategy repair instance on an absorbed product. `accepting` (B) holds the
 * accepting end component states and `transient` (S_r) the states that can
 * still reach them. `components` are the accepting end components of the
 * unabsorbed product; they fix the strategy inside B.
 */
struct RepairProblem {
    Mdp model;
    StateSet accepting;
    StateSet transient;
    Strategy human;
    double beta = 0.0;
    double epsilon = 1e-4;
    std::vector<ReachConstraint> reach;
    std::vector<CostConstraint> cost;
    std::vector<EndComponent> components;

    /// Throws DomainError/StrategyMismatch when the fields are inconsistent.
    void validate() const;
};

/// AEC analysis, absorption and the B / S_r split of `product`, with the
/// human strategy given on product states.
RepairProblem make_repair_problem(const ProductMdp& product, const Strategy& human, double beta);

enum class Method { Qcp, Greedy, OccInf, MaxSat };
const char* to_string(Method method);

struct Probe {
    double delta = 0.0;
    bool feasible = false;
};

/// How a bisection or greedy probe decides feasibility at a given delta.
enum class FeasibilityEngine {
    /// Box iteration when the problem has no reach/cost constraints, LP otherwise.
    Auto,
    /// Occupancy LP with linearized deviation rows.
    Lp,
    /// Policy iteration over the strategies within delta of the human.
    BoxIteration,
};
const char* to_string(FeasibilityEngine engine);

struct SynthesisResult {
    Method method = Method::Qcp;
    FeasibilityEngine engine = FeasibilityEngine::Lp;
    Strategy strategy;
    /// Largest deviation from the human strategy over S_r (greedy: the probe value).
    double delta_hat = 0.0;
    /// Reach probability of B under `strategy`.
    double probability = 0.0;
    /// Bisection bracket [lower, upper] (qcp only).
    double lower = 0.0;
    double upper = 1.0;
    /// Optimal |x - x_h| bound (occ_inf only).
    double occupancy_gap = 0.0;
    /// Deviation over every state, for information.
    double full_deviation = 0.0;
    OccupancyMeasure occupancy;
    std::vector<Probe> iterations;
    std::size_t lp_iterations = 0;
    std::size_t policy_iterations = 0;
};

struct SynthesisOptions {
    double greedy_step = 0.05;
    /// Reuse the previous simplex basis between bisection probes.
    bool warm_start = true;
    FeasibilityEngine engine = FeasibilityEngine::Auto;
    LpBackend backend = default_lp_backend();
    LpOptions lp;
};

/// Margin subtracted from the threshold when checking a strategy.
inline constexpr double kVerifyMargin = 1e-6;

/// Occupancy-measure LP over S_r and the B states entered from S_r.
class OccupancyProgram {
public:
    OccupancyProgram(const RepairProblem& problem, bool with_threshold, bool with_extras);

    LinearProgram& lp() noexcept { return lp_; }
    const LinearProgram& lp() const noexcept { return lp_; }

    /// Appends the two linearized deviation rows per (s, a) for the bound `delta`.
    void add_deviation_rows(double delta);
    /// Objective: maximize the mass absorbed in B.
    void maximize_satisfaction();
    /// Appends |x(s,a) - target(s,a)| <= t over S_r and returns t.
    std::size_t add_occupancy_gap(const OccupancyMeasure& target);

    void add_reachability_constraint(const ReachConstraint& c);
    void add_expected_cost_constraint(const CostConstraint& c);

    /// sigma(s,a) = x(s,a) / sum_a x(s,a), plus the fallbacks for zero flow, B and the
    /// states outside B and S_r. Deviations above `delta_cap` caused by
    /// round-off at low-flow states are projected back onto the box.
    Strategy extract(const std::vector<double>& values, double delta_cap = 1.0) const;
    OccupancyMeasure occupancy(const std::vector<double>& values) const;

    std::size_t var(StateId s, ActionIndex a) const { return sa_[s][a]; }
    double flow(const std::vector<double>& values, StateId s) const;

private:
    const RepairProblem& p_;
    LinearProgram lp_;
    StateMask in_b_, in_r_;
    std::vector<std::vector<std::size_t>> sa_;
    std::vector<std::size_t> b_var_;
    std::vector<StateId> b_entered_;
};

struct MaxSatisfaction {
    double probability = 0.0;
    Strategy strategy;
    OccupancyMeasure occupancy;
    double lp_objective = 0.0;
};

MaxSatisfaction max_satisfaction_lp(const RepairProblem& problem,
                                    const SynthesisOptions& options = {});

struct BoxReachability {
    double probability = 0.0;
    Strategy strategy;
    std::size_t iterations = 0;
};

/// Largest probability of reaching B over the strategies that stay within
/// `delta` of the human on every S_r state, by policy iteration. Without
/// extra constraints this decides the same question as repair_feasibility.
BoxReachability max_reach_in_box(const RepairProblem& problem, double delta);

LpOutcome repair_feasibility(const RepairProblem& problem, double delta,
                             const SynthesisOptions& options = {});

SynthesisResult bisect_repair(const RepairProblem& problem, const SynthesisOptions& options = {});
SynthesisResult greedy_repair(const RepairProblem& problem, const SynthesisOptions& options = {});
SynthesisResult repair_occupancy_infnorm(const RepairProblem& problem,
                                         const SynthesisOptions& options = {});
SynthesisResult synthesize(const RepairProblem& problem, Method method,
                           const SynthesisOptions& options = {});

/// Largest |s1 - s2| over the states in `scope` (all states when null).
double max_deviation(const Strategy& s1, const Strategy& s2, const StateSet* scope = nullptr);

using BlendingFunction = std::vector<double>;

/// b(s) * human + (1 - b(s)) * autonomy, pointwise.
Strategy blend(const Strategy& human, const Strategy& autonomy, const BlendingFunction& b);

struct BlendAdjustment {
    StateId state = 0;
    double requested = 0.0;
    double adjusted = 0.0;
};

struct AutonomyExtraction {
    Strategy autonomy;
    BlendingFunction adjusted;
    std::vector<BlendAdjustment> report;
};

/// Inverts the linear blend. Where the inversion would go negative the weight
/// is lowered to the largest feasible value and reported.
AutonomyExtraction extract_autonomy(const Strategy& repaired, const Strategy& human,
                                    const BlendingFunction& b);

enum class VerifyMode { AtLeast, AtMost };

struct Verification {
    double probability = 0.0;
    bool pass = false;
};

Verification verify(const RepairProblem& problem, const Strategy& strategy,
                    VerifyMode mode = VerifyMode::AtLeast);

} // namespace sharedctl
