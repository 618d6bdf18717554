#pragma once

#include "sharedctl/mdp.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sharedctl {

class Gridworld;

struct DemoStep {
    StateId s = 0;
    ActionIndex a = 0;
};

using Episode = std::vector<DemoStep>;

struct DemonstrationSet {
    std::vector<Episode> episodes;
    std::string source = "synthetic";

    std::size_t longest() const;
    std::size_t total_steps() const;
    /// Throws ModelError when a pair is not in the model or two consecutive
    /// pairs are not linked by a positive-probability transition.
    void validate(const Mdp& mdp) const;
};

/// phi(s, a) in R^d, stored as values[s][a][k].
struct FeatureMap {
    std::vector<std::string> names;
    std::vector<std::vector<std::vector<double>>> values;

    std::size_t dim() const noexcept { return names.size(); }
    std::span<const double> at(StateId s, ActionIndex a) const { return values[s][a]; }
    void validate(const Mdp& mdp) const;
};

/// Time-varying soft-optimal policy: `steps_left[k]` acts with k steps to go
/// (index 0 unused).
struct SoftPolicy {
    std::vector<Strategy> steps_left;
    std::vector<std::vector<double>> value;
};

SoftPolicy soft_policy(const Mdp& mdp, const FeatureMap& phi, std::span<const double> w,
                       std::size_t horizon);

/// Mean per-episode sum of phi along the demonstrations.
std::vector<double> empirical_features(const DemonstrationSet& demos, const FeatureMap& phi);

/// Mean per-episode feature counts of the soft policy for `w`, started from the
/// demonstrations' initial states and run for their lengths.
std::vector<double> expected_features(const Mdp& mdp, const DemonstrationSet& demos,
                                      const FeatureMap& phi, std::span<const double> w);

/// Mean per-episode sum of rewards minus the soft value of the episode start.
/// This is the action log-likelihood up to a term with zero mean under the
/// dynamics, and its gradient is exactly empirical minus expected features.
double irl_log_likelihood(const Mdp& mdp, const DemonstrationSet& demos, const FeatureMap& phi,
                          std::span<const double> w);

/// Gradient of irl_log_likelihood: empirical minus expected feature counts.
std::vector<double> irl_gradient(const Mdp& mdp, const DemonstrationSet& demos,
                                 const FeatureMap& phi, std::span<const double> w);

enum class IrlSolver {
    /// Limited-memory quasi-Newton steps with backtracking; the first step uses `learning_rate`.
    Lbfgs,
    /// Plain ascent with step learning_rate / sqrt(t + 1).
    GradientAscent,
};

struct IrlOptions {
    /// Horizon of the returned strategy; 0 means the longest episode.
    std::size_t horizon = 0;
    double learning_rate = 0.1;
    std::size_t iterations = 2000;
    double tolerance = 1e-4;
    IrlSolver solver = IrlSolver::Lbfgs;
};

struct IrlResult {
    Strategy strategy;
    std::vector<double> weights;
    double gradient_norm = 0.0;
    std::size_t iterations = 0;
    double log_likelihood = 0.0;
};

IrlResult maxent_irl(const Mdp& mdp, const DemonstrationSet& demos, const FeatureMap& phi,
                     const IrlOptions& options = {});

/// Fixed-length episodes drawn from `policy`; each starts at a state picked
/// uniformly from `starts` (the initial state when empty).
DemonstrationSet sample_demonstrations(const Mdp& mdp, const SoftPolicy& policy, std::size_t episodes,
                                       std::size_t length, std::uint64_t seed,
                                       std::span<const StateId> starts = {});

/// Number of samples so that an empirical frequency is within gamma of the
/// true one with the given confidence (two-sided Hoeffding).
std::uint64_t sample_bound(double gamma, double confidence);

/// Distance to the nearest obstacle, distance to the target, one indicator
/// per action and wall adjacency, all in [0, 1].
FeatureMap builtin_grid_features(const Gridworld& grid);

} // namespace sharedctl
