#pragma once

#include "sharedctl/gridworld.hpp"
#include "sharedctl/io.hpp"
#include "sharedctl/irl.hpp"
#include "sharedctl/product.hpp"
#include "sharedctl/synthesis.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace sharedctl {

/// Counter-based generator: draw k is splitmix64(seed + k * golden gamma).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed = 0) : seed_(seed) {}

    std::uint64_t next();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

/// Index drawn from `dist` with one uniform variate.
std::size_t sample_index(std::span<const double> dist, double u);

/**
 * Scenario shared by every session: the gridworld, its product with the
 * specification automaton, and the strategies that get blended.
 */
struct SharedControl {
    Gridworld grid;
    ProductMdp product;
    ResultDocument document;
    Strategy human;
    Strategy repaired;
    Strategy autonomy;
    BlendingFunction b;
    std::vector<BlendAdjustment> adjustments;
    /// Reach probability of B from every product state under human, repaired and autonomy.
    std::vector<double> reach_human, reach_repaired, reach_autonomy;

    SharedControl(const GridworldConfig& config, ResultDocument doc, double b_min = 0.05, double b_max = 0.95);

    std::optional<StateId> product_state(StateId base, AutomatonState q) const;

private:
    std::unordered_map<std::uint64_t, StateId> index_;
};

struct StepRecord {
    StateId state = 0;
    ActionIndex command = 0;
    std::vector<double> blended;
    ActionIndex sampled = 0;
    StateId next = 0;
    bool crash = false;
    bool target = false;
    double b = 0.0;
    double deviation_here = 0.0;
};

class Session {
public:
    Session(std::string id, std::shared_ptr<const SharedControl> scenario, std::uint64_t seed);

    const std::string& id() const noexcept { return id_; }
    const SharedControl& scenario() const noexcept { return *sc_; }
    std::uint64_t seed() const noexcept { return rng_.seed(); }
    StateId state() const noexcept { return state_; }
    bool finished() const noexcept { return finished_; }

    /// b(s) on the human command as a point mass plus (1 - b(s)) sigma_a(s).
    std::vector<double> blended(ActionIndex command) const;

    /// Throws DomainError after a crash or on the target until reset().
    StepRecord step(ActionIndex command);
    void reset();

    const std::vector<StepRecord>& log() const noexcept { return log_; }
    /// Commands as (base state, action) pairs. An episode is split where the
    /// executed action led somewhere the command could not have.
    DemonstrationSet export_demos() const;

private:
    std::string id_;
    std::shared_ptr<const SharedControl> sc_;
    CounterRng rng_;
    StateId state_;
    bool finished_ = false;
    std::vector<StepRecord> log_;
    std::vector<std::size_t> episode_start_;
};

} // namespace sharedctl
