#pragma once

#include "sharedctl/mdp.hpp"
#include "sharedctl/synthesis.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sharedctl {

struct Cell {
    int row = 0;
    int col = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

/**
 * Agent on an n x n grid with one moving obstacle confined to an m x m block.
 * With m = 1 the obstacle never moves.
 */
struct GridworldConfig {
    int n = 8;
    int m = 6;
    /// Top-left cell of the obstacle block; centered when unset.
    std::optional<Cell> region_origin;
    std::uint64_t seed = 1;
    std::vector<Cell> static_obstacles;
    std::optional<Cell> target;         // default (n-1, n-1)
    Cell agent_start{0, 0};
    std::optional<Cell> obstacle_start; // default: block origin
    /// With slip the agent reaches the intended cell with 0.7 and each of the
    /// two cells beside it with 0.15; without, it moves deterministically.
    bool agent_slip = true;

    /// Fills the defaults and throws ConfigError on inconsistent values.
    GridworldConfig resolved() const;
};

inline constexpr std::array<const char*, 4> kGridActions{"up", "down", "left", "right"};
inline constexpr double kIntendedMove = 0.7;
inline constexpr double kLateralSlip = 0.15;

class Gridworld {
public:
    explicit Gridworld(const GridworldConfig& config);

    const GridworldConfig& config() const noexcept { return cfg_; }
    const Mdp& mdp() const noexcept { return mdp_; }

    StateId state_of(Cell agent, Cell obstacle) const;
    Cell agent_cell(StateId s) const;
    Cell obstacle_cell(StateId s) const;
    bool crashed(StateId s) const;
    bool on_target(StateId s) const;

    /// Obstacle move distribution from block-local cell index.
    const std::vector<Successor>& obstacle_moves(std::size_t local) const { return obstacle_policy_[local]; }

private:
    GridworldConfig cfg_;
    Mdp mdp_;
    std::vector<std::vector<Successor>> obstacle_policy_;
};

/// Agent-only outcome distribution of `action` from `cell` (walls bounce back).
std::vector<std::pair<Cell, double>> agent_moves(int n, Cell cell, ActionIndex action, bool slip = true);

/// b(s) = clamp(reach probability of B under `human`, b_min, b_max) on the
/// states of `problem.model`.
BlendingFunction confidence_blending(const RepairProblem& problem, const Strategy& human,
                                     double b_min = 0.05, double b_max = 0.95);

} // namespace sharedctl
