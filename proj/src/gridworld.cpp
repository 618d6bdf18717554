#include "sharedctl/gridworld.hpp"

#include "sharedctl/analysis.hpp"
#include "sharedctl/errors.hpp"

#include <algorithm>
#include <cstdlib>
#include <random>

namespace sharedctl {

namespace {

constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};

bool inside(int n, Cell c) { return c.row >= 0 && c.row < n && c.col >= 0 && c.col < n; }

std::string describe(Cell c) { return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")"; }

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

} // namespace

GridworldConfig GridworldConfig::resolved() const {
    GridworldConfig c = *this;
    if (c.n < 2) throw ConfigError("grid size must be at least 2");
    if (c.m < 1 || c.m > c.n) throw ConfigError("obstacle region must satisfy 1 <= m <= n");
    if (!c.target) c.target = Cell{c.n - 1, c.n - 1};
    auto free_cell = [&](Cell origin) -> std::optional<Cell> {
        for (int r = 0; r < c.m; ++r)
            for (int q = 0; q < c.m; ++q) {
                const Cell x{origin.row + r, origin.col + q};
                if (!(x == c.agent_start) && !(x == *c.target)) return x;
            }
        return std::nullopt;
    };
    if (!c.region_origin) {
        // Centered block; when it leaves the obstacle nowhere to start, the
        // nearest origin that does.
        const int mid = (c.n - c.m) / 2;
        std::vector<Cell> origins;
        for (int r = 0; r <= c.n - c.m; ++r)
            for (int q = 0; q <= c.n - c.m; ++q) origins.push_back({r, q});
        std::stable_sort(origins.begin(), origins.end(), [mid](Cell a, Cell b) {
            return std::abs(a.row - mid) + std::abs(a.col - mid) < std::abs(b.row - mid) + std::abs(b.col - mid);
        });
        c.region_origin = origins.front();
        if (!c.obstacle_start)
            for (Cell o : origins)
                if (free_cell(o)) {
                    c.region_origin = o;
                    break;
                }
    }
    if (!c.obstacle_start) c.obstacle_start = free_cell(*c.region_origin).value_or(*c.region_origin);
    const Cell o = *c.region_origin;
    if (o.row < 0 || o.col < 0 || o.row + c.m > c.n || o.col + c.m > c.n)
        throw ConfigError("obstacle region " + describe(o) + " does not fit in the grid");
    for (Cell x : {c.agent_start, *c.target})
        if (!inside(c.n, x)) throw ConfigError("cell " + describe(x) + " is outside the grid");
    for (Cell x : c.static_obstacles)
        if (!inside(c.n, x)) throw ConfigError("static obstacle " + describe(x) + " is outside the grid");
    const Cell os = *c.obstacle_start;
    if (os.row < o.row || os.col < o.col || os.row >= o.row + c.m || os.col >= o.col + c.m)
        throw ConfigError("obstacle start " + describe(os) + " lies outside its region");
    if (c.agent_start == *c.target) throw ConfigError("agent start equals the target");
    if (c.agent_start == os) throw ConfigError("agent and obstacle start on the same cell");
    for (Cell x : c.static_obstacles) {
        if (x == c.agent_start) throw ConfigError("agent starts on a static obstacle");
        if (x == *c.target) throw ConfigError("target is a static obstacle");
    }
    return c;
}

std::vector<std::pair<Cell, double>> agent_moves(int n, Cell cell, ActionIndex action, bool slip) {
    const int dr = kDr[action], dc = kDc[action];
    if (!slip) {
        const Cell to{cell.row + dr, cell.col + dc};
        return {{inside(n, to) ? to : cell, 1.0}};
    }
    // Intended cell, then the two cells beside it (perpendicular offsets).
    const Cell targets[3] = {{cell.row + dr, cell.col + dc},
                             {cell.row + dr + dc, cell.col + dc + dr},
                             {cell.row + dr - dc, cell.col + dc - dr}};
    const double weight[3] = {kIntendedMove, kLateralSlip, kLateralSlip};
    std::vector<std::pair<Cell, double>> out;
    for (int k = 0; k < 3; ++k) {
        const Cell to = inside(n, targets[k]) ? targets[k] : cell;
        auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == to; });
        if (it == out.end()) out.emplace_back(to, weight[k]);
        else it->second += weight[k];
    }
    return out;
}

Gridworld::Gridworld(const GridworldConfig& config) : cfg_(config.resolved()) {
    const int n = cfg_.n, m = cfg_.m;
    const Cell origin = *cfg_.region_origin;
    const std::size_t block = static_cast<std::size_t>(m) * m;

    std::mt19937_64 rng(cfg_.seed);
    obstacle_policy_.resize(block);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) {
            const std::size_t here = static_cast<std::size_t>(r) * m + c;
            if (m == 1) {
                obstacle_policy_[here] = {{0, 1.0}};
                continue;
            }
            std::vector<Cell> cand{{r, c}};
            for (int d = 0; d < 4; ++d) {
                const Cell x{r + kDr[d], c + kDc[d]};
                if (inside(m, x)) cand.push_back(x);
            }
            while (cand.size() > 4) cand.erase(cand.begin() + 1 + static_cast<long>(rng() % (cand.size() - 1)));
            // Corners and small blocks: fill with the nearest remaining cells.
            for (int radius = 1; cand.size() < 4 && radius < m; ++radius)
                for (int rr = r - radius; rr <= r + radius && cand.size() < 4; ++rr)
                    for (int cc = c - radius; cc <= c + radius && cand.size() < 4; ++cc) {
                        const Cell x{rr, cc};
                        if (!inside(m, x) || std::max(std::abs(rr - r), std::abs(cc - c)) != radius) continue;
                        if (std::find(cand.begin(), cand.end(), x) == cand.end()) cand.push_back(x);
                    }
            std::vector<double> w;
            double total = 0;
            for (std::size_t k = 0; k < cand.size(); ++k) {
                w.push_back(0.5 + unit(rng));
                total += w.back();
            }
            auto& moves = obstacle_policy_[here];
            for (std::size_t k = 0; k < cand.size(); ++k)
                moves.push_back({static_cast<StateId>(cand[k].row * m + cand[k].col), w[k] / total});
            std::sort(moves.begin(), moves.end(), [](const Successor& a, const Successor& b) { return a.to < b.to; });
        }

    std::vector<StateSpec> states(static_cast<std::size_t>(n) * n * block);
    for (int ar = 0; ar < n; ++ar)
        for (int ac = 0; ac < n; ++ac)
            for (std::size_t ob = 0; ob < block; ++ob) {
                const Cell agent{ar, ac};
                const Cell obstacle{origin.row + static_cast<int>(ob) / m, origin.col + static_cast<int>(ob) % m};
                const StateId s = state_of(agent, obstacle);
                auto& spec = states[s];
                const bool crash = agent == obstacle ||
                                   std::find(cfg_.static_obstacles.begin(), cfg_.static_obstacles.end(), agent) !=
                                       cfg_.static_obstacles.end();
                if (crash) spec.labels.push_back("crash");
                if (agent == *cfg_.target) spec.labels.push_back("target");
                for (ActionIndex a = 0; a < 4; ++a) {
                    Choice choice{kGridActions[a], 1.0, {}};
                    for (const auto& [to, p] : agent_moves(n, agent, a, cfg_.agent_slip))
                        for (const auto& mv : obstacle_policy_[ob]) {
                            const StateId next = static_cast<StateId>((to.row * n + to.col) * block + mv.to);
                            choice.successors.push_back({next, p * mv.p});
                        }
                    spec.actions.push_back(std::move(choice));
                }
            }
    mdp_ = Mdp(std::move(states), state_of(cfg_.agent_start, *cfg_.obstacle_start));
}

StateId Gridworld::state_of(Cell agent, Cell obstacle) const {
    const Cell o = *cfg_.region_origin;
    const int m = cfg_.m;
    const int local = (obstacle.row - o.row) * m + (obstacle.col - o.col);
    return static_cast<StateId>((agent.row * cfg_.n + agent.col) * m * m + local);
}

Cell Gridworld::agent_cell(StateId s) const {
    const int idx = static_cast<int>(s) / (cfg_.m * cfg_.m);
    return {idx / cfg_.n, idx % cfg_.n};
}

Cell Gridworld::obstacle_cell(StateId s) const {
    const int local = static_cast<int>(s) % (cfg_.m * cfg_.m);
    const Cell o = *cfg_.region_origin;
    return {o.row + local / cfg_.m, o.col + local % cfg_.m};
}

bool Gridworld::crashed(StateId s) const { return mdp_.has_label(s, "crash"); }
bool Gridworld::on_target(StateId s) const { return mdp_.has_label(s, "target"); }

BlendingFunction confidence_blending(const RepairProblem& problem, const Strategy& human,
                                     double b_min, double b_max) {
    if (!(b_min >= 0.0 && b_min <= b_max && b_max <= 1.0))
        throw DomainError("blending bounds must satisfy 0 <= b_min <= b_max <= 1");
    const std::size_t n = problem.model.num_states();
    std::vector<double> reach(n, 0.0);
    if (!problem.accepting.empty())
        reach = reach_probabilities(induce_mc(problem.model, human), to_mask(problem.accepting, n));
    BlendingFunction b(n);
    for (std::size_t s = 0; s < n; ++s) b[s] = std::clamp(reach[s], b_min, b_max);
    return b;
}

} // namespace sharedctl
