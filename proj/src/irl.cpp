#include "sharedctl/irl.hpp"

#include "sharedctl/errors.hpp"
#include "sharedctl/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace sharedctl {

namespace {

void check_weights(const FeatureMap& phi, std::span<const double> w) {
    if (w.size() != phi.dim())
        throw DomainError("weight vector has " + std::to_string(w.size()) + " entries, features have " +
                          std::to_string(phi.dim()));
    for (double v : w)
        if (!std::isfinite(v)) throw NonFinite("IRL weights became non-finite");
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <class Weights>
std::size_t draw(std::mt19937_64& rng, const Weights& weights, std::size_t count) {
    double u = unit(rng);
    for (std::size_t k = 0; k + 1 < count; ++k) {
        u -= weights(k);
        if (u < 0) return k;
    }
    return count - 1;
}

void require_demos(const DemonstrationSet& demos) {
    if (demos.episodes.empty()) throw DomainError("no demonstrations");
    for (const auto& e : demos.episodes)
        if (e.empty()) throw DomainError("empty demonstration episode");
}

} // namespace

std::size_t DemonstrationSet::longest() const {
    std::size_t n = 0;
    for (const auto& e : episodes) n = std::max(n, e.size());
    return n;
}

std::size_t DemonstrationSet::total_steps() const {
    std::size_t n = 0;
    for (const auto& e : episodes) n += e.size();
    return n;
}

void DemonstrationSet::validate(const Mdp& mdp) const {
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const auto& e = episodes[i];
        for (std::size_t t = 0; t < e.size(); ++t) {
            const auto [s, a] = e[t];
            if (s >= mdp.num_states() || a >= mdp.num_actions(s))
                throw ModelError("episode " + std::to_string(i) + " step " + std::to_string(t) +
                                 ": no such state/action pair");
            if (t + 1 == e.size()) continue;
            const auto& succ = mdp.action(s, a).successors;
            const bool linked = std::any_of(succ.begin(), succ.end(),
                                            [&](const Successor& x) { return x.to == e[t + 1].s && x.p > 0; });
            if (!linked)
                throw ModelError("episode " + std::to_string(i) + " step " + std::to_string(t) +
                                 ": next state is not a successor");
        }
    }
}

void FeatureMap::validate(const Mdp& mdp) const {
    if (dim() == 0) throw DomainError("feature map needs at least one component");
    if (values.size() != mdp.num_states()) throw DomainError("feature map does not cover every state");
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        if (values[s].size() != mdp.num_actions(s))
            throw DomainError("feature map has wrong action count at state " + std::to_string(s));
        for (const auto& f : values[s]) {
            if (f.size() != dim()) throw DomainError("feature vector of wrong dimension at state " + std::to_string(s));
            for (double v : f)
                if (!std::isfinite(v)) throw DomainError("non-finite feature at state " + std::to_string(s));
        }
    }
}

SoftPolicy soft_policy(const Mdp& mdp, const FeatureMap& phi, std::span<const double> w,
                       std::size_t horizon) {
    check_weights(phi, w);
    const std::size_t n = mdp.num_states();
    std::vector<std::vector<double>> reward(n);
    for (StateId s = 0; s < n; ++s)
        for (ActionIndex a = 0; a < mdp.num_actions(s); ++a) reward[s].push_back(dot(phi.at(s, a), w));

    SoftPolicy out;
    out.value.assign(horizon + 1, std::vector<double>(n, 0.0));
    out.steps_left.resize(horizon + 1);
    std::vector<std::vector<double>> dist(n);
    for (std::size_t k = 1; k <= horizon; ++k) {
        const auto& next = out.value[k - 1];
        auto& v = out.value[k];
        for (StateId s = 0; s < n; ++s) {
            auto& q = dist[s];
            q.assign(mdp.num_actions(s), 0.0);
            double top = -std::numeric_limits<double>::infinity();
            for (ActionIndex a = 0; a < q.size(); ++a) {
                double cont = 0;
                for (const auto& x : mdp.action(s, a).successors) cont += x.p * next[x.to];
                q[a] = reward[s][a] + cont;
                top = std::max(top, q[a]);
            }
            double z = 0;
            for (double& x : q) z += (x = std::exp(x - top));
            for (double& x : q) x /= z;
            v[s] = top + std::log(z);
        }
        out.steps_left[k] = Strategy(dist);
    }
    return out;
}

std::vector<double> empirical_features(const DemonstrationSet& demos, const FeatureMap& phi) {
    require_demos(demos);
    std::vector<double> f(phi.dim(), 0.0);
    for (const auto& e : demos.episodes)
        for (const auto& [s, a] : e) {
            const auto v = phi.at(s, a);
            for (std::size_t k = 0; k < f.size(); ++k) f[k] += v[k];
        }
    for (double& x : f) x /= static_cast<double>(demos.episodes.size());
    return f;
}

std::vector<double> expected_features(const Mdp& mdp, const DemonstrationSet& demos,
                                      const FeatureMap& phi, std::span<const double> w) {
    require_demos(demos);
    const SoftPolicy policy = soft_policy(mdp, phi, w, demos.longest());
    const std::size_t n = mdp.num_states();
    const double share = 1.0 / static_cast<double>(demos.episodes.size());

    // Episodes of equal length share one forward pass.
    std::map<std::size_t, std::vector<double>> starts;
    for (const auto& e : demos.episodes) {
        auto& d = starts[e.size()];
        if (d.empty()) d.assign(n, 0.0);
        d[e.front().s] += share;
    }
    std::vector<double> f(phi.dim(), 0.0);
    std::vector<double> next(n);
    for (auto& [length, d] : starts) {
        for (std::size_t t = 0; t < length; ++t) {
            const Strategy& pi = policy.steps_left[length - t];
            std::fill(next.begin(), next.end(), 0.0);
            for (StateId s = 0; s < n; ++s) {
                if (d[s] == 0.0) continue;
                for (ActionIndex a = 0; a < mdp.num_actions(s); ++a) {
                    const double mass = d[s] * pi(s, a);
                    if (mass == 0.0) continue;
                    const auto v = phi.at(s, a);
                    for (std::size_t k = 0; k < f.size(); ++k) f[k] += mass * v[k];
                    for (const auto& x : mdp.action(s, a).successors) next[x.to] += mass * x.p;
                }
            }
            d.swap(next);
        }
    }
    return f;
}

double irl_log_likelihood(const Mdp& mdp, const DemonstrationSet& demos, const FeatureMap& phi,
                          std::span<const double> w) {
    require_demos(demos);
    const SoftPolicy policy = soft_policy(mdp, phi, w, demos.longest());
    double ll = 0;
    for (const auto& e : demos.episodes) {
        for (const auto& [s, a] : e) ll += dot(phi.at(s, a), w);
        ll -= policy.value[e.size()][e.front().s];
    }
    return ll / static_cast<double>(demos.episodes.size());
}

std::vector<double> irl_gradient(const Mdp& mdp, const DemonstrationSet& demos, const FeatureMap& phi,
                                 std::span<const double> w) {
    auto g = empirical_features(demos, phi);
    const auto e = expected_features(mdp, demos, phi, w);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] -= e[k];
    return g;
}

namespace {

struct Evaluation {
    double ll = 0.0;
    std::vector<double> grad;
    double norm = 0.0;
};

Evaluation evaluate(const Mdp& mdp, const DemonstrationSet& demos, const FeatureMap& phi,
                    const std::vector<double>& empirical, const std::vector<double>& w) {
    Evaluation e;
    e.ll = irl_log_likelihood(mdp, demos, phi, w);
    const auto expected = expected_features(mdp, demos, phi, w);
    e.grad.resize(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        e.grad[k] = empirical[k] - expected[k];
        e.norm = std::max(e.norm, std::abs(e.grad[k]));
    }
    return e;
}

} // namespace

IrlResult maxent_irl(const Mdp& mdp, const DemonstrationSet& demos, const FeatureMap& phi,
                     const IrlOptions& options) {
    require_demos(demos);
    phi.validate(mdp);
    demos.validate(mdp);
    const std::size_t horizon = options.horizon == 0 ? demos.longest() : options.horizon;
    if (horizon < demos.longest())
        throw DomainError("horizon " + std::to_string(horizon) + " is shorter than the longest episode (" +
                          std::to_string(demos.longest()) + ")");
    if (!(options.learning_rate > 0)) throw DomainError("learning rate must be positive");

    const std::size_t d = phi.dim();
    const auto empirical = empirical_features(demos, phi);
    IrlResult r;
    r.weights.assign(d, 0.0);
    Evaluation cur = evaluate(mdp, demos, phi, empirical, r.weights);

    // Limited-memory quasi-Newton ascent on the concave log-likelihood.
    constexpr std::size_t kMemory = 8;
    std::vector<std::vector<double>> s_hist, y_hist;
    std::vector<double> rho_hist;
    std::size_t it = 0;
    for (; it < options.iterations && cur.norm >= options.tolerance; ++it) {
        std::vector<double> dir = cur.grad;
        if (options.solver == IrlSolver::Lbfgs && !s_hist.empty()) {
            std::vector<double> alpha(s_hist.size());
            for (std::size_t j = s_hist.size(); j-- > 0;) {
                alpha[j] = rho_hist[j] * dot(s_hist[j], dir);
                for (std::size_t k = 0; k < d; ++k) dir[k] -= alpha[j] * y_hist[j][k];
            }
            const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
            for (double& x : dir) x *= gamma;
            for (std::size_t j = 0; j < s_hist.size(); ++j) {
                const double beta = rho_hist[j] * dot(y_hist[j], dir);
                for (std::size_t k = 0; k < d; ++k) dir[k] += (alpha[j] - beta) * s_hist[j][k];
            }
        }
        double step = options.solver == IrlSolver::Lbfgs && !s_hist.empty()
                          ? 1.0
                          : options.learning_rate / std::sqrt(static_cast<double>(it) + 1.0);
        const double slope = dot(cur.grad, dir);
        if (!(slope > 0)) {
            dir = cur.grad;
            s_hist.clear(), y_hist.clear(), rho_hist.clear();
        }
        std::vector<double> w(d);
        Evaluation next;
        for (int tries = 0;; ++tries) {
            for (std::size_t k = 0; k < d; ++k) w[k] = r.weights[k] + step * dir[k];
            check_weights(phi, w);
            next = evaluate(mdp, demos, phi, empirical, w);
            if (options.solver == IrlSolver::GradientAscent) break;
            if (next.ll >= cur.ll + 1e-4 * step * dot(cur.grad, dir) || tries == 40) break;
            step *= 0.5;
        }
        std::vector<double> s(d), y(d);
        for (std::size_t k = 0; k < d; ++k) {
            s[k] = w[k] - r.weights[k];
            y[k] = cur.grad[k] - next.grad[k];
        }
        const double sy = dot(s, y);
        if (sy > 1e-12) {
            if (s_hist.size() == kMemory) {
                s_hist.erase(s_hist.begin()), y_hist.erase(y_hist.begin()), rho_hist.erase(rho_hist.begin());
            }
            s_hist.push_back(std::move(s)), y_hist.push_back(std::move(y)), rho_hist.push_back(1.0 / sy);
        }
        r.weights = std::move(w);
        cur = std::move(next);
    }
    r.iterations = it;
    r.gradient_norm = cur.norm;
    r.log_likelihood = cur.ll;
    r.strategy = soft_policy(mdp, phi, r.weights, horizon).steps_left[horizon];
    return r;
}

DemonstrationSet sample_demonstrations(const Mdp& mdp, const SoftPolicy& policy, std::size_t episodes,
                                       std::size_t length, std::uint64_t seed, std::span<const StateId> starts) {
    if (length == 0 || length >= policy.steps_left.size())
        throw DomainError("episode length must be in [1, policy horizon]");
    std::mt19937_64 rng(seed);
    DemonstrationSet out;
    out.source = "synthetic";
    out.episodes.reserve(episodes);
    for (std::size_t i = 0; i < episodes; ++i) {
        StateId s = starts.empty() ? mdp.initial() : starts[rng() % starts.size()];
        Episode e;
        e.reserve(length);
        for (std::size_t t = 0; t < length; ++t) {
            const Strategy& pi = policy.steps_left[length - t];
            const auto a = static_cast<ActionIndex>(draw(rng, [&](std::size_t k) { return pi(s, k); }, mdp.num_actions(s)));
            e.push_back({s, a});
            const auto& succ = mdp.action(s, a).successors;
            s = succ[draw(rng, [&](std::size_t k) { return succ[k].p; }, succ.size())].to;
        }
        out.episodes.push_back(std::move(e));
    }
    return out;
}

std::uint64_t sample_bound(double gamma, double confidence) {
    if (!(gamma > 0 && gamma < 1)) throw DomainError("gamma must lie in (0, 1)");
    if (!(confidence > 0 && confidence < 1)) throw DomainError("confidence must lie in (0, 1)");
    return static_cast<std::uint64_t>(std::ceil(std::log(2.0 / (1.0 - confidence)) / (2.0 * gamma * gamma)));
}

FeatureMap builtin_grid_features(const Gridworld& grid) {
    const auto& cfg = grid.config();
    const Mdp& mdp = grid.mdp();
    const int n = cfg.n;
    const double scale = 1.0 / (2.0 * (n - 1));
    auto manhattan = [](Cell a, Cell b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); };

    FeatureMap phi;
    phi.names = {"obstacle_distance", "target_distance", "up", "down", "left", "right", "wall"};
    phi.values.resize(mdp.num_states());
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        const Cell agent = grid.agent_cell(s);
        int nearest = manhattan(agent, grid.obstacle_cell(s));
        for (Cell c : cfg.static_obstacles) nearest = std::min(nearest, manhattan(agent, c));
        const double wall = (agent.row == 0 || agent.col == 0 || agent.row == n - 1 || agent.col == n - 1) ? 1.0 : 0.0;
        for (ActionIndex a = 0; a < mdp.num_actions(s); ++a) {
            std::vector<double> f(phi.names.size(), 0.0);
            f[0] = nearest * scale;
            f[1] = manhattan(agent, *cfg.target) * scale;
            f[2 + a] = 1.0;
            f[6] = wall;
            phi.values[s].push_back(std::move(f));
        }
    }
    return phi;
}

} // namespace sharedctl
