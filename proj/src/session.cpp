#include "sharedctl/session.hpp"

#include "sharedctl/analysis.hpp"
#include "sharedctl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sharedctl {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t key(StateId base, AutomatonState q) {
    return (static_cast<std::uint64_t>(base) << 32) | static_cast<std::uint64_t>(q);
}

std::vector<double> reach_under(const Mdp& mdp, const Strategy& strategy, const StateSet& target) {
    if (target.empty()) return std::vector<double>(mdp.num_states(), 0.0);
    return reach_probabilities(induce_mc(mdp, strategy), to_mask(target, mdp.num_states()));
}

} // namespace

std::uint64_t CounterRng::next() {
    return splitmix64(seed_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
}

double CounterRng::uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::size_t sample_index(std::span<const double> dist, double u) {
    double total = 0.0;
    for (double p : dist) total += p;
    double acc = 0.0;
    std::size_t last = dist.size();
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] <= 0.0) continue;
        last = i;
        acc += dist[i] / total;
        if (u < acc) return i;
    }
    if (last == dist.size()) throw DomainError("cannot sample from an empty distribution");
    return last;
}

SharedControl::SharedControl(const GridworldConfig& config, ResultDocument doc, double b_min, double b_max)
    : grid(config), document(std::move(doc)) {
    std::istringstream dra_text(document.dra);
    product = build_product(grid.mdp(), parse_dra(dra_text));
    if (product.base_state != document.base_state || product.automaton_state != document.automaton_state)
        throw ModelError("result does not belong to this scenario");
    human = document.human;
    repaired = document.result.strategy;
    human.validate(product.mdp);
    repaired.validate(product.mdp);

    RepairProblem view;
    view.model = product.mdp;
    view.accepting = document.accepting;
    view.transient = document.transient;
    view.human = human;
    view.beta = document.beta;
    b = confidence_blending(view, human, b_min, b_max);
    AutonomyExtraction ex = extract_autonomy(repaired, human, b);
    autonomy = std::move(ex.autonomy);
    b = std::move(ex.adjusted);
    adjustments = std::move(ex.report);

    reach_human = reach_under(product.mdp, human, document.accepting);
    reach_repaired = reach_under(product.mdp, repaired, document.accepting);
    reach_autonomy = reach_under(product.mdp, autonomy, document.accepting);

    for (StateId k = 0; k < product.base_state.size(); ++k)
        index_.emplace(key(product.base_state[k], product.automaton_state[k]), k);
}

std::optional<StateId> SharedControl::product_state(StateId base, AutomatonState q) const {
    auto it = index_.find(key(base, q));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Session::Session(std::string id, std::shared_ptr<const SharedControl> scenario, std::uint64_t seed)
    : id_(std::move(id)), sc_(std::move(scenario)), rng_(seed), state_(sc_->product.mdp.initial()) {
    episode_start_.push_back(0);
}

std::vector<double> Session::blended(ActionIndex command) const {
    const std::size_t na = sc_->product.mdp.num_actions(state_);
    if (command >= na) throw DomainError("action " + std::to_string(command) + " is not enabled here");
    const double w = sc_->b[state_];
    const auto auto_dist = sc_->autonomy.at(state_);
    std::vector<double> out(na);
    for (std::size_t a = 0; a < na; ++a) out[a] = (1.0 - w) * auto_dist[a] + (a == command ? w : 0.0);
    return out;
}

StepRecord Session::step(ActionIndex command) {
    if (finished_) throw DomainError("episode is over; reset the session");
    const Mdp& mdp = sc_->product.mdp;
    StepRecord rec;
    rec.state = state_;
    rec.command = command;
    rec.blended = blended(command);
    rec.b = sc_->b[state_];
    const auto rep = sc_->repaired.at(state_), hum = sc_->human.at(state_);
    for (std::size_t a = 0; a < rep.size(); ++a)
        rec.deviation_here = std::max(rec.deviation_here, std::abs(rep[a] - hum[a]));
    rec.sampled = static_cast<ActionIndex>(sample_index(rec.blended, rng_.uniform()));
    const auto& succ = mdp.action(state_, rec.sampled).successors;
    std::vector<double> p(succ.size());
    for (std::size_t i = 0; i < succ.size(); ++i) p[i] = succ[i].p;
    rec.next = succ[sample_index(p, rng_.uniform())].to;
    const StateId base = sc_->product.base_state[rec.next];
    rec.crash = sc_->grid.crashed(base);
    rec.target = sc_->grid.on_target(base);
    state_ = rec.next;
    finished_ = rec.crash || rec.target;
    log_.push_back(rec);
    return rec;
}

void Session::reset() {
    state_ = sc_->product.mdp.initial();
    finished_ = false;
    if (episode_start_.back() != log_.size()) episode_start_.push_back(log_.size());
}

DemonstrationSet Session::export_demos() const {
    const Mdp& base = sc_->grid.mdp();
    const auto& bs = sc_->product.base_state;
    DemonstrationSet out;
    out.source = "session";
    for (std::size_t e = 0; e < episode_start_.size(); ++e) {
        const std::size_t lo = episode_start_[e];
        const std::size_t hi = e + 1 < episode_start_.size() ? episode_start_[e + 1] : log_.size();
        Episode cur;
        for (std::size_t i = lo; i < hi; ++i) {
            const StepRecord& r = log_[i];
            if (!cur.empty()) {
                const DemoStep& prev = cur.back();
                bool linked = false;
                for (const auto& sc : base.action(prev.s, prev.a).successors) linked |= sc.to == bs[r.state];
                if (!linked) {
                    out.episodes.push_back(std::move(cur));
                    cur.clear();
                }
            }
            cur.push_back({bs[r.state], r.command});
        }
        if (!cur.empty()) out.episodes.push_back(std::move(cur));
    }
    return out;
}

} // namespace sharedctl
