#include "sharedctl/dra.hpp"

#include "sharedctl/errors.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace sharedctl {

Dra::Dra(std::vector<std::string> ap, AutomatonState initial,
         std::vector<std::vector<AutomatonState>> delta, std::vector<RabinPair> pairs)
    : ap_(std::move(ap)), initial_(initial), delta_(std::move(delta)), pairs_(std::move(pairs)) {
    if (ap_.size() > kMaxPropositions)
        throw ModelError("automaton has more than " + std::to_string(kMaxPropositions) +
                         " propositions");
    for (std::size_t i = 0; i < ap_.size(); ++i)
        for (std::size_t j = i + 1; j < ap_.size(); ++j)
            if (ap_[i] == ap_[j]) throw ModelError("duplicate proposition '" + ap_[i] + "'");
    if (delta_.empty()) throw ModelError("automaton has no states");
    if (initial_ >= delta_.size()) throw ModelError("initial automaton state out of range");
    for (std::size_t q = 0; q < delta_.size(); ++q) {
        if (delta_[q].size() != num_letters())
            throw ModelError("automaton state q" + std::to_string(q) +
                             ": transition function is not total");
        for (AutomatonState t : delta_[q])
            if (t >= delta_.size())
                throw ModelError("automaton state q" + std::to_string(q) +
                                 ": successor out of range");
    }
    if (pairs_.empty()) throw ModelError("automaton has no Rabin pairs");
    for (auto& p : pairs_) {
        if (p.avoid.size() != delta_.size() || p.visit.size() != delta_.size())
            throw ModelError("Rabin pair does not cover the automaton states");
    }
}

Letter Dra::letter_of(std::span<const std::string> labels) const {
    Letter l = 0;
    for (std::size_t i = 0; i < ap_.size(); ++i)
        if (std::find(labels.begin(), labels.end(), ap_[i]) != labels.end()) l |= Letter{1} << i;
    return l;
}

Letter Dra::make_letter(std::span<const std::string> props) const {
    Letter l = 0;
    for (const auto& p : props) {
        auto it = std::find(ap_.begin(), ap_.end(), p);
        if (it == ap_.end()) throw UnknownAp("unknown proposition '" + p + "'");
        l |= Letter{1} << static_cast<std::size_t>(it - ap_.begin());
    }
    return l;
}

namespace {

std::size_t ap_bit(std::span<const std::string> ap, const std::string& name) {
    auto it = std::find(ap.begin(), ap.end(), name);
    if (it == ap.end()) throw UnknownAp("unknown proposition '" + name + "'");
    return static_cast<std::size_t>(it - ap.begin());
}

Letter ap_mask(std::span<const std::string> ap, const std::vector<std::string>& names) {
    Letter m = 0;
    for (const auto& n : names) m |= Letter{1} << ap_bit(ap, n);
    return m;
}

RabinPair single_pair(std::size_t n, AutomatonState avoid, AutomatonState visit) {
    RabinPair p{std::vector<char>(n, 0), std::vector<char>(n, 0)};
    p.avoid[avoid] = 1;
    p.visit[visit] = 1;
    return p;
}

} // namespace

Dra template_to_dra(const SpecTemplate& spec, std::span<const std::string> ap) {
    if (spec.threshold < 0 || spec.threshold > 1)
        throw DomainError("specification threshold must lie in [0,1]");
    const std::vector<std::string> props(ap.begin(), ap.end());
    const std::size_t letters = std::size_t{1} << props.size();

    if (const auto* ra = std::get_if<ReachAvoid>(&spec.kind)) {
        const Letter avoid = ap_mask(ap, ra->avoid);
        const Letter target = Letter{1} << ap_bit(ap, ra->target);
        constexpr AutomatonState live = 0, accept = 1, reject = 2;
        std::vector<std::vector<AutomatonState>> delta(3, std::vector<AutomatonState>(letters));
        for (Letter l = 0; l < letters; ++l) {
            delta[live][l] = (l & avoid) ? reject : (l & target) ? accept : live;
            delta[accept][l] = accept;
            delta[reject][l] = reject;
        }
        return Dra(props, live, std::move(delta), {single_pair(3, reject, accept)});
    }

    const auto& sv = std::get<SequencedVisits>(spec.kind);
    if (sv.waypoints.empty()) throw DomainError("sequenced_visits needs at least one waypoint");
    const Letter avoid = ap_mask(ap, sv.avoid);
    std::vector<Letter> way;
    for (const auto& w : sv.waypoints) way.push_back(Letter{1} << ap_bit(ap, w));
    const auto k = static_cast<AutomatonState>(way.size());
    const AutomatonState accept = k, reject = k + 1;
    std::vector<std::vector<AutomatonState>> delta(k + 2, std::vector<AutomatonState>(letters));
    for (Letter l = 0; l < letters; ++l) {
        for (AutomatonState stage = 0; stage < k; ++stage) {
            if (l & avoid) {
                delta[stage][l] = reject;
                continue;
            }
            AutomatonState next = stage;
            while (next < k && (l & way[next])) ++next;
            delta[stage][l] = next;
        }
        delta[accept][l] = accept;
        delta[reject][l] = reject;
    }
    return Dra(props, 0, std::move(delta), {single_pair(k + 2, reject, accept)});
}

bool dra_accepts_lasso(const Dra& dra, std::span<const Letter> prefix,
                       std::span<const Letter> cycle) {
    if (cycle.empty()) throw DomainError("lasso cycle must be nonempty");
    AutomatonState q = dra.initial();
    for (Letter l : prefix) q = dra.next(q, l);

    // Unroll the cycle until the state at an iteration start repeats.
    std::map<AutomatonState, std::size_t> first_seen;
    std::vector<std::vector<AutomatonState>> visited;
    while (!first_seen.contains(q)) {
        first_seen[q] = visited.size();
        std::vector<AutomatonState> run;
        for (Letter l : cycle) {
            q = dra.next(q, l);
            run.push_back(q);
        }
        visited.push_back(std::move(run));
    }
    std::vector<char> inf(dra.num_states(), 0);
    for (std::size_t i = first_seen[q]; i < visited.size(); ++i)
        for (AutomatonState s : visited[i]) inf[s] = 1;

    for (const auto& pair : dra.pairs()) {
        bool hits_avoid = false, hits_visit = false;
        for (std::size_t s = 0; s < inf.size(); ++s) {
            if (!inf[s]) continue;
            hits_avoid = hits_avoid || pair.avoid[s];
            hits_visit = hits_visit || pair.visit[s];
        }
        if (!hits_avoid && hits_visit) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

AutomatonState parse_state(const std::string& tok, std::size_t line) {
    std::string t = trim(tok);
    if (!t.empty() && t[0] == 'q') t = t.substr(1);
    if (t.empty() || !std::all_of(t.begin(), t.end(), ::isdigit))
        throw ModelError("line " + std::to_string(line) + ": bad automaton state '" + tok + "'");
    return static_cast<AutomatonState>(std::stoul(t));
}

struct Guard {
    Letter positive = 0;
    Letter negative = 0;
    bool matches(Letter l) const { return (l & positive) == positive && (l & negative) == 0; }
};

Guard parse_guard(const std::string& text, const std::vector<std::string>& ap, std::size_t line) {
    Guard g;
    const std::string t = trim(text);
    if (t == "true") return g;
    std::string lit;
    std::istringstream in(t);
    while (std::getline(in, lit, '&')) {
        lit = trim(lit);
        bool neg = false;
        if (!lit.empty() && lit[0] == '!') {
            neg = true;
            lit = trim(lit.substr(1));
        }
        if (lit.empty())
            throw ModelError("line " + std::to_string(line) + ": empty literal in guard");
        const Letter bit = Letter{1} << ap_bit(ap, lit);
        (neg ? g.negative : g.positive) |= bit;
    }
    return g;
}

} // namespace

Dra parse_dra(std::istream& in) {
    std::vector<std::string> ap;
    bool have_ap = false, have_header = false;
    std::size_t num_states = 0;
    AutomatonState initial = 0;
    std::vector<std::pair<std::vector<AutomatonState>, std::vector<AutomatonState>>> raw_pairs;
    struct Edge {
        AutomatonState from;
        Guard guard;
        AutomatonState to;
        std::size_t line;
    };
    std::vector<Edge> edges;

    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
        const std::string l = trim(raw);
        if (l.empty()) continue;
        if (!have_header) {
            if (l != "dra") throw ModelError("line " + std::to_string(line) + ": expected 'dra'");
            have_header = true;
            continue;
        }
        if (l.rfind("ap:", 0) == 0) {
            ap = split_ws(l.substr(3));
            have_ap = true;
        } else if (l.rfind("states:", 0) == 0) {
            num_states = std::stoul(trim(l.substr(7)));
        } else if (l.rfind("initial:", 0) == 0) {
            initial = parse_state(l.substr(8), line);
        } else if (l.rfind("pairs:", 0) == 0) {
            std::string rest = l.substr(6);
            std::size_t pos = 0;
            while ((pos = rest.find('(', pos)) != std::string::npos) {
                const auto close = rest.find(')', pos);
                if (close == std::string::npos)
                    throw ModelError("line " + std::to_string(line) + ": unterminated pair");
                const std::string body = rest.substr(pos + 1, close - pos - 1);
                const auto bar = body.find('|');
                const auto a_at = body.find("A:");
                const auto b_at = body.find("B:");
                if (bar == std::string::npos || a_at == std::string::npos ||
                    b_at == std::string::npos || !(a_at < bar && bar < b_at))
                    throw ModelError("line " + std::to_string(line) +
                                     ": pair must read (A: ... | B: ...)");
                std::vector<AutomatonState> a, b;
                for (const auto& t : split_ws(body.substr(a_at + 2, bar - a_at - 2)))
                    a.push_back(parse_state(t, line));
                for (const auto& t : split_ws(body.substr(b_at + 2)))
                    b.push_back(parse_state(t, line));
                raw_pairs.emplace_back(std::move(a), std::move(b));
                pos = close + 1;
            }
        } else {
            const auto comma = l.find(',');
            const auto arrow = l.find("->");
            if (comma == std::string::npos || arrow == std::string::npos || arrow < comma)
                throw ModelError("line " + std::to_string(line) + ": cannot parse '" + l + "'");
            if (!have_ap)
                throw ModelError("line " + std::to_string(line) + ": 'ap:' must precede edges");
            edges.push_back({parse_state(l.substr(0, comma), line),
                             parse_guard(l.substr(comma + 1, arrow - comma - 1), ap, line),
                             parse_state(l.substr(arrow + 2), line), line});
        }
    }
    if (!have_header) throw ModelError("empty automaton file");
    if (num_states == 0) throw ModelError("automaton declares no states");
    if (ap.size() > Dra::kMaxPropositions) throw ModelError("too many propositions");

    const std::size_t letters = std::size_t{1} << ap.size();
    std::vector<std::vector<AutomatonState>> delta(num_states,
                                                   std::vector<AutomatonState>(letters, 0));
    std::vector<std::vector<int>> hits(num_states, std::vector<int>(letters, 0));
    for (const auto& e : edges) {
        if (e.from >= num_states || e.to >= num_states)
            throw ModelError("line " + std::to_string(e.line) + ": state out of range");
        for (Letter l = 0; l < letters; ++l)
            if (e.guard.matches(l)) {
                ++hits[e.from][l];
                delta[e.from][l] = e.to;
            }
    }
    for (std::size_t q = 0; q < num_states; ++q)
        for (Letter l = 0; l < letters; ++l)
            if (hits[q][l] != 1) {
                std::string letter = "{";
                for (std::size_t i = 0; i < ap.size(); ++i)
                    if (l & (Letter{1} << i)) letter += (letter.size() > 1 ? "," : "") + ap[i];
                throw ModelError("state q" + std::to_string(q) + ", letter " + letter +
                                 "}: matched by " + std::to_string(hits[q][l]) +
                                 " edges (need exactly 1)");
            }

    std::vector<RabinPair> pairs;
    for (const auto& [a, b] : raw_pairs) {
        RabinPair p{std::vector<char>(num_states, 0), std::vector<char>(num_states, 0)};
        for (auto s : a) {
            if (s >= num_states) throw ModelError("pair state out of range");
            p.avoid[s] = 1;
        }
        for (auto s : b) {
            if (s >= num_states) throw ModelError("pair state out of range");
            p.visit[s] = 1;
        }
        pairs.push_back(std::move(p));
    }
    return Dra(std::move(ap), initial, std::move(delta), std::move(pairs));
}

Dra load_dra(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open automaton file '" + path + "'");
    return parse_dra(in);
}

void write_dra(const Dra& dra, std::ostream& out) {
    const auto& ap = dra.propositions();
    out << "dra\nap:";
    for (const auto& p : ap) out << ' ' << p;
    out << "\nstates: " << dra.num_states() << "\ninitial: q" << dra.initial() << "\npairs:";
    for (const auto& p : dra.pairs()) {
        out << " (A:";
        for (std::size_t q = 0; q < p.avoid.size(); ++q)
            if (p.avoid[q]) out << " q" << q;
        out << " | B:";
        for (std::size_t q = 0; q < p.visit.size(); ++q)
            if (p.visit[q]) out << " q" << q;
        out << ')';
    }
    out << '\n';
    for (AutomatonState q = 0; q < dra.num_states(); ++q) {
        bool uniform = true;
        for (Letter l = 1; l < dra.num_letters(); ++l) uniform = uniform && dra.next(q, l) == dra.next(q, 0);
        if (uniform) {
            out << 'q' << q << ", true -> q" << dra.next(q, 0) << '\n';
            continue;
        }
        for (Letter l = 0; l < dra.num_letters(); ++l) {
            out << 'q' << q << ", ";
            for (std::size_t i = 0; i < ap.size(); ++i)
                out << (i ? " & " : "") << ((l >> i) & 1 ? "" : "!") << ap[i];
            out << " -> q" << dra.next(q, l) << '\n';
        }
    }
}

SpecTemplate parse_template(const std::string& text, double threshold) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
        if (c == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    auto list = [](const std::string& s) {
        std::vector<std::string> out;
        std::string item;
        std::istringstream in(s);
        while (std::getline(in, item, ','))
            if (!trim(item).empty()) out.push_back(trim(item));
        return out;
    };
    SpecTemplate spec;
    spec.threshold = threshold;
    if (parts[0] == "reach_avoid" && parts.size() == 3) {
        spec.kind = ReachAvoid{list(parts[1]), trim(parts[2])};
        if (std::get<ReachAvoid>(spec.kind).target.empty())
            throw DomainError("reach_avoid template needs a target proposition");
    } else if (parts[0] == "sequence" && (parts.size() == 2 || parts.size() == 3)) {
        spec.kind = SequencedVisits{list(parts[1]), parts.size() == 3 ? list(parts[2])
                                                                      : std::vector<std::string>{}};
        if (std::get<SequencedVisits>(spec.kind).waypoints.empty())
            throw DomainError("sequence template needs at least one waypoint");
    } else {
        throw DomainError("cannot parse template '" + text +
                          "' (expected reach_avoid:AVOID,...:TARGET or sequence:W1,...[:AVOID,...])");
    }
    return spec;
}

} // namespace sharedctl
