#include "sharedctl/io.hpp"

#include "sharedctl/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace sharedctl {

using json = nlohmann::ordered_json;

namespace {

json parse_json(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

// Runs `body`, turning JSON type errors into ConfigError with context.
template <class F>
auto guarded(const char* what, F&& body) {
    try {
        return body();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

StateId state_key(const std::string& key, std::size_t n, const char* what) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
        v = std::stoul(key, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != key.size() || key.empty()) throw ConfigError(std::string(what) + ": bad state id \"" + key + "\"");
    if (v >= n) throw ModelError(std::string(what) + ": state " + key + " out of range");
    return static_cast<StateId>(v);
}

json cell_json(Cell c) { return json::array({c.row, c.col}); }

Cell cell_from(const json& j) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("a cell is written [row, col]");
    return {j[0].get<int>(), j[1].get<int>()};
}

json strategy_json(const Mdp& mdp, const Strategy& s) {
    json out = json::object();
    for (StateId k = 0; k < mdp.num_states(); ++k) {
        json row = json::object();
        for (ActionIndex a = 0; a < mdp.num_actions(k); ++a) row[mdp.action(k, a).name] = s(k, a);
        out[std::to_string(k)] = std::move(row);
    }
    return out;
}

Strategy strategy_from(const json& j, const Mdp& mdp) {
    if (!j.is_object()) throw ConfigError("strategy: expected an object keyed by state id");
    const std::size_t n = mdp.num_states();
    std::vector<std::vector<double>> dist(n);
    std::vector<char> seen(n, 0);
    for (const auto& [key, row] : j.items()) {
        const StateId s = state_key(key, n, "strategy");
        if (!row.is_object()) throw ConfigError("strategy: state " + key + " must map action names to probabilities");
        dist[s].assign(mdp.num_actions(s), 0.0);
        for (const auto& [name, p] : row.items()) {
            const auto a = mdp.find_action(s, name);
            if (!a) throw ModelError("strategy: state " + key + " has no action \"" + name + "\"");
            dist[s][*a] = p.get<double>();
        }
        seen[s] = 1;
    }
    for (StateId s = 0; s < n; ++s)
        if (!seen[s]) throw ModelError("strategy: state " + std::to_string(s) + " missing");
    Strategy out(std::move(dist));
    out.validate(mdp);
    return out;
}

} // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
}

Mdp parse_model(const std::string& text) {
    const json j = parse_json(text, "model");
    return guarded("model", [&] {
        const auto& states = j.at("states");
        if (!states.is_array()) throw ConfigError("model: \"states\" must be an array");
        std::vector<StateSpec> specs(states.size());
        for (std::size_t i = 0; i < states.size(); ++i) {
            const auto& st = states[i];
            const auto id = st.at("id").get<long long>();
            if (id != static_cast<long long>(i))
                throw ModelError("model: state at position " + std::to_string(i) + " has id " + std::to_string(id) +
                                 " (ids must be dense and ordered)");
            auto& spec = specs[i];
            if (st.contains("labels")) spec.labels = st["labels"].get<std::vector<std::string>>();
            for (const auto& act : st.at("actions")) {
                Choice c;
                c.name = act.at("name").get<std::string>();
                c.cost = act.value("cost", 0.0);
                for (const auto& t : act.at("transitions")) {
                    const auto to = t.at("to").get<long long>();
                    if (to < 0) throw ModelError("model: state " + std::to_string(i) + ", action " + c.name + ": negative successor");
                    c.successors.push_back({static_cast<StateId>(to), t.at("p").get<double>()});
                }
                spec.actions.push_back(std::move(c));
            }
        }
        const auto init = j.at("initial").get<long long>();
        if (init < 0) throw ModelError("model: negative initial state");
        return Mdp(std::move(specs), static_cast<StateId>(init));
    });
}

std::string model_to_json(const Mdp& mdp) {
    json states = json::array();
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        json actions = json::array();
        for (const auto& c : mdp.actions(s)) {
            json tr = json::array();
            for (const auto& t : c.successors) tr.push_back({{"to", t.to}, {"p", t.p}});
            actions.push_back({{"name", c.name}, {"cost", c.cost}, {"transitions", std::move(tr)}});
        }
        json labels = json::array();
        for (const auto& l : mdp.labels(s)) labels.push_back(l);
        states.push_back({{"id", s}, {"labels", std::move(labels)}, {"actions", std::move(actions)}});
    }
    json j{{"initial", mdp.initial()}, {"states", std::move(states)}};
    return j.dump(1) + "\n";
}

Strategy parse_strategy(const std::string& text, const Mdp& mdp) {
    const json j = parse_json(text, "strategy");
    return guarded("strategy", [&] { return strategy_from(j, mdp); });
}

std::string strategy_to_json(const Mdp& mdp, const Strategy& strategy) {
    return strategy_json(mdp, strategy).dump(1) + "\n";
}

DemonstrationSet parse_demos(const std::string& text, const Mdp& mdp) {
    const json j = parse_json(text, "demonstrations");
    DemonstrationSet demos = guarded("demonstrations", [&] {
        DemonstrationSet d;
        d.source = j.value("source", std::string("ui"));
        for (const auto& ep : j.at("episodes")) {
            Episode e;
            for (const auto& step : ep) {
                const auto s = step.at("s").get<long long>();
                if (s < 0 || static_cast<std::size_t>(s) >= mdp.num_states())
                    throw ModelError("demonstrations: state " + std::to_string(s) + " out of range");
                const auto name = step.at("a").get<std::string>();
                const auto a = mdp.find_action(static_cast<StateId>(s), name);
                if (!a) throw ModelError("demonstrations: state " + std::to_string(s) + " has no action \"" + name + "\"");
                e.push_back({static_cast<StateId>(s), *a});
            }
            d.episodes.push_back(std::move(e));
        }
        return d;
    });
    demos.validate(mdp);
    return demos;
}

std::string demos_to_json(const Mdp& mdp, const DemonstrationSet& demos) {
    json episodes = json::array();
    for (const auto& e : demos.episodes) {
        json steps = json::array();
        for (const auto& [s, a] : e) steps.push_back({{"s", s}, {"a", mdp.action(s, a).name}});
        episodes.push_back(std::move(steps));
    }
    json j{{"source", demos.source}, {"episodes", std::move(episodes)}};
    return j.dump() + "\n";
}

GridworldConfig parse_scenario(const std::string& text) {
    const json j = parse_json(text, "scenario");
    return guarded("scenario", [&] {
        GridworldConfig c;
        if (!j.is_object()) throw ConfigError("scenario: expected an object");
        for (const auto& [key, v] : j.items()) {
            if (key == "n") c.n = v.get<int>();
            else if (key == "m") c.m = v.get<int>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "region_origin") c.region_origin = cell_from(v);
            else if (key == "target") c.target = cell_from(v);
            else if (key == "agent_start") c.agent_start = cell_from(v);
            else if (key == "obstacle_start") c.obstacle_start = cell_from(v);
            else if (key == "agent_slip") c.agent_slip = v.get<bool>();
            else if (key == "static_obstacles") {
                for (const auto& cell : v) c.static_obstacles.push_back(cell_from(cell));
            } else {
                throw ConfigError("scenario: unknown field \"" + key + "\"");
            }
        }
        return c.resolved();
    });
}

std::string scenario_to_json(const GridworldConfig& config) {
    const GridworldConfig c = config.resolved();
    json obstacles = json::array();
    for (Cell x : c.static_obstacles) obstacles.push_back(cell_json(x));
    json j{{"n", c.n},
           {"m", c.m},
           {"seed", c.seed},
           {"region_origin", cell_json(*c.region_origin)},
           {"target", cell_json(*c.target)},
           {"agent_start", cell_json(c.agent_start)},
           {"obstacle_start", cell_json(*c.obstacle_start)},
           {"agent_slip", c.agent_slip},
           {"static_obstacles", std::move(obstacles)}};
    return j.dump(2) + "\n";
}

ResultDocument make_result_document(const ProductMdp& product, const RepairProblem& problem,
                                    const SynthesisResult& result, const Dra& dra) {
    ResultDocument doc;
    doc.result = result;
    doc.beta = problem.beta;
    doc.epsilon = problem.epsilon;
    doc.base_state = product.base_state;
    doc.automaton_state = product.automaton_state;
    doc.accepting = problem.accepting;
    doc.transient = problem.transient;
    doc.human = problem.human;
    std::ostringstream text;
    write_dra(dra, text);
    doc.dra = text.str();
    return doc;
}

std::string result_to_json(const Mdp& product_mdp, const ResultDocument& doc) {
    const SynthesisResult& r = doc.result;
    json trace = json::array();
    for (const auto& p : r.iterations) trace.push_back({{"delta", p.delta}, {"feasible", p.feasible}});
    json states = json::array();
    for (std::size_t k = 0; k < doc.base_state.size(); ++k)
        states.push_back(json::array({doc.base_state[k], doc.automaton_state[k]}));
    json j;
    j["method"] = to_string(r.method);
    j["engine"] = to_string(r.engine);
    j["delta_hat"] = r.delta_hat;
    j["probability"] = r.probability;
    j["beta"] = doc.beta;
    j["epsilon"] = doc.epsilon;
    j["bracket"] = json::array({r.lower, r.upper});
    j["full_deviation"] = r.full_deviation;
    if (r.method == Method::OccInf) j["occupancy_gap"] = r.occupancy_gap;
    j["iterations"] = std::move(trace);
    j["lp_iterations"] = r.lp_iterations;
    j["policy_iterations"] = r.policy_iterations;
    if (doc.seconds) j["timings"] = {{"total_seconds", *doc.seconds}};
    j["product"] = {{"initial", product_mdp.initial()}, {"states", std::move(states)}};
    j["accepting"] = doc.accepting;
    j["transient"] = doc.transient;
    j["dra"] = doc.dra;
    j["strategy"] = strategy_json(product_mdp, r.strategy);
    j["human"] = strategy_json(product_mdp, doc.human);
    return j.dump(1) + "\n";
}

ResultDocument parse_result(const std::string& text, const Mdp& base) {
    const json j = parse_json(text, "result");
    return guarded("result", [&] {
        ResultDocument doc;
        doc.dra = j.at("dra").get<std::string>();
        std::istringstream dra_text(doc.dra);
        const ProductMdp product = build_product(base, parse_dra(dra_text));
        const auto& states = j.at("product").at("states");
        if (states.size() != product.mdp.num_states())
            throw ModelError("result: product has " + std::to_string(states.size()) + " states, the model gives " +
                             std::to_string(product.mdp.num_states()));
        for (std::size_t k = 0; k < states.size(); ++k) {
            const auto s = states[k].at(0).get<StateId>();
            const auto q = states[k].at(1).get<AutomatonState>();
            if (s != product.base_state[k] || q != product.automaton_state[k])
                throw ModelError("result: product state " + std::to_string(k) + " does not match the model");
            doc.base_state.push_back(s);
            doc.automaton_state.push_back(q);
        }
        SynthesisResult& r = doc.result;
        const auto method = j.at("method").get<std::string>();
        if (method == "qcp") r.method = Method::Qcp;
        else if (method == "greedy") r.method = Method::Greedy;
        else if (method == "occ_inf") r.method = Method::OccInf;
        else if (method == "max_sat") r.method = Method::MaxSat;
        else throw ConfigError("result: unknown method \"" + method + "\"");
        const auto engine = j.value("engine", std::string("lp"));
        r.engine = engine == "box" ? FeasibilityEngine::BoxIteration : FeasibilityEngine::Lp;
        r.delta_hat = j.at("delta_hat").get<double>();
        r.probability = j.at("probability").get<double>();
        r.lower = j.at("bracket").at(0).get<double>();
        r.upper = j.at("bracket").at(1).get<double>();
        r.full_deviation = j.value("full_deviation", 0.0);
        r.occupancy_gap = j.value("occupancy_gap", 0.0);
        for (const auto& p : j.at("iterations")) r.iterations.push_back({p.at("delta").get<double>(), p.at("feasible").get<bool>()});
        r.lp_iterations = j.value("lp_iterations", std::size_t{0});
        r.policy_iterations = j.value("policy_iterations", std::size_t{0});
        doc.beta = j.at("beta").get<double>();
        doc.epsilon = j.value("epsilon", 0.0);
        doc.accepting = j.at("accepting").get<StateSet>();
        doc.transient = j.at("transient").get<StateSet>();
        if (j.contains("timings")) doc.seconds = j["timings"].at("total_seconds").get<double>();
        r.strategy = strategy_from(j.at("strategy"), product.mdp);
        doc.human = strategy_from(j.at("human"), product.mdp);
        return doc;
    });
}

} // namespace sharedctl
