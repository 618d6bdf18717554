#include "sharedctl/analysis.hpp"
#include "sharedctl/dra.hpp"
#include "sharedctl/errors.hpp"
#include "sharedctl/gridworld.hpp"
#include "sharedctl/io.hpp"
#include "sharedctl/irl.hpp"
#include "sharedctl/product.hpp"
#include "sharedctl/synthesis.hpp"

#ifdef SHAREDCTL_WITH_SERVICE
#include "sharedctl/service.hpp"
#endif

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <pthread.h>
#include <cstdio>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

using namespace sharedctl;

namespace {

enum Exit { kOk = 0, kFail = 1, kConfig = 2, kInfeasible = 3, kNumeric = 4 };

struct SpecArgs {
    std::string dra_path;
    std::string spec_template = "reach_avoid:crash:target";
};

Dra load_spec(const SpecArgs& args, const Mdp& model) {
    if (!args.dra_path.empty()) return load_dra(args.dra_path);
    const SpecTemplate spec = parse_template(args.spec_template);
    std::set<std::string> ap;
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ReachAvoid>) {
                ap.insert(k.avoid.begin(), k.avoid.end());
                ap.insert(k.target);
            } else {
                ap.insert(k.waypoints.begin(), k.waypoints.end());
                ap.insert(k.avoid.begin(), k.avoid.end());
            }
        },
        spec.kind);
    for (const auto& p : model_propositions(model)) ap.insert(p);
    const std::vector<std::string> aps(ap.begin(), ap.end());
    return template_to_dra(spec, aps);
}

Strategy load_human(const std::string& path, const Mdp& model) {
    if (path.empty() || path == "uniform") return Strategy::uniform(model);
    return parse_strategy(read_file(path), model);
}

/// "label:value", split at the last colon.
std::pair<std::string, double> label_value(const std::string& text, const char* flag) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0)
        throw ConfigError(std::string(flag) + " expects LABEL:VALUE, got '" + text + "'");
    try {
        std::size_t used = 0;
        const double v = std::stod(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
        return {text.substr(0, colon), v};
    } catch (const std::logic_error&) {
        throw ConfigError(std::string(flag) + ": cannot read a number in '" + text + "'");
    }
}

Method parse_method(const std::string& s) {
    if (s == "qcp") return Method::Qcp;
    if (s == "greedy") return Method::Greedy;
    if (s == "occ-inf" || s == "occ_inf") return Method::OccInf;
    if (s == "max-sat" || s == "max_sat") return Method::MaxSat;
    throw ConfigError("unknown method '" + s + "'");
}

FeasibilityEngine parse_engine(const std::string& s) {
    if (s == "auto") return FeasibilityEngine::Auto;
    if (s == "lp") return FeasibilityEngine::Lp;
    if (s == "box") return FeasibilityEngine::BoxIteration;
    throw ConfigError("unknown engine '" + s + "'");
}

std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

// ---------------------------------------------------------------- gridworld

struct GridArgs {
    int size = 8;
    int region = 6;
    std::uint64_t seed = 1;
    std::string scenario;
    bool deterministic = false;
    std::string out;
    std::string scenario_out;
};

GridworldConfig grid_config(const GridArgs& a) {
    if (!a.scenario.empty()) return parse_scenario(read_file(a.scenario));
    GridworldConfig c;
    c.n = a.size;
    c.m = a.region;
    c.seed = a.seed;
    c.agent_slip = !a.deterministic;
    return c;
}

int run_gridworld(const GridArgs& a) {
    const GridworldConfig cfg = grid_config(a).resolved();
    const Gridworld grid(cfg);
    if (!a.out.empty()) write_file(a.out, model_to_json(grid.mdp()));
    if (!a.scenario_out.empty()) write_file(a.scenario_out, scenario_to_json(cfg));
    std::cout << "states=" << grid.mdp().num_states() << " transitions=" << grid.mdp().num_transitions() << "\n";
    return kOk;
}

// -------------------------------------------------------------------- synth

struct SynthArgs {
    std::string model;
    std::string scenario;
    SpecArgs spec;
    std::string human;
    double beta = 0.0;
    std::string method = "qcp";
    double epsilon = 1e-4;
    double greedy_step = 0.05;
    std::string engine = "auto";
    std::vector<std::string> reach;
    std::vector<std::string> cost;
    std::string out;
    bool timings = false;
};

Mdp load_model(const std::string& model, const std::string& scenario) {
    if (!model.empty() && !scenario.empty()) throw ConfigError("give either --model or --scenario");
    if (!model.empty()) return parse_model(read_file(model));
    if (!scenario.empty()) return Gridworld(parse_scenario(read_file(scenario))).mdp();
    throw ConfigError("--model or --scenario is required");
}

struct Pipeline {
    Mdp base;
    Dra dra;
    ProductMdp product;
    RepairProblem problem;
};

Pipeline build_pipeline(Mdp base, const SpecArgs& spec, const std::string& human, double beta) {
    Pipeline p{std::move(base), {}, {}, {}};
    p.dra = load_spec(spec, p.base);
    p.product = build_product(p.base, p.dra);
    p.problem = make_repair_problem(p.product, lift_strategy(p.product, load_human(human, p.base)), beta);
    return p;
}

ResultDocument synthesize_document(const Pipeline& p, const SynthArgs& a) {
    SynthesisOptions opt;
    opt.greedy_step = a.greedy_step;
    opt.engine = parse_engine(a.engine);
    const SynthesisResult r = synthesize(p.problem, parse_method(a.method), opt);
    return make_result_document(p.product, p.problem, r, p.dra);
}

int run_synth(const SynthArgs& a) {
    if (!(a.beta >= 0.0 && a.beta <= 1.0)) throw ConfigError("--beta must lie in [0, 1]");
    const auto t0 = std::chrono::steady_clock::now();
    Pipeline p = build_pipeline(load_model(a.model, a.scenario), a.spec, a.human, a.beta);
    p.problem.epsilon = a.epsilon;
    for (const auto& r : a.reach) {
        auto [label, lambda] = label_value(r, "--reach");
        p.problem.reach.push_back({product_states_with_label(p.product, p.base, label), lambda});
    }
    for (const auto& c : a.cost) {
        auto [label, kappa] = label_value(c, "--cost");
        p.problem.cost.push_back({product_states_with_label(p.product, p.base, label), kappa});
    }
    p.problem.validate();
    ResultDocument doc = synthesize_document(p, a);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (a.timings) doc.seconds = seconds;
    if (!a.out.empty()) write_file(a.out, result_to_json(p.product.mdp, doc));
    const SynthesisResult& r = doc.result;
    std::cout << "method=" << to_string(r.method) << " engine=" << to_string(r.engine)
              << " delta_hat=" << format(r.delta_hat) << " probability=" << format(r.probability)
              << " probes=" << r.iterations.size() << "\n";
    std::cerr << "product states=" << p.product.mdp.num_states() << " B=" << p.problem.accepting.size()
              << " S_r=" << p.problem.transient.size() << " seconds=" << format(seconds) << "\n";
    return kOk;
}

// ----------------------------------------------------------------------- mc

struct McArgs {
    std::string model;
    std::string scenario;
    SpecArgs spec;
    std::string strategy;
    std::string mode = "lower";
    double beta = 0.0;
};

int run_mc(const McArgs& a) {
    if (a.mode != "lower" && a.mode != "upper") throw ConfigError("--mode must be lower or upper");
    const Pipeline p = build_pipeline(load_model(a.model, a.scenario), a.spec, a.strategy, a.beta);
    const Verification v = verify(p.problem, p.problem.human, a.mode == "lower" ? VerifyMode::AtLeast : VerifyMode::AtMost);
    std::cout << (v.pass ? "PASS " : "FAIL ") << format(v.probability) << "\n";
    return v.pass ? kOk : kFail;
}

// -------------------------------------------------------------- irl / demos

struct IrlArgs {
    std::string scenario;
    std::string demos;
    std::string features = "grid";
    std::size_t horizon = 0;
    std::size_t iterations = 2000;
    double learning_rate = 0.1;
    double tolerance = 1e-4;
    std::string solver = "lbfgs";
    std::string out;
    std::string weights_out;
};

int run_irl(const IrlArgs& a) {
    if (a.features != "grid") throw ConfigError("only --features grid is available");
    const Gridworld grid(parse_scenario(read_file(a.scenario)));
    const DemonstrationSet demos = parse_demos(read_file(a.demos), grid.mdp());
    IrlOptions opt;
    // Default horizon: four grid diameters, never shorter than an episode.
    const std::size_t diameter = 2 * static_cast<std::size_t>(grid.config().n - 1);
    opt.horizon = a.horizon ? a.horizon : std::max(4 * diameter, demos.longest());
    opt.iterations = a.iterations;
    opt.learning_rate = a.learning_rate;
    opt.tolerance = a.tolerance;
    if (a.solver == "lbfgs") opt.solver = IrlSolver::Lbfgs;
    else if (a.solver == "gradient") opt.solver = IrlSolver::GradientAscent;
    else throw ConfigError("unknown solver '" + a.solver + "'");
    const FeatureMap phi = builtin_grid_features(grid);
    const IrlResult r = maxent_irl(grid.mdp(), demos, phi, opt);
    if (!a.out.empty()) write_file(a.out, strategy_to_json(grid.mdp(), r.strategy));
    std::ostringstream w;
    for (std::size_t k = 0; k < phi.dim(); ++k) w << (k ? " " : "") << phi.names[k] << "=" << format(r.weights[k]);
    if (!a.weights_out.empty()) write_file(a.weights_out, w.str() + "\n");
    std::cout << "iterations=" << r.iterations << " gradient_norm=" << format(r.gradient_norm)
              << " log_likelihood=" << format(r.log_likelihood) << "\n" << w.str() << "\n";
    if (r.gradient_norm >= opt.tolerance)
        std::cerr << "warning: not converged; with few demonstrations the likelihood may have no maximum "
                     "(weights grow without bound)\n";
    return kOk;
}

struct DemoArgs {
    std::string scenario;
    std::vector<double> weights;
    std::size_t episodes = 100;
    std::size_t length = 16;
    std::uint64_t seed = 1;
    std::string out;
};

int run_demos(const DemoArgs& a) {
    const Gridworld grid(parse_scenario(read_file(a.scenario)));
    const FeatureMap phi = builtin_grid_features(grid);
    std::vector<double> w = a.weights;
    if (w.empty()) {
        // Head for the target and keep away from the obstacle.
        w.assign(phi.dim(), 0.0);
        w[0] = 2.0;
        w[1] = -4.0;
    }
    if (w.size() != phi.dim())
        throw ConfigError("--weights needs " + std::to_string(phi.dim()) + " values");
    const SoftPolicy pol = soft_policy(grid.mdp(), phi, w, a.length);
    const DemonstrationSet d = sample_demonstrations(grid.mdp(), pol, a.episodes, a.length, a.seed);
    if (!a.out.empty()) write_file(a.out, demos_to_json(grid.mdp(), d));
    std::cout << "episodes=" << d.episodes.size() << " steps=" << d.total_steps() << "\n";
    return kOk;
}

// -------------------------------------------------------------------- serve

#ifdef SHAREDCTL_WITH_SERVICE
struct ServeArgs {
    std::string scenario;
    std::string result;
    bool synth_on_start = false;
    std::string human;
    double beta = 0.7;
    std::string host = "127.0.0.1";
    int port = 8080;
    int ws_port = -1;
    double b_min = 0.05;
    double b_max = 0.95;
};

int run_serve(const ServeArgs& a) {
    // Block the stop signals before any thread starts so that only sigwait sees them.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    const GridworldConfig cfg = parse_scenario(read_file(a.scenario));
    ServiceOptions opt;
    opt.host = a.host;
    opt.port = a.port;
    opt.ws_port = a.ws_port;
    opt.b_min = a.b_min;
    opt.b_max = a.b_max;
    SessionService service(opt);
    if (!a.result.empty()) {
        service.set_result(cfg, parse_result(read_file(a.result), Gridworld(cfg).mdp()));
    } else if (a.synth_on_start) {
        service.synthesize_on_start(cfg, [cfg, a] {
            SynthArgs s;
            s.beta = a.beta;
            const Pipeline p = build_pipeline(Gridworld(cfg).mdp(), s.spec, a.human, a.beta);
            return synthesize_document(p, s);
        });
    } else {
        throw ConfigError("serve needs --result or --synth-on-start");
    }
    service.start();
    std::cout << "listening on " << a.host << ":" << service.port();
    if (service.ws_port() > 0) std::cout << " websocket " << service.ws_port();
    std::cout << std::endl;
    int sig = 0;
    sigwait(&stop_signals, &sig);
    service.stop();
    return kOk;
}
#endif

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shared-control strategy repair"};
    app.require_subcommand(1);

    GridArgs grid;
    auto* g = app.add_subcommand("gridworld", "Build a gridworld model");
    g->add_option("--size", grid.size, "Grid side n")->check(CLI::PositiveNumber);
    g->add_option("--obstacle-region", grid.region, "Side m of the obstacle block")->check(CLI::PositiveNumber);
    g->add_option("--seed", grid.seed, "Seed of the obstacle policy");
    g->add_option("--scenario", grid.scenario, "Scenario JSON (overrides the flags above)");
    g->add_flag("--deterministic-agent", grid.deterministic, "Agent moves without slipping");
    g->add_option("--out", grid.out, "Model JSON output");
    g->add_option("--scenario-out", grid.scenario_out, "Resolved scenario JSON output");

    SynthArgs syn;
    auto* s = app.add_subcommand("synth", "Repair a human strategy");
    s->add_option("--model", syn.model, "Model JSON");
    s->add_option("--scenario", syn.scenario, "Gridworld scenario JSON instead of a model");
    s->add_option("--dra", syn.spec.dra_path, "Automaton file");
    s->add_option("--template", syn.spec.spec_template, "reach_avoid:AVOID,...:TARGET or sequence:W1,...[:AVOID,...]")
        ->capture_default_str();
    s->add_option("--human", syn.human, "Human strategy JSON on the model (default uniform)");
    s->add_option("--beta", syn.beta, "Probability threshold")->required();
    s->add_option("--method", syn.method, "qcp, greedy, occ-inf or max-sat")->capture_default_str();
    s->add_option("--epsilon", syn.epsilon, "Bisection accuracy")->capture_default_str();
    s->add_option("--greedy-step", syn.greedy_step, "Greedy step")->capture_default_str();
    s->add_option("--engine", syn.engine, "auto, lp or box")->capture_default_str();
    s->add_option("--reach", syn.reach, "LABEL:LAMBDA reachability constraint");
    s->add_option("--cost", syn.cost, "LABEL:KAPPA expected cost constraint");
    s->add_option("--out", syn.out, "Result JSON output");
    s->add_flag("--timings", syn.timings, "Store the wall time in the result");
    s->excludes(s->get_option("--dra"));

    McArgs mc;
    auto* m = app.add_subcommand("mc", "Check a strategy against a threshold");
    m->add_option("--model", mc.model, "Model JSON");
    m->add_option("--scenario", mc.scenario, "Gridworld scenario JSON instead of a model");
    m->add_option("--dra", mc.spec.dra_path, "Automaton file");
    m->add_option("--template", mc.spec.spec_template, "Specification template")->capture_default_str();
    m->add_option("--strategy", mc.strategy, "Strategy JSON on the model (default uniform)");
    m->add_option("--mode", mc.mode, "lower: P >= beta, upper: P <= beta")->capture_default_str();
    m->add_option("--beta", mc.beta, "Threshold")->required();

    IrlArgs irl;
    auto* i = app.add_subcommand("irl", "Learn a human strategy from demonstrations");
    i->add_option("--scenario", irl.scenario, "Gridworld scenario JSON")->required();
    i->add_option("--demos", irl.demos, "Demonstration JSON")->required();
    i->add_option("--features", irl.features, "Feature set")->capture_default_str();
    i->add_option("--horizon", irl.horizon, "Steps to go of the returned strategy (0: four grid diameters)");
    i->add_option("--iterations", irl.iterations)->capture_default_str();
    i->add_option("--learning-rate", irl.learning_rate)->capture_default_str();
    i->add_option("--tolerance", irl.tolerance)->capture_default_str();
    i->add_option("--solver", irl.solver, "lbfgs or gradient")->capture_default_str();
    i->add_option("--out", irl.out, "Strategy JSON output");
    i->add_option("--weights-out", irl.weights_out, "Learned weights output");

    DemoArgs dem;
    auto* d = app.add_subcommand("demos", "Sample synthetic demonstrations from a soft-optimal policy");
    d->add_option("--scenario", dem.scenario, "Gridworld scenario JSON")->required();
    d->add_option("--weights", dem.weights, "Reward weights, one per grid feature")->delimiter(',');
    d->add_option("--episodes", dem.episodes)->capture_default_str();
    d->add_option("--length", dem.length)->capture_default_str();
    d->add_option("--seed", dem.seed)->capture_default_str();
    d->add_option("--out", dem.out, "Demonstration JSON output");

    double gamma = 0.0, confidence = 0.0;
    auto* b = app.add_subcommand("bound", "Demonstrations needed for accuracy gamma at a confidence level");
    b->add_option("gamma,--gamma", gamma, "Accuracy")->required();
    b->add_option("confidence,--confidence", confidence, "Confidence level")->required();

#ifdef SHAREDCTL_WITH_SERVICE
    ServeArgs srv;
    auto* v = app.add_subcommand("serve", "Host interactive shared-control sessions");
    v->add_option("--scenario", srv.scenario, "Gridworld scenario JSON")->required();
    v->add_option("--result", srv.result, "Synthesis result JSON");
    v->add_flag("--synth-on-start", srv.synth_on_start, "Synthesize in the background instead");
    v->add_option("--human", srv.human, "Human strategy for --synth-on-start (default uniform)");
    v->add_option("--beta", srv.beta, "Threshold for --synth-on-start")->capture_default_str();
    v->add_option("--host", srv.host)->capture_default_str();
    v->add_option("--port", srv.port)->capture_default_str();
    v->add_option("--ws-port", srv.ws_port, "WebSocket mirror port (negative: off)")->capture_default_str();
    v->add_option("--b-min", srv.b_min)->capture_default_str();
    v->add_option("--b-max", srv.b_max)->capture_default_str();
#endif

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (*g) return run_gridworld(grid);
        if (*s) return run_synth(syn);
        if (*m) return run_mc(mc);
        if (*i) return run_irl(irl);
        if (*d) return run_demos(dem);
        if (*b) {
            std::cout << sample_bound(gamma, confidence) << "\n";
            return kOk;
        }
#ifdef SHAREDCTL_WITH_SERVICE
        if (*v) return run_serve(srv);
#endif
    } catch (const SpecInfeasible& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        if (std::isnan(e.achievable())) std::cout << "infeasible constraints\n";
        else std::cout << "infeasible max=" << format(e.achievable()) << "\n";
        return kInfeasible;
    } catch (const InfeasibleModel& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kInfeasible;
    } catch (const NumericalBreakdown& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumeric;
    } catch (const NonFinite& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumeric;
    } catch (const DivergentCost& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    }
    return kConfig;
}
