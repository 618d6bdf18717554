#include "sharedctl/analysis.hpp"
#include "sharedctl/dra.hpp"
#include "sharedctl/errors.hpp"
#include "sharedctl/gridworld.hpp"
#include "sharedctl/io.hpp"
#include "sharedctl/irl.hpp"
#include "sharedctl/product.hpp"
#include "sharedctl/synthesis.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>

namespace py = pybind11;
using namespace sharedctl;

namespace {

Method method_of(const std::string& s) {
    if (s == "qcp") return Method::Qcp;
    if (s == "greedy") return Method::Greedy;
    if (s == "occ_inf" || s == "occ-inf") return Method::OccInf;
    if (s == "max_sat" || s == "max-sat") return Method::MaxSat;
    throw ConfigError("unknown method '" + s + "'");
}

RepairProblem problem_for(const Mdp& base, const std::string& spec, const Strategy* human, double beta,
                          ProductMdp& product, Dra& dra) {
    const SpecTemplate t = parse_template(spec);
    std::vector<std::string> ap = model_propositions(base);
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            std::vector<std::string> extra;
            if constexpr (std::is_same_v<K, ReachAvoid>) {
                extra = k.avoid;
                extra.push_back(k.target);
            } else {
                extra = k.waypoints;
                extra.insert(extra.end(), k.avoid.begin(), k.avoid.end());
            }
            for (auto& p : extra)
                if (std::find(ap.begin(), ap.end(), p) == ap.end()) ap.push_back(p);
        },
        t.kind);
    std::sort(ap.begin(), ap.end());
    dra = template_to_dra(t, ap);
    product = build_product(base, dra);
    const Strategy h = human ? *human : Strategy::uniform(base);
    return make_repair_problem(product, lift_strategy(product, h), beta);
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Strategy repair for shared control";

    py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<StrategyMismatch>(m, "StrategyMismatch", PyExc_ValueError);
    static PyObject* infeasible = py::exception<SpecInfeasible>(m, "SpecInfeasible", PyExc_RuntimeError).release().ptr();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const SpecInfeasible& e) {
            py::object err = py::reinterpret_borrow<py::object>(infeasible)(e.what());
            err.attr("achievable") = e.achievable();
            PyErr_SetObject(infeasible, err.ptr());
        }
    });

    py::class_<Mdp>(m, "Mdp")
        .def_static("from_json", &parse_model, py::arg("text"))
        .def("to_json", &model_to_json)
        .def_property_readonly("num_states", &Mdp::num_states)
        .def_property_readonly("num_transitions", &Mdp::num_transitions)
        .def_property_readonly("initial", &Mdp::initial)
        .def("actions", [](const Mdp& mdp, StateId s) {
            std::vector<std::string> out;
            for (const auto& c : mdp.actions(s)) out.push_back(c.name);
            return out;
        })
        .def("labels", [](const Mdp& mdp, StateId s) {
            auto l = mdp.labels(s);
            return std::vector<std::string>(l.begin(), l.end());
        });

    py::class_<Strategy>(m, "Strategy")
        .def(py::init<std::vector<std::vector<double>>>())
        .def_static("uniform", &Strategy::uniform)
        .def_static("from_json", &parse_strategy, py::arg("text"), py::arg("mdp"))
        .def("to_json", [](const Strategy& s, const Mdp& mdp) { return strategy_to_json(mdp, s); })
        .def("validate", &Strategy::validate)
        .def("at", [](const Strategy& s, StateId k) {
            auto d = s.at(k);
            return std::vector<double>(d.begin(), d.end());
        })
        .def_property_readonly("data", &Strategy::data);

    m.def("reach_probability",
          [](const Mdp& mdp, const Strategy& s, const std::vector<StateId>& target) {
              StateSet t = target;
              std::sort(t.begin(), t.end());
              t.erase(std::unique(t.begin(), t.end()), t.end());
              return reach_probability(induce_mc(mdp, s), mdp.initial(), t);
          },
          py::arg("mdp"), py::arg("strategy"), py::arg("target"));

    m.def("synthesize",
          [](const Mdp& base, double beta, const std::string& spec, std::optional<Strategy> human,
             const std::string& method, double epsilon) {
              ProductMdp product;
              Dra dra;
              RepairProblem p = problem_for(base, spec, human ? &*human : nullptr, beta, product, dra);
              p.epsilon = epsilon;
              const SynthesisResult r = synthesize(p, method_of(method));
              py::dict out;
              out["method"] = std::string(to_string(r.method));
              out["engine"] = std::string(to_string(r.engine));
              out["delta_hat"] = r.delta_hat;
              out["probability"] = r.probability;
              out["probes"] = r.iterations.size();
              out["strategy"] = r.strategy.data();
              out["product_states"] = product.mdp.num_states();
              return out;
          },
          py::arg("mdp"), py::arg("beta"), py::arg("spec") = "reach_avoid:crash:target",
          py::arg("human") = py::none(), py::arg("method") = "qcp", py::arg("epsilon") = 1e-4);

    m.def("gridworld",
          [](int n, int region, std::uint64_t seed, bool slip) {
              GridworldConfig c;
              c.n = n;
              c.m = region;
              c.seed = seed;
              c.agent_slip = slip;
              return Gridworld(c).mdp();
          },
          py::arg("n"), py::arg("region"), py::arg("seed") = 1, py::arg("agent_slip") = true);

    m.def("blend", &blend, py::arg("human"), py::arg("autonomy"), py::arg("b"));
    m.def("extract_autonomy",
          [](const Strategy& repaired, const Strategy& human, const std::vector<double>& b) {
              AutonomyExtraction ex = extract_autonomy(repaired, human, b);
              return py::make_tuple(ex.autonomy, ex.adjusted);
          },
          py::arg("repaired"), py::arg("human"), py::arg("b"));

    m.def("sample_bound", &sample_bound, py::arg("gamma"), py::arg("confidence"));
}
