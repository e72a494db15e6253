// Python extension. JSON crosses the boundary as text; the sarguard package
// turns it into dicts.

#include "sarguard/bayes_net.hpp"
#include "sarguard/belief_update.hpp"
#include "sarguard/error.hpp"
#include "sarguard/events.hpp"
#include "sarguard/guardrails.hpp"
#include "sarguard/replay.hpp"
#include "sarguard/runner.hpp"
#include "sarguard/text.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using nlohmann::json;

namespace {

// Leaked so it outlives interpreter teardown. Raised with (code, message).
py::exception<sar::Error>* error_type = nullptr;

sar::StrategyBelief belief_arg(const std::string& text) { return sar::belief_from_json(json::parse(text)); }

sar::Level level_arg(const std::string& text) {
    auto l = sar::parse_level(text);
    if (!l) throw sar::Error(sar::ErrorCode::validation, "unknown level '" + text + "' (High, Medium, Low)");
    return *l;
}

std::string infer(const std::string& evidence, const std::optional<std::string>& network) {
    const sar::BayesNet net = network ? sar::load_network(*network)
                                      : sar::load_network_file(sar::data_path("network/default_network.json"));
    return sar::belief_to_json(sar::infer_strategies(net, json::parse(evidence).get<sar::EvidenceAssignment>())).dump();
}

std::string update(const std::string& belief, const std::string& target, double gamma) {
    return sar::belief_to_json(sar::apply_update(belief_arg(belief), {gamma, sar::strategy_from_string(target)})).dump();
}

double alpha(const std::string& relevance, const std::string& cv, const std::string& interp, double lambda, double mu) {
    sar::Hyperparams hp;
    hp.lambda = lambda;
    hp.mu = mu;
    hp.validate();
    return sar::compute_alpha({level_arg(relevance), level_arg(cv), level_arg(interp), sar::Strategy::Region}, hp);
}

std::string verdict(const std::string& belief, const std::string& current, const std::string& proposed,
                    double threshold, double delta) {
    sar::EntropyPolicy policy;
    policy.high_entropy_threshold = threshold;
    policy.delta_threshold = delta;
    policy.validate();
    return sar::to_json(sar::entropy_verdict(belief_arg(belief), sar::strategy_from_string(current),
                                             sar::strategy_from_string(proposed), policy))
        .dump();
}

py::tuple run(const std::string& scenario, const std::string& policy, std::optional<std::uint64_t> seed,
              const std::optional<std::string>& config, std::optional<int> ticks_max,
              const std::optional<std::string>& mission_id) {
    std::unique_ptr<sar::MissionEngine> engine;
    std::unique_ptr<sar::OperatorPolicy> pol;
    {
        py::gil_scoped_release release;
        auto setup = sar::load_setup(scenario, {}, ticks_max);
        if (config) sar::apply_config(setup.scenario, json::parse(*config));
        pol = sar::make_policy(policy);
        engine = sar::make_engine(setup, mission_id.value_or(setup.scenario.id), seed);
        sar::run_mission(*engine, *pol);
    }
    auto summary = sar::to_json(sar::summarize(*engine));
    summary["belief"] = sar::belief_to_json(engine->belief());
    return py::make_tuple(summary.dump(), sar::export_replay(*engine, pol->name()));
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "sarguard mission engine";
    m.attr("__version__") = SAR_VERSION;

    error_type = new py::exception<sar::Error>(m, "Error", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const sar::Error& e) {
            PyErr_SetObject(error_type->ptr(), py::make_tuple(sar::to_string(e.code()), e.what()).ptr());
        } catch (const json::exception& e) {
            PyErr_SetObject(error_type->ptr(), py::make_tuple("parse", e.what()).ptr());
        }
    });

    m.def("data_dir", &sar::data_dir);
    m.def("infer", &infer, py::arg("evidence"), py::arg("network") = py::none());
    m.def("update", &update, py::arg("belief"), py::arg("target"), py::arg("gamma"));
    m.def("alpha", &alpha, py::arg("relevance"), py::arg("cv_confidence"), py::arg("interp_confidence"),
          py::arg("lam") = 0.5, py::arg("mu") = 0.5);
    m.def("entropy", [](const std::string& belief) { return sar::normalized_entropy(belief_arg(belief)); });
    m.def("verdict", &verdict, py::arg("belief"), py::arg("current"), py::arg("proposed"), py::arg("threshold") = 0.85,
          py::arg("delta") = 0.05);
    m.def("run", &run, py::arg("scenario"), py::arg("policy"), py::arg("seed") = py::none(),
          py::arg("config") = py::none(), py::arg("ticks_max") = py::none(), py::arg("mission_id") = py::none());
    m.def("verify", [](const std::string& replay) { return sar::to_json(sar::verify_replay_text(replay)).dump(); });
    m.def("plot_csv", [](const std::string& replay) { return sar::plot_csv(sar::parse_replay(replay)); });
    m.def("snapshot", [](const std::string& replay, std::uint64_t seq) {
        return sar::snapshot_at(sar::parse_replay(replay), seq).dump();
    });
}
