#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "tblm/app.hpp"
#include "tblm/codec.hpp"
#include "tblm/data.hpp"
#include "tblm/net.hpp"
#include "tblm/pendulum.hpp"
#include "tblm/telescope.hpp"

namespace py = pybind11;
using namespace tblm;

namespace {

std::vector<double> forward_list(const Topology& topo, const std::vector<double>& weights, const std::vector<double>& input) {
    if (weights.size() != topo.n_weights()) throw std::invalid_argument("weight count does not match topology");
    const Activations a = forward(topo, weights, input);
    return {a.output().begin(), a.output().end()};
}

py::dict run_from_json(const std::string& spec_json, const std::string& out_dir) {
    RunSpec spec = spec_from_json(spec_json);
    spec.out_dir = out_dir;
    spec.validate();
    std::ostringstream log;
    RunOutput r;
    {
        py::gil_scoped_release release;
        r = execute(spec, log);
    }
    py::dict d;
    d["exit_code"] = r.exit_code;
    d["accepted"] = r.trace.accepted;
    d["probes"] = r.trace.probes;
    d["seconds"] = r.trace.seconds;
    d["stop_reason"] = std::string(to_string(r.trace.reason));
    d["best_validation"] = r.trace.best_validation;
    d["final_train_loss"] = r.trace.final_train_loss;
    d["test_error"] = r.test_error;
    std::vector<std::string> files;
    for (const auto& f : r.files) files.push_back(f.string());
    d["files"] = files;
    d["log"] = log.str();
    return d;
}

}  // namespace

PYBIND11_MODULE(_tblm, m) {
    m.doc() = "Binary learning machine: local search over Gray-coded network weights";

    m.def("gray_encode", &gray_encode, py::arg("h"), py::arg("n_bits"));
    m.def("gray_decode", &gray_decode, py::arg("pattern"), py::arg("n_bits"));
    m.def("expected_min", &expected_min, py::arg("k"), py::arg("n"),
          "Expected number of failed probes before the first of k improving moves among n.");
    m.def("expected_min_closed_form", &expected_min_closed_form, py::arg("k"), py::arg("n"));

    py::class_<WeightFormat>(m, "WeightFormat")
        .def(py::init<int, double>(), py::arg("n_bits"), py::arg("w_max"))
        .def_property_readonly("n_bits", &WeightFormat::n_bits)
        .def_property_readonly("w_max", &WeightFormat::w_max)
        .def_property_readonly("epsilon", &WeightFormat::epsilon)
        .def("value_of", &WeightFormat::value_of)
        .def("nearest_multiplier", &WeightFormat::nearest_multiplier);

    py::class_<Topology>(m, "Topology")
        .def_static("parse", [](const std::string& arch, const std::string& hidden, const std::string& output,
                                bool recurrent) { return Topology::parse(arch, parse_transfer(hidden), parse_transfer(output), recurrent); },
                    py::arg("arch"), py::arg("hidden") = "tanh", py::arg("output") = "logistic", py::arg("recurrent") = false)
        .def_property_readonly("layer_sizes", &Topology::layer_sizes)
        .def_property_readonly("n_weights", &Topology::n_weights)
        .def_property_readonly("recurrent", &Topology::recurrent)
        .def("__repr__", [](const Topology& t) { return "<Topology " + t.arch_string() + ">"; });

    m.def("forward", &forward_list, py::arg("topology"), py::arg("weights"), py::arg("input"));

    m.def("two_spirals", [] {
        const TwoSpirals ts = two_spirals();
        return py::make_tuple(ts.train.inputs, ts.train.targets, ts.test.inputs, ts.test.targets);
    }, "Normalized (train_inputs, train_targets, test_inputs, test_targets), row-major flat lists.");

    py::class_<SimResult>(m, "SimResult")
        .def_readonly("err", &SimResult::err)
        .def_readonly("diverged", &SimResult::diverged)
        .def_readonly("max_abs_theta", &SimResult::max_abs_theta)
        .def_readonly("steps", &SimResult::steps);

    m.def("simulate", [](const Topology& topo, const std::vector<double>& weights, const std::string& mode, double theta0,
                         double horizon) {
        SimConfig cfg;
        cfg.horizon = horizon;
        return simulate(topo, weights, parse_feedback(mode), theta0, cfg);
    }, py::arg("topology"), py::arg("weights"), py::arg("mode"), py::arg("theta0"), py::arg("horizon") = 100.0);

    m.def("simulate_uncontrolled", [](double theta0, double horizon) {
        SimConfig cfg;
        cfg.horizon = horizon;
        return simulate_with([](const SimState&) { return 0.0; }, theta0, cfg);
    }, py::arg("theta0"), py::arg("horizon") = 100.0);

    m.def("parse_args", [](std::vector<std::string> args) {
        args.insert(args.begin(), "tblm");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        const RunSpec spec = parse_and_validate(static_cast<int>(argv.size()), argv.data()).spec;
        return py::make_tuple(to_json(spec), spec.out_dir);
    }, py::arg("args"), "(spec JSON, output directory) for a `tblm train ...` argument list.");

    m.def("run", &run_from_json, py::arg("spec_json"), py::arg("out_dir") = ".",
          "Train per a JSON run spec and write its artifacts into out_dir.");

    m.def("replay", [](const std::string& genome_path, bool use_final) { return to_json(replay(genome_path, use_final)); },
          py::arg("genome_path"), py::arg("use_final") = false);

    py::register_exception<CliError>(m, "CliError", PyExc_ValueError);
}
