#include "dcmg/equilibrium.hpp"
#include "dcmg/scenario.hpp"
#include "dcmg/verify.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace dcmg;

namespace {

ScenarioConfig parse(const std::string& text) { return parse_config(nlohmann::json::parse(text)); }

ScenarioConfig with_overrides(ScenarioConfig c, std::optional<double> dt, std::optional<double> duration) {
    if (dt) {
        c.dt = *dt;
        c.record_dt = std::max(c.record_dt, c.dt);
    }
    if (duration) {
        c.duration = *duration;
    }
    return c;
}

py::dict trajectory_dict(const Trajectory& t) {
    const auto cols = csv_columns(t);
    py::array_t<double> data({t.samples.size(), cols.size()});
    auto m = data.mutable_unchecked<2>();
    for (std::size_t k = 0; k < t.samples.size(); ++k) {
        const auto& s = t.samples[k];
        std::size_t c = 0;
        m(k, c++) = s.t;
        for (Eigen::Index i = 0; i < s.x.size(); ++i) m(k, c++) = s.x[i];
        for (Eigen::Index j = 0; j < s.v_c.size(); ++j) m(k, c++) = s.v_c[j];
        m(k, c++) = s.monitor.S;
        m(k, c++) = s.monitor.S_d;
        m(k, c++) = s.monitor.S_d_dot_analytic;
        m(k, c++) = s.monitor.supply_rate;
        m(k, c++) = s.monitor.in_zip_region ? 1.0 : 0.0;
        for (bool b : s.saturated) m(k, c++) = b ? 1.0 : 0.0;
    }
    py::list events;
    for (const auto& e : t.applied_events) {
        events.append(py::dict(py::arg("index") = e.index, py::arg("t_requested") = e.t_requested,
                               py::arg("t_applied") = e.t_applied));
    }
    py::dict out;
    out["columns"] = cols;
    out["data"] = data;
    out["completed"] = t.termination == Termination::Completed;
    out["message"] = t.message;
    out["events"] = events;
    return out;
}

}  // namespace

PYBIND11_MODULE(_dcmg, m) {
    m.doc() = "DC microgrid boost-converter simulator (core bindings; configs are passed as JSON text)";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def("preset_names", &preset_names);
    m.def("preset_json", [](const std::string& name) {
        auto c = find_preset(name);
        if (!c) throw ConfigError({name + ": no such preset"});
        return to_json(*c).dump();
    });
    m.def("load_json", [](const std::string& path_or_preset) { return to_json(load_config(path_or_preset)).dump(); });
    m.def("normalize_json", [](const std::string& text) { return to_json(parse(text)).dump(); });

    m.def("equilibrium", [](const std::string& text) {
        const auto s = build_scenario(parse(text));
        const Vector u = duty_reference(source_voltages(s.network), s.controller.V_d_star);
        const auto eq = steady_state_closed_form(u, s.network, s.demand);
        py::dict out;
        out["V_bar"] = std::vector<double>(eq.V_bar.begin(), eq.V_bar.end());
        out["I_s_bar"] = std::vector<double>(eq.I_s_bar.begin(), eq.I_s_bar.end());
        out["I_bar"] = std::vector<double>(eq.I_bar.begin(), eq.I_bar.end());
        out["u_bar"] = std::vector<double>(eq.u_bar.begin(), eq.u_bar.end());
        out["residual"] = eq.residual_norm;
        out["current_balance"] = verify_current_balance(eq, s.network, s.demand);
        out["feasible"] = eq.feasible;
        out["in_zip_region"] = eq.in_zip_region;
        return out;
    });

    m.def(
        "run",
        [](const std::string& text, std::optional<double> dt, std::optional<double> duration) {
            const auto s = build_scenario(with_overrides(parse(text), dt, duration));
            Trajectory t;
            {
                py::gil_scoped_release release;
                t = run(s);
            }
            return trajectory_dict(t);
        },
        py::arg("config"), py::arg("dt") = py::none(), py::arg("duration") = py::none());

    m.def(
        "csv",
        [](const std::string& text, std::optional<double> dt, std::optional<double> duration) {
            const auto s = build_scenario(with_overrides(parse(text), dt, duration));
            py::gil_scoped_release release;
            return format_csv(run(s));
        },
        py::arg("config"), py::arg("dt") = py::none(), py::arg("duration") = py::none());

    m.def(
        "verify",
        [](const std::string& text, std::optional<double> dt, std::optional<double> duration) {
            const auto s = build_scenario(with_overrides(parse(text), dt, duration));
            VerifyReport r;
            {
                py::gil_scoped_release release;
                r = verify_trajectory(run(s));
            }
            py::list checks;
            for (const auto& c : r.checks) {
                checks.append(py::dict(py::arg("name") = c.name, py::arg("passed") = c.passed,
                                       py::arg("detail") = c.detail));
            }
            return checks;
        },
        py::arg("config"), py::arg("dt") = py::none(), py::arg("duration") = py::none());

    m.def("duty_reference", [](double V_s, double V_d) {
        return duty_reference(Vector::Constant(1, V_s), Vector::Constant(1, V_d))[0];
    });
}
